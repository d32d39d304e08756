"""
Gaussian measurement likelihoods with ensemble-derived variances.

Density measurements are centred on the particle's density of the measured link; velocity
measurements on the particle's velocity pseudostate, a deterministic function of density.
Everything is evaluated in log-space and vectorized over particles and measurements.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import norm

from core.ctm.density_state import DensityState
from core.ctm.flux import link_velocity
from core.fusion.measurement import Measurement, MeasurementBatch, MeasurementKind
from core.network.network_class import Network
from core.smc.particle_ensemble import ParticleEnsemble

logger = logging.getLogger(__name__)


class LikelihoodConfig(BaseModel):
    """
    Variance floors are fractions of rho_j (density) and v_f (velocity): the floor is
    (frac * rho_j)^2 and (frac * v_f)^2 on each link.

    The noise fractions model relative measurement noise: a particle predicting x for a link
    expects readings with standard deviation noise_frac * x on top of the ensemble spread.
    Zero leaves the ensemble variance alone.
    """

    density_floor_frac: float = Field(default=0.01, gt=0.0)
    velocity_floor_frac: float = Field(default=0.01, gt=0.0)
    density_noise_frac: float = Field(default=0.10, ge=0.0)
    velocity_noise_frac: float = Field(default=0.10, ge=0.0)
    outlier_sigma: float = Field(default=50.0, gt=0.0, description="Drop a measurement whose best log-likelihood is below the Gaussian log-density at this many sigmas")


@dataclass(frozen=True)
class VelocityPseudostate:
    vbar: np.ndarray


def pseudostate_velocity(particle: DensityState, net: Network) -> VelocityPseudostate:
    """Link velocities implied by the particle's densities; zero on links without density."""
    velocity = link_velocity(net, particle.rho)
    return VelocityPseudostate(vbar=np.where(net.density_mask, velocity, 0.0))


def ensemble_variances(
    ensemble: ParticleEnsemble,
    kind: MeasurementKind,
    net: Network,
    cfg: Optional[LikelihoodConfig] = None,
    vbar: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Weighted population variance per link across particles, floored.

    Uses sum_p w_p (x_p - xbar)^2 of density or of pseudostate velocity. Links without
    density get variance 1 so the vector stays finite.
    """
    cfg = cfg or LikelihoodConfig()
    if kind == MeasurementKind.DENSITY:
        values = ensemble.states.rho
        floor = (cfg.density_floor_frac * net.rho_j) ** 2
    else:
        values = pseudostate_velocity(ensemble.states, net).vbar if vbar is None else vbar
        floor = (cfg.velocity_floor_frac * net.v_f) ** 2
    w = ensemble.weights
    mean = w @ values
    variance = w @ (values - mean) ** 2
    return np.where(net.density_mask, np.maximum(variance, np.nan_to_num(floor, nan=0.0)), 1.0)


def gaussian_log_density(values, centers, variances) -> np.ndarray:
    return norm.logpdf(values, loc=centers, scale=np.sqrt(variances))


def noise_fraction(kind: MeasurementKind, cfg: Optional[LikelihoodConfig]) -> float:
    if cfg is None:
        return 0.0
    return cfg.density_noise_frac if kind == MeasurementKind.DENSITY else cfg.velocity_noise_frac


def total_variances(centers, variances, noise_frac: float):
    """Ensemble variance plus the measurement noise a particle predicts for its own value."""
    return np.asarray(variances) + (noise_frac * np.asarray(centers)) ** 2


def measurement_likelihood(
    m: Measurement,
    particle: DensityState,
    vbar: VelocityPseudostate,
    variances: np.ndarray,
    cfg: Optional[LikelihoodConfig] = None,
) -> float:
    """
    Gaussian density of m.value centred on the particle's value of link m.link.

    Without cfg, variances are used as given; with it, the particle's measurement noise is added.
    """
    center = particle.rho[m.link] if m.kind == MeasurementKind.DENSITY else vbar.vbar[m.link]
    variance = total_variances(center, variances[m.link], noise_fraction(m.kind, cfg))
    return float(np.exp(gaussian_log_density(m.value, center, variance)))


def log_likelihood_matrix(
    batch: MeasurementBatch,
    centers: np.ndarray,
    variances: np.ndarray,
    noise_frac: float = 0.0,
) -> np.ndarray:
    """Log-likelihood of every measurement (columns) under every particle (rows)."""
    if len(batch) == 0:
        return np.zeros((centers.shape[0], 0))
    links = batch.links
    predicted = centers[:, links]
    spread = total_variances(predicted, variances[links][None, :], noise_frac)
    return gaussian_log_density(batch.values[None, :], predicted, spread)


def outlier_threshold(variances, cfg: LikelihoodConfig) -> np.ndarray:
    """Gaussian log-density at outlier_sigma standard deviations from the centre."""
    return -0.5 * np.log(2.0 * np.pi * np.asarray(variances)) - 0.5 * cfg.outlier_sigma ** 2


def screen_outliers(log_lik: np.ndarray, variances_per_measurement: np.ndarray, cfg: LikelihoodConfig) -> np.ndarray:
    """
    Keep-mask over measurements.

    A measurement is dropped for every particle at once, and only when no particle gives it a
    log-likelihood above the outlier threshold. variances_per_measurement may be (M,) or (P, M);
    each particle is then judged against its own variance.
    """
    if log_lik.shape[1] == 0:
        return np.zeros(0, dtype=bool)
    return np.any(log_lik >= outlier_threshold(variances_per_measurement, cfg), axis=0)


def particle_likelihood(
    batch: MeasurementBatch,
    particle: DensityState,
    vbar: VelocityPseudostate,
    density_variances: np.ndarray,
    velocity_variances: np.ndarray,
    cfg: Optional[LikelihoodConfig] = None,
) -> float:
    """
    Product over the (already screened) batch of the per-measurement Gaussian likelihoods.

    Density and velocity factors multiply independently; an empty batch carries no
    information and returns 1.
    """
    if len(batch) == 0:
        return 1.0
    total = 0.0
    for m in batch:
        variances = density_variances if m.kind == MeasurementKind.DENSITY else velocity_variances
        center = particle.rho[m.link] if m.kind == MeasurementKind.DENSITY else vbar.vbar[m.link]
        variance = total_variances(center, variances[m.link], noise_fraction(m.kind, cfg))
        total += float(gaussian_log_density(m.value, center, variance))
    return float(np.exp(total))


def screened_log_likelihoods(
    batch: MeasurementBatch,
    centers: np.ndarray,
    variances: np.ndarray,
    cfg: LikelihoodConfig,
) -> Tuple[np.ndarray, int, int]:
    """
    Per-particle log-likelihood of one kind of measurement after outlier screening.

    The batch must hold a single measurement kind; its noise fraction comes from cfg.

    Returns:
        (log-likelihood per particle, measurements kept, measurements dropped)
    """
    if len(batch) == 0:
        return np.zeros(centers.shape[0]), 0, 0
    frac = noise_fraction(batch.measurements[0].kind, cfg)
    log_lik = log_likelihood_matrix(batch, centers, variances, frac)
    spread = total_variances(centers[:, batch.links], variances[batch.links][None, :], frac)
    keep = screen_outliers(log_lik, spread, cfg)
    dropped = int((~keep).sum())
    if dropped:
        logger.debug(f"Dropped {dropped} of {len(batch)} measurements as outliers for every particle")
    return np.sum(log_lik[:, keep], axis=1), int(keep.sum()), dropped
