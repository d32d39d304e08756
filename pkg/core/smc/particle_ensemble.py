import logging
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from core.ctm.density_state import DensityState
from core.errors import DegenerateEnsembleError

logger = logging.getLogger(__name__)

# sampler(rng, P) -> batched DensityState with P particles
InitialConditionSampler = Callable[[np.random.Generator, int], DensityState]
Transition = Callable[[DensityState], DensityState]


@dataclass(frozen=True)
class ParticleEnsemble:
    """P weighted density-state particles at filter timestep t. Weights always sum to one."""

    states: DensityState
    weights: np.ndarray
    t: int = 0

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    def particle(self, index: int) -> DensityState:
        return self.states.particle(index)

    def with_uniform_weights(self) -> "ParticleEnsemble":
        return replace(self, weights=np.full(self.size, 1.0 / self.size))


def init_ensemble(P: int, sampler: InitialConditionSampler, rng: np.random.Generator, net=None) -> ParticleEnsemble:
    """Draw P particles from the initial-condition distribution, each with weight 1/P."""
    if P < 1:
        raise ValueError(f"particle count must be at least 1, got {P}")
    states = sampler(rng, P).as_batch()
    if states.rho.shape[0] != P:
        raise ValueError(f"sampler returned {states.rho.shape[0]} particles, expected {P}")
    if net is not None:
        bad = states.violations(net)
        if bad:
            raise ValueError(f"initial-condition sampler produced invalid densities on links {bad}")
    return ParticleEnsemble(states=states, weights=np.full(P, 1.0 / P), t=0)


def predict(ensemble: ParticleEnsemble, transition: Transition) -> ParticleEnsemble:
    """Push every particle through the transition kernel; weights are left untouched."""
    return ParticleEnsemble(states=transition(ensemble.states), weights=ensemble.weights, t=ensemble.t + 1)


def reweigh_log(ensemble: ParticleEnsemble, log_likelihoods) -> ParticleEnsemble:
    """
    w_p <- w_p * g_p / sum_q w_q * g_q, with g given as log values.

    Raises:
        DegenerateEnsembleError: every product w_p * g_p is zero
    """
    log_likelihoods = np.asarray(log_likelihoods, dtype=float)
    if log_likelihoods.shape != ensemble.weights.shape:
        raise ValueError(f"expected {ensemble.size} likelihood values, got {log_likelihoods.shape}")
    with np.errstate(divide="ignore"):
        log_w = np.log(ensemble.weights) + log_likelihoods
    log_w = np.where(np.isnan(log_w), -np.inf, log_w)
    total = logsumexp(log_w)
    if not np.isfinite(total):
        raise DegenerateEnsembleError(f"all {ensemble.size} particles have zero posterior weight at t={ensemble.t}")
    weights = np.exp(log_w - total)
    weights /= weights.sum()
    return replace(ensemble, weights=weights)


def reweigh(ensemble: ParticleEnsemble, likelihoods) -> ParticleEnsemble:
    """Linear-space convenience wrapper around reweigh_log."""
    likelihoods = np.asarray(likelihoods, dtype=float)
    if np.any(likelihoods < 0):
        raise ValueError("likelihood values must be non-negative")
    with np.errstate(divide="ignore"):
        return reweigh_log(ensemble, np.log(likelihoods))


def resample_multinomial(ensemble: ParticleEnsemble, rng: np.random.Generator) -> ParticleEnsemble:
    """Draw P particles i.i.d. with replacement, particle p chosen with probability w_p; new weights 1/P."""
    P = ensemble.size
    indices = rng.choice(P, size=P, replace=True, p=ensemble.weights)
    return ParticleEnsemble(states=ensemble.states.take(indices), weights=np.full(P, 1.0 / P), t=ensemble.t)


def empirical_mean(ensemble: ParticleEnsemble) -> DensityState:
    """Weighted average of the particles, the filter's point estimate."""
    return DensityState(
        rho=ensemble.weights @ ensemble.states.rho,
        queues=ensemble.weights @ ensemble.states.queues,
    )


def effective_sample_size(ensemble: ParticleEnsemble) -> float:
    """1 / sum w_p^2, between 1 (one particle carries all weight) and P (uniform)."""
    return float(1.0 / np.sum(ensemble.weights ** 2))
