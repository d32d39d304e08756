import logging
from typing import Callable, Optional

import numpy as np

from core.ctm.ctm_class import CellTransmissionModel
from core.ctm.density_state import DensityState
from core.ctm.noise import NoiseConfig
from core.fusion.likelihood import (
    LikelihoodConfig,
    VelocityPseudostate,
    ensemble_variances,
    pseudostate_velocity,
    screened_log_likelihoods,
)
from core.fusion.measurement import MeasurementBatch, MeasurementKind
from core.fusion.particle_filter import ParticleFilter
from core.network.network_class import Network
from core.smc.particle_ensemble import ParticleEnsemble

logger = logging.getLogger(__name__)

VelocityMap = Callable[[DensityState, Network], VelocityPseudostate]


class RaoBlackwellizedParticleFilter(ParticleFilter):
    """
    Particle filter that samples only densities and treats link velocity as a pseudostate.

    Velocity never enters the sampled state: each particle's velocity follows from its
    densities through velocity_map, and velocity measurements multiply in as extra Gaussian
    factors around it. With no velocity measurements the filter is exactly the density-only
    ParticleFilter.
    """

    def __init__(
        self,
        model: CellTransmissionModel,
        likelihood: Optional[LikelihoodConfig] = None,
        resample_ess_threshold: Optional[float] = None,
        velocity_map: Optional[VelocityMap] = None,
        name: str = "RBPF",
    ):
        """
        Args:
            velocity_map: density -> pseudostate map; defaults to the deterministic
                fundamental-diagram velocity. A stochastic map can be plugged in here.
        """
        super().__init__(model, likelihood=likelihood, resample_ess_threshold=resample_ess_threshold, name=name)
        self.velocity_map = velocity_map or pseudostate_velocity

    def velocity_log_likelihoods(self, ensemble: ParticleEnsemble, batch: MeasurementBatch) -> Optional[np.ndarray]:
        velocities = batch.of_kind(MeasurementKind.VELOCITY)
        if len(velocities) == 0:
            return None
        vbar = self.velocity_map(ensemble.states, self.net).vbar
        variances = ensemble_variances(ensemble, MeasurementKind.VELOCITY, self.net, self.likelihood, vbar=vbar)
        log_lik, kept, dropped = screened_log_likelihoods(velocities, vbar, variances, self.likelihood)
        self.diagnostics.used_measurements += kept
        self.diagnostics.dropped_measurements += dropped
        return log_lik if kept else None

    def log_likelihoods(self, ensemble: ParticleEnsemble, batch: MeasurementBatch) -> Optional[np.ndarray]:
        density = self.density_log_likelihoods(ensemble, batch)
        velocity = self.velocity_log_likelihoods(ensemble, batch)
        if velocity is None:
            return density
        if density is None:
            return velocity
        return density + velocity


def rbpf_step(
    ensemble: ParticleEnsemble,
    batch: MeasurementBatch,
    net: Network,
    noise: NoiseConfig,
    cfg: LikelihoodConfig,
    rng: np.random.Generator,
    demands,
) -> ParticleEnsemble:
    """
    One full filter step: predict, pseudostate, screen, weigh, normalize, resample.

    Prediction and resampling draw from the same generator in that order.
    """
    filt = RaoBlackwellizedParticleFilter(CellTransmissionModel(net, noise), likelihood=cfg)
    return filt.step(ensemble, demands, rng, rng, batch=batch)


def particle_filter_step(
    ensemble: ParticleEnsemble,
    batch: MeasurementBatch,
    net: Network,
    noise: NoiseConfig,
    cfg: LikelihoodConfig,
    rng: np.random.Generator,
    demands,
) -> ParticleEnsemble:
    """Density-only counterpart of rbpf_step."""
    filt = ParticleFilter(CellTransmissionModel(net, noise), likelihood=cfg)
    return filt.step(ensemble, demands, rng, rng, batch=batch)
