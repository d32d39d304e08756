import logging
from typing import Optional

import numpy as np

from core.ctm.ctm_class import CellTransmissionModel
from core.fusion.likelihood import LikelihoodConfig, ensemble_variances, screened_log_likelihoods
from core.fusion.measurement import MeasurementBatch, MeasurementKind
from core.smc.base_filter import BaseFilter
from core.smc.particle_ensemble import ParticleEnsemble

logger = logging.getLogger(__name__)


class ParticleFilter(BaseFilter):
    """
    Bootstrap particle filter on the stochastic CTM that assimilates density measurements only.

    Each density measurement contributes N(y; rho_p[L], var[L]) where var is the ensemble
    variance of the measured link's density.
    """

    def __init__(
        self,
        model: CellTransmissionModel,
        likelihood: Optional[LikelihoodConfig] = None,
        resample_ess_threshold: Optional[float] = None,
        name: str = "ParticleFilter",
    ):
        super().__init__(model, name=name, resample_ess_threshold=resample_ess_threshold)
        self.likelihood = likelihood or LikelihoodConfig()
        self.net = model.net

    def density_log_likelihoods(self, ensemble: ParticleEnsemble, batch: MeasurementBatch) -> Optional[np.ndarray]:
        densities = batch.of_kind(MeasurementKind.DENSITY)
        if len(densities) == 0:
            return None
        variances = ensemble_variances(ensemble, MeasurementKind.DENSITY, self.net, self.likelihood)
        log_lik, kept, dropped = screened_log_likelihoods(densities, ensemble.states.rho, variances, self.likelihood)
        self.diagnostics.used_measurements += kept
        self.diagnostics.dropped_measurements += dropped
        return log_lik if kept else None

    def log_likelihoods(self, ensemble: ParticleEnsemble, batch: MeasurementBatch) -> Optional[np.ndarray]:
        ignored = len(batch) - len(batch.of_kind(MeasurementKind.DENSITY))
        if ignored:
            logger.debug(f"{self.name} ignores {ignored} velocity measurements at t={ensemble.t}")
        return self.density_log_likelihoods(ensemble, batch)
