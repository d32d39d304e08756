import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, List, Optional

import numpy as np

from core.ctm.ctm_class import CellTransmissionModel
from core.errors import DegenerateEnsembleError
from core.smc.particle_ensemble import (
    ParticleEnsemble,
    effective_sample_size,
    predict,
    resample_multinomial,
    reweigh_log,
)

logger = logging.getLogger(__name__)


@dataclass
class FilterDiagnostics:
    assimilations: int = 0
    resamples: int = 0
    degenerate_resets: int = 0
    used_measurements: int = 0
    dropped_measurements: int = 0
    ess: List[float] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "assimilations": self.assimilations,
            "resamples": self.resamples,
            "degenerate_resets": self.degenerate_resets,
            "used_measurements": self.used_measurements,
            "dropped_measurements": self.dropped_measurements,
            "min_ess": float(min(self.ess)) if self.ess else float("nan"),
            "mean_ess": float(np.mean(self.ess)) if self.ess else float("nan"),
        }


class BaseFilter(ABC):
    """
    Base class for sequential Monte Carlo density filters.

    Owns the predict -> weigh -> normalize -> resample cycle; subclasses only decide how a
    batch of measurements turns into one log-likelihood per particle.
    """

    def __init__(self, model: CellTransmissionModel, name: str, resample_ess_threshold: Optional[float] = None):
        """
        Args:
            model (CellTransmissionModel): transition kernel used for prediction
            name (str): label used in logs
            resample_ess_threshold (Optional[float]): resample only when ESS < threshold * P;
                None resamples after every assimilation
        """
        self.model = model
        self.name = name
        self.resample_ess_threshold = resample_ess_threshold
        self.diagnostics = FilterDiagnostics()

    @abstractmethod
    def log_likelihoods(self, ensemble: ParticleEnsemble, batch: Any) -> Optional[np.ndarray]:
        """
        Log-likelihood of the batch under every particle.

        Returns:
            Optional[np.ndarray]: shape (P,), or None when nothing in the batch is informative
        """

    def predict(self, ensemble: ParticleEnsemble, demands, rng: np.random.Generator) -> ParticleEnsemble:
        return predict(ensemble, lambda states: self.model.step_stochastic(states, demands, rng))

    def _should_resample(self, ensemble: ParticleEnsemble, ess: float) -> bool:
        if self.resample_ess_threshold is None:
            return True
        return ess < self.resample_ess_threshold * ensemble.size

    def assimilate(self, ensemble: ParticleEnsemble, batch: Any, rng: np.random.Generator) -> ParticleEnsemble:
        log_lik = self.log_likelihoods(ensemble, batch)
        if log_lik is None:
            return ensemble
        self.diagnostics.assimilations += 1
        try:
            ensemble = reweigh_log(ensemble, log_lik)
        except DegenerateEnsembleError as e:
            logger.warning(f"{self.name}: {e}; resetting to uniform weights and skipping resampling")
            self.diagnostics.degenerate_resets += 1
            return ensemble.with_uniform_weights()

        ess = effective_sample_size(ensemble)
        self.diagnostics.ess.append(ess)
        logger.debug(f"{self.name} t={ensemble.t}: ESS {ess:.1f} of {ensemble.size}")
        if self._should_resample(ensemble, ess):
            ensemble = resample_multinomial(ensemble, rng)
            self.diagnostics.resamples += 1
        return ensemble

    def step(
        self,
        ensemble: ParticleEnsemble,
        demands,
        rng_predict: np.random.Generator,
        rng_resample: np.random.Generator,
        batch: Any = None,
    ) -> ParticleEnsemble:
        """Advance one timestep and, when a batch is due, assimilate it."""
        ensemble = self.predict(ensemble, demands, rng_predict)
        if batch is None or len(batch) == 0:
            return ensemble
        return self.assimilate(ensemble, batch, rng_resample)
