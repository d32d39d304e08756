import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from core.ctm.ctm_class import sample_inputs, step_deterministic
from core.ctm.density_state import DensityState
from core.data.boundary import PiecewiseDemand
from core.experiment.scenario_config import ScenarioConfig
from core.network.network_class import Network
from utils.rng import Stream, rng_stream

logger = logging.getLogger(__name__)

DemandProvider = Callable[[int], np.ndarray]


@dataclass(frozen=True)
class TruthRun:
    """
    One stochastic CTM rollout taken as ground truth.

    rho has one row per timestep 0..n_steps and one column per link id. entry_flows holds the
    realized (noisy) demand that entered each source and onramp during each step.
    """

    rho: np.ndarray
    entry_flows: np.ndarray
    dt: float

    @property
    def n_steps(self) -> int:
        return self.rho.shape[0] - 1


def baseline_state(net: Network, cfg: ScenarioConfig) -> DensityState:
    """Initial densities from the config, clipped to each mainline link's jam density."""
    n_main = len(net.mainline_ids)
    values = np.asarray(cfg.initial_density, dtype=float)
    if values.ndim == 0:
        values = np.full(n_main, float(values))
    if values.shape != (n_main,):
        raise ValueError(f"initial_density lists {values.shape[0]} values for {n_main} mainline links")
    values = np.minimum(values, net.rho_j[net.mainline_ids])
    return DensityState.from_mainline(net, values)


def nominal_demand(net: Network, cfg: ScenarioConfig, scale: float = 1.0) -> PiecewiseDemand:
    return PiecewiseDemand(net, cfg.demands, scale=scale)


def generate_truth(
    cfg: ScenarioConfig,
    net: Network,
    rng: Optional[np.random.Generator] = None,
    demand: Optional[DemandProvider] = None,
) -> TruthRun:
    """
    Roll the stochastic CTM forward once from the baseline state over the horizon.

    The rollout runs as a one-particle batch drawing from the same stream an open-loop filter
    with filter_seed == truth_seed uses, so such a filter with one particle replays it exactly.
    """
    rng = rng if rng is not None else rng_stream(cfg.truth_seed, Stream.PREDICT)
    demand = demand or nominal_demand(net, cfg, scale=cfg.truth_demand_scale)

    state = baseline_state(net, cfg).as_batch()
    rho = np.zeros((cfg.n_steps + 1, net.n_links))
    entry_flows = np.zeros((cfg.n_steps, net.n_links))
    rho[0] = state.rho[0]
    for k in range(cfg.n_steps):
        noisy, betas = sample_inputs(net, state, demand(k), cfg.noise, rng)
        state = step_deterministic(net, state, noisy, betas)
        rho[k + 1] = state.rho[0]
        entry_flows[k] = noisy[0]

    congested = rho[:, net.mainline_ids] > net.rho_c[net.mainline_ids]
    logger.info(
        f"Ground truth generated: {cfg.n_steps} steps, {int(congested.sum())} congested link-steps "
        f"(peak {rho.max():.4f} veh/m)"
    )
    return TruthRun(rho=rho, entry_flows=entry_flows, dt=net.dt)
