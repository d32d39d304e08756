import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core.ctm.density_state import STATE_TOLERANCE, DensityState
from core.ctm.noise import NoiseConfig, draw_split_ratios, perturb_demands
from core.ctm.node_model import diverge_flows, merge_flows
from core.errors import FluxError
from core.network.network_class import Network

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NetworkFlows:
    """
    All flows of one CTM step (veh/s), vectorized over an optional particle axis.

    link_in / link_out are indexed by link id. Flows into offramps and the sink are the
    vehicles that leave the corridor; link_out on entry links is the queue release.
    """

    sending: np.ndarray
    receiving: np.ndarray
    link_in: np.ndarray
    link_out: np.ndarray

    def exit_flow(self, net: Network) -> np.ndarray:
        exits = np.append(net.offramp_ids, net.sink_id)
        return np.sum(self.link_in[..., exits], axis=-1)


def _broadcast(values, shape, fill: float) -> np.ndarray:
    if values is None:
        return np.full(shape, fill)
    return np.broadcast_to(np.asarray(values, dtype=float), shape)


def compute_flows(net: Network, state: DensityState, demands, betas=None) -> NetworkFlows:
    """
    Sending/receiving functions of every link and the node-resolved interlink flows.

    Args:
        net: corridor
        state: current densities and queues, optionally batched over particles
        demands: boundary demand per link id (veh/s); only source and onramp entries are read
        betas: split ratio per node id; defaults to the corridor's nominal split ratios
    """
    rho, queues = state.rho, state.queues
    batch_shape = rho.shape[:-1]
    demands = _broadcast(demands, rho.shape, 0.0)
    if betas is None:
        betas = net.nominal_betas
    betas = _broadcast(betas, batch_shape + (net.n_nodes,), 0.0)

    dens, entry = net.density_mask, net.entry_mask
    sending = np.zeros_like(rho)
    receiving = np.full_like(rho, np.inf)
    sending[..., dens] = np.minimum(net.v_f[dens] * rho[..., dens], net.q_max[dens])
    receiving[..., dens] = np.minimum(net.q_max[dens], net.w[dens] * (net.rho_j[dens] - rho[..., dens]))
    sending[..., entry] = np.minimum(queues[..., entry] / net.dt + demands[..., entry], net.q_max[entry])

    s_up = sending[..., net.node_up]
    r_down = receiving[..., net.node_down]
    merge, diverge = net.merge_mask, net.diverge_mask
    ramp_index = np.where(net.node_ramp >= 0, net.node_ramp, 0)
    s_ramp = np.where(merge, sending[..., ramp_index], 0.0)

    q_up = np.minimum(s_up, r_down)
    q_down = q_up

    m_main, m_ramp = merge_flows(s_up, s_ramp, r_down)
    q_up = np.where(merge, m_main, q_up)
    q_down = np.where(merge, m_main + m_ramp, q_down)
    q_ramp = np.where(merge, m_ramp, 0.0)

    d_up, d_main, d_off = diverge_flows(s_up, r_down, np.where(diverge, betas, 0.0))
    q_up = np.where(diverge, d_up, q_up)
    q_down = np.where(diverge, d_main, q_down)
    q_off = np.where(diverge, d_off, 0.0)

    link_in = np.zeros_like(rho)
    link_out = np.zeros_like(rho)
    link_out[..., net.node_up] = q_up
    link_in[..., net.node_down] = q_down
    link_out[..., net.node_ramp[merge]] = q_ramp[..., merge]
    link_in[..., net.node_ramp[diverge]] = q_off[..., diverge]

    return NetworkFlows(sending=sending, receiving=receiving, link_in=link_in, link_out=link_out)


def apply_flows(net: Network, state: DensityState, flows: NetworkFlows, demands) -> DensityState:
    """Finite-volume update rho' = rho + dt/length * (q_in - q_out); queues absorb demand minus release."""
    dens, entry = net.density_mask, net.entry_mask
    demands = _broadcast(demands, state.rho.shape, 0.0)

    rho = state.rho.copy()
    rho[..., dens] += net.dt / net.length[dens] * (flows.link_in[..., dens] - flows.link_out[..., dens])
    queues = state.queues.copy()
    queues[..., entry] += (demands[..., entry] - flows.link_out[..., entry]) * net.dt

    rho_j = net.rho_j[dens]
    low = rho[..., dens] < -STATE_TOLERANCE
    high = rho[..., dens] > rho_j + STATE_TOLERANCE
    if np.any(low) or np.any(high):
        bad = np.flatnonzero(dens)[np.any((low | high).reshape(-1, int(dens.sum())), axis=0)]
        raise FluxError(f"density left [0, rho_j] on links {bad.tolist()}: flux resolution is inconsistent")
    if np.any(queues[..., entry] < -STATE_TOLERANCE * max(1.0, net.dt)):
        raise FluxError("entry queue went negative")

    rho[..., dens] = np.clip(rho[..., dens], 0.0, rho_j)
    queues = np.maximum(queues, 0.0)
    return DensityState(rho=rho, queues=queues)


def step_deterministic(net: Network, state: DensityState, demands, betas=None) -> DensityState:
    """One CTM step with given boundary demands and split ratios."""
    flows = compute_flows(net, state, demands, betas)
    return apply_flows(net, state, flows, demands)


def sample_inputs(net: Network, state: DensityState, demands, noise: NoiseConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw the random inputs of one stochastic step: noisy entry demands, then split ratios.

    Every particle of a batched state receives its own draws.

    Returns:
        (demands per link, split ratios per node), each with the state's batch shape
    """
    batch = state.rho.shape[0] if state.is_batch else None
    nominal = np.asarray(demands, dtype=float)[..., net.entry_ids]
    # demands shared by all particles get one independent draw per particle
    extra = batch if batch is not None and nominal.ndim == 1 else None
    noisy = np.zeros(state.rho.shape)
    noisy[..., net.entry_ids] = perturb_demands(nominal, noise.onramp_flow_sigma_frac, rng, batch=extra)
    betas = draw_split_ratios(net, noise, rng, batch=batch)
    return noisy, betas


def step_stochastic(net: Network, state: DensityState, demands, noise: NoiseConfig, rng: np.random.Generator) -> DensityState:
    """One draw from the stochastic CTM transition."""
    noisy, betas = sample_inputs(net, state, demands, noise, rng)
    return step_deterministic(net, state, noisy, betas)


class CellTransmissionModel:
    """
    Stochastic CTM transition kernel bound to a corridor.

    Wraps the module-level step functions so filters can hold one object carrying the
    network and its process noise.
    """

    def __init__(self, net: Network, noise: Optional[NoiseConfig] = None):
        self.net = net
        self.noise = noise or NoiseConfig()
        # fallback stream for callers that do not pass their own generator
        self.rng = np.random.default_rng(self.noise.seed)
        logger.debug(
            f"CTM kernel ready: {net.n_links} links, onramp sigma {self.noise.onramp_flow_sigma_frac:.2f}, "
            f"split concentration {self.noise.split_concentration}"
        )

    def step_deterministic(self, state: DensityState, demands, betas=None) -> DensityState:
        return step_deterministic(self.net, state, demands, betas)

    def step_stochastic(self, state: DensityState, demands, rng: Optional[np.random.Generator] = None) -> DensityState:
        return step_stochastic(self.net, state, demands, self.noise, rng if rng is not None else self.rng)

    def total_vehicles(self, state: DensityState) -> np.ndarray:
        return state.total_vehicles(self.net)
