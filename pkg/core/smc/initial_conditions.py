"""Initial-condition samplers p(X_0) for init_ensemble."""
import numpy as np

from core.ctm.density_state import DensityState
from core.network.network_class import Network


def point_mass(state: DensityState):
    def sampler(rng: np.random.Generator, P: int) -> DensityState:
        return DensityState(
            rho=np.broadcast_to(state.rho, (P,) + state.rho.shape[-1:]).copy(),
            queues=np.broadcast_to(state.queues, (P,) + state.queues.shape[-1:]).copy(),
        )

    return sampler


def multiplicative_noise(net: Network, baseline: DensityState, frac: float):
    """Baseline densities scaled per particle and per link by (1 + frac * N(0, 1)), kept inside [0, rho_j]."""
    if frac <= 0:
        return point_mass(baseline)
    mask = net.density_mask

    def sampler(rng: np.random.Generator, P: int) -> DensityState:
        rho = np.broadcast_to(baseline.rho, (P, net.n_links)).copy()
        z = rng.standard_normal((P, int(mask.sum())))
        rho[:, mask] = np.clip(rho[:, mask] * (1.0 + frac * z), 0.0, net.rho_j[mask])
        queues = np.broadcast_to(baseline.queues, (P, net.n_links)).copy()
        return DensityState(rho=rho, queues=queues)

    return sampler


def uniform_below_critical(net: Network):
    """Independent U[0, rho_c] density on every mainline link, empty queues."""
    mask = net.density_mask

    def sampler(rng: np.random.Generator, P: int) -> DensityState:
        rho = np.zeros((P, net.n_links))
        rho[:, mask] = rng.uniform(0.0, 1.0, size=(P, int(mask.sum()))) * net.rho_c[mask]
        return DensityState(rho=rho, queues=np.zeros((P, net.n_links)))

    return sampler
