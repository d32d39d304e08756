from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core.network.network_class import Network

STATE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DensityState:
    """
    Per-link vehicle densities (veh/m) plus entry-queue contents (veh).

    Both arrays are indexed by link id along the last axis. A leading axis, when
    present, indexes particles, so one DensityState can hold a whole ensemble.
    Densities of links that do not carry density (ramps, source, sink) stay 0, and
    queues are non-zero only on source and onramp links.
    """

    rho: np.ndarray
    queues: np.ndarray

    @classmethod
    def zeros(cls, net: Network, batch: Optional[int] = None) -> "DensityState":
        shape = (net.n_links,) if batch is None else (batch, net.n_links)
        return cls(rho=np.zeros(shape), queues=np.zeros(shape))

    @classmethod
    def from_mainline(cls, net: Network, mainline_rho, queues=None) -> "DensityState":
        """Build a single state from densities listed in mainline order."""
        rho = np.zeros(net.n_links)
        rho[net.mainline_ids] = np.asarray(mainline_rho, dtype=float)
        q = np.zeros(net.n_links) if queues is None else np.asarray(queues, dtype=float)
        return cls(rho=rho, queues=q)

    @property
    def batch_shape(self) -> Tuple[int, ...]:
        return self.rho.shape[:-1]

    @property
    def is_batch(self) -> bool:
        return self.rho.ndim == 2

    def particle(self, index: int) -> "DensityState":
        return DensityState(rho=self.rho[index], queues=self.queues[index])

    def take(self, indices) -> "DensityState":
        return DensityState(rho=self.rho[indices], queues=self.queues[indices])

    def as_batch(self) -> "DensityState":
        if self.is_batch:
            return self
        return DensityState(rho=self.rho[None, :], queues=self.queues[None, :])

    def mainline(self, net: Network) -> np.ndarray:
        return self.rho[..., net.mainline_ids]

    def total_vehicles(self, net: Network) -> np.ndarray:
        """Vehicles on density-carrying links plus vehicles waiting in entry queues."""
        on_links = np.sum(self.rho[..., net.density_mask] * net.length[net.density_mask], axis=-1)
        return on_links + np.sum(self.queues, axis=-1)

    def violations(self, net: Network, tol: float = STATE_TOLERANCE) -> list:
        """Return link ids whose density or queue breaks the state invariants."""
        rho = self.rho.reshape(-1, net.n_links)
        queues = self.queues.reshape(-1, net.n_links)
        rho_j = np.where(net.density_mask, net.rho_j, np.inf)
        bad = (
            ~np.isfinite(rho) | ~np.isfinite(queues)
            | (rho < -tol) | (rho > rho_j + tol) | (queues < -tol)
        )
        return np.flatnonzero(bad.any(axis=0)).tolist()

    def is_valid(self, net: Network, tol: float = STATE_TOLERANCE) -> bool:
        return not self.violations(net, tol)
