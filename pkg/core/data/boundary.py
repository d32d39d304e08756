"""
Nominal boundary demand providers.

A provider maps a filter step k (the transition from time k*dt to (k+1)*dt) to a per-link
demand vector in veh/s; only source and onramp entries are non-zero. Process noise on these
nominal values is applied per particle by the stochastic CTM step.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.data.binning import BIN_WIDTH_S, bin_index
from core.data.records import LoopRecord
from core.errors import CoverageError
from core.network.network_class import Network

logger = logging.getLogger(__name__)


class PiecewiseDemand:
    """
    Piecewise-constant demand profiles per entry link, each a list of (t_start, veh/s) breakpoints.

    Before the first breakpoint of a link its demand is 0. Every value is multiplied by scale.
    """

    def __init__(self, net: Network, profiles: Mapping[int, Sequence[Tuple[float, float]]], scale: float = 1.0):
        self.net = net
        self.scale = float(scale)
        self.profiles: Dict[int, List[Tuple[float, float]]] = {}
        for link_id, profile in profiles.items():
            link_id = int(link_id)
            if not (0 <= link_id < net.n_links) or not net.entry_mask[link_id]:
                raise ValueError(f"demand profile given for link {link_id}, which is not a source or onramp")
            points = sorted((float(t), float(q)) for t, q in profile)
            if any(q < 0 for _, q in points):
                raise ValueError(f"demand profile of link {link_id} has a negative value")
            self.profiles[link_id] = points

    def at_time(self, t: float) -> np.ndarray:
        demands = np.zeros(self.net.n_links)
        for link_id, points in self.profiles.items():
            starts = [p[0] for p in points]
            idx = np.searchsorted(starts, t, side="right") - 1
            if idx >= 0:
                demands[link_id] = points[idx][1] * self.scale
        return demands

    def __call__(self, step: int) -> np.ndarray:
        return self.at_time(step * self.net.dt)


@dataclass(frozen=True)
class HeldDemand:
    """
    Zero-order-hold demand: the nominal demand during bin k is the average measured flow of bin k-1.

    table has one row per bin and one column per link.
    """

    table: np.ndarray
    dt: float
    width: float = BIN_WIDTH_S

    def at_time(self, t: float) -> np.ndarray:
        row = min(bin_index(t, self.width), self.table.shape[0] - 1)
        return self.table[row]

    def __call__(self, step: int) -> np.ndarray:
        return self.at_time(step * self.dt)


def _intervals(bins: List[int], width: float) -> List[Tuple[float, float]]:
    """Merge consecutive bin indices into [start, end) second intervals."""
    out: List[Tuple[float, float]] = []
    for k in bins:
        if out and out[-1][1] == k * width:
            out[-1] = (out[-1][0], (k + 1) * width)
        else:
            out.append((k * width, (k + 1) * width))
    return out


def bin_average_flows(records: Iterable[LoopRecord], net: Network, n_bins: int, width: float = BIN_WIDTH_S) -> np.ndarray:
    """Mean reported flow per bin and per entry link; NaN where a bin has no healthy report."""
    sums = np.zeros((n_bins, net.n_links))
    counts = np.zeros((n_bins, net.n_links))
    for r in records:
        if r.link_id >= net.n_links or not net.entry_mask[r.link_id] or r.flow is None or not r.healthy:
            continue
        k = bin_index(r.timestamp, width)
        if k < n_bins:
            sums[k, r.link_id] += r.flow
            counts[k, r.link_id] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def boundary_series(
    records: Iterable[LoopRecord],
    net: Network,
    horizon: float,
    width: float = BIN_WIDTH_S,
    warmup: Optional[Mapping[int, float]] = None,
) -> HeldDemand:
    """
    Zero-order-hold nominal demand on every entry link from its loop flows, on a one-bin delay.

    The first bin has no previous measurement and uses warmup when given, otherwise the first
    bin's own average.

    Raises:
        CoverageError: an entry link lacks reports for a bin the horizon needs
    """
    n_bins = max(1, int(math.ceil(horizon / width - 1e-9)))
    means = bin_average_flows(records, net, n_bins, width)
    warmup = {int(k): float(v) for k, v in (warmup or {}).items()}

    table = np.zeros((n_bins, net.n_links))
    uncovered: List[Tuple[int, float, float]] = []
    for link_id in net.entry_ids:
        needed = list(range(n_bins - 1))
        if link_id not in warmup:
            needed = sorted(set(needed) | {0})
        missing = [k for k in needed if np.isnan(means[k, link_id])]
        uncovered.extend((int(link_id), start, end) for start, end in _intervals(missing, width))
        if missing:
            continue
        table[0, link_id] = warmup.get(int(link_id), means[0, link_id])
        table[1:, link_id] = means[:-1, link_id]

    if uncovered:
        listing = ", ".join(f"link {link} [{start:g}, {end:g})" for link, start, end in uncovered)
        raise CoverageError(f"boundary flow records do not cover: {listing}", uncovered=uncovered)
    logger.info(f"Boundary series built for {len(net.entry_ids)} entry links over {n_bins} bins (zero-order hold)")
    return HeldDemand(table=table, dt=net.dt, width=width)
