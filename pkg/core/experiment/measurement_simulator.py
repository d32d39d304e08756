"""
Synthetic loop and probe measurements drawn from a ground-truth rollout.

Bin k covers [k*width, (k+1)*width). Its measurements describe the truth at the bin's final
timestep, which is also the filter step they are assimilated at.
"""
import logging
from typing import Dict, List, Sequence

import numpy as np

from core.ctm.flux import link_velocity
from core.data.binning import BIN_WIDTH_S, assimilation_step
from core.data.records import LinkGeometry, LoopRecord, ProbeRecord
from core.experiment.scenario_config import probe_count
from core.experiment.truth import TruthRun
from core.fusion.measurement import Measurement, MeasurementBatch, MeasurementKind
from core.network.network_class import Network

logger = logging.getLogger(__name__)

CORRIDOR_BEARING = 90.0
CORRIDOR_HALF_WIDTH = 10.0


def measured_bins(n_steps: int, dt: float, width: float = BIN_WIDTH_S) -> List[int]:
    """Bins whose reference step falls inside the horizon."""
    bins = []
    k = 0
    while assimilation_step(k, dt, width) <= n_steps:
        bins.append(k)
        k += 1
    return bins


def _contaminate(values: np.ndarray, noise_frac: float, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(values.shape)
    return np.maximum(values + noise_frac * values * z, 0.0)


def simulate_loop_measurements(
    truth_rho: np.ndarray,
    detectors: Sequence[int],
    noise_frac: float,
    rng: np.random.Generator,
    dt: float,
    width: float = BIN_WIDTH_S,
) -> Dict[int, MeasurementBatch]:
    """
    One density measurement per detector link per bin: truth + N(0, (noise_frac * truth)^2), clamped at 0.

    Returns batches keyed by bin index.
    """
    detectors = np.asarray(list(detectors), dtype=int)
    batches: Dict[int, MeasurementBatch] = {}
    for k in measured_bins(truth_rho.shape[0] - 1, dt, width):
        if detectors.size == 0:
            break
        truth = truth_rho[assimilation_step(k, dt, width), detectors]
        values = _contaminate(truth, noise_frac, rng)
        batches[k] = MeasurementBatch.of(
            Measurement(MeasurementKind.DENSITY, float(v), int(link), k, f"loop-{int(link)}")
            for link, v in zip(detectors, values)
        )
    return batches


def simulate_probe_measurements(
    truth_rho: np.ndarray,
    net: Network,
    penetration_rate: float,
    noise_frac: float,
    rng: np.random.Generator,
    width: float = BIN_WIDTH_S,
) -> Dict[int, MeasurementBatch]:
    """
    floor(PR * 100) velocity measurements per bin on links drawn with replacement, each link with
    probability proportional to its occupancy rho * length at the bin's reference step.

    A bin with an empty corridor yields no measurements.
    """
    count = probe_count(penetration_rate)
    batches: Dict[int, MeasurementBatch] = {}
    if count == 0:
        return batches
    mainline = net.mainline_ids
    for k in measured_bins(truth_rho.shape[0] - 1, net.dt, width):
        rho = truth_rho[assimilation_step(k, net.dt, width)]
        occupancy = rho[mainline] * net.length[mainline]
        total = occupancy.sum()
        if total <= 0:
            logger.debug(f"Bin {k}: empty corridor, no probe reports")
            continue
        links = rng.choice(mainline, size=count, replace=True, p=occupancy / total)
        speeds = _contaminate(np.asarray(link_velocity(net, rho))[links], noise_frac, rng)
        batches[k] = MeasurementBatch.of(
            Measurement(MeasurementKind.VELOCITY, float(v), int(link), k, f"probe-{k}-{i}")
            for i, (link, v) in enumerate(zip(links, speeds))
        )
    return batches


def corridor_geometry(net: Network) -> List[LinkGeometry]:
    """Mainline laid out eastward along the x axis, one box per link; neighbouring boxes share an edge."""
    boxes = []
    x = 0.0
    for link_id in net.mainline_ids:
        length = float(net.length[link_id])
        boxes.append(LinkGeometry(
            link_id=int(link_id), x_min=x, x_max=x + length,
            y_min=-CORRIDOR_HALF_WIDTH, y_max=CORRIDOR_HALF_WIDTH, bearing=CORRIDOR_BEARING,
        ))
        x += length
    return boxes


def loop_records(
    batches: Dict[int, MeasurementBatch],
    truth: TruthRun,
    net: Network,
    unhealthy: Sequence[int] = (),
    width: float = BIN_WIDTH_S,
) -> List[LoopRecord]:
    """
    Loop records in the ingest schema: mainline density reports plus one flow report per bin on
    every entry link, the bin's mean realized demand. Reports are stamped with their bin start.
    """
    unhealthy = set(int(d) for d in unhealthy)
    records: List[LoopRecord] = []
    steps_per_bin = int(round(width / truth.dt))
    n_bins = int(np.ceil(truth.n_steps / steps_per_bin))
    for k in range(n_bins):
        stamp = k * width
        for m in batches.get(k, ()):
            records.append(LoopRecord(
                timestamp=stamp, detector_id=m.device or f"loop-{m.link}", link_id=m.link,
                density=m.value, healthy=m.link not in unhealthy,
            ))
        flows = truth.entry_flows[k * steps_per_bin:(k + 1) * steps_per_bin].mean(axis=0)
        for link_id in net.entry_ids:
            records.append(LoopRecord(
                timestamp=stamp, detector_id=f"entry-{int(link_id)}", link_id=int(link_id), flow=float(flows[link_id]),
            ))
    return records


def probe_records(batches: Dict[int, MeasurementBatch], geometry: Sequence[LinkGeometry], width: float = BIN_WIDTH_S) -> List[ProbeRecord]:
    """Probe reports placed at the centre of their link's box, heading along the link bearing."""
    boxes = {g.link_id: g for g in geometry}
    records: List[ProbeRecord] = []
    for k in sorted(batches):
        for m in batches[k]:
            box = boxes[m.link]
            records.append(ProbeRecord(
                timestamp=k * width, device_id=m.device or f"probe-{k}", speed=m.value,
                x=0.5 * (box.x_min + box.x_max), y=0.5 * (box.y_min + box.y_max), heading=box.bearing,
            ))
    return records
