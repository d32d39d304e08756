import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from core.data.records import LoopRecord, ProbeRecord
from core.errors import SchemaError
from core.fusion.measurement import Measurement, MeasurementBatch, MeasurementKind
from core.network.network_class import Network

logger = logging.getLogger(__name__)

BIN_WIDTH_S = 300.0


@dataclass(frozen=True)
class Observation:
    """A time-stamped measurement before it is assigned to a bin."""

    timestamp: float
    kind: MeasurementKind
    link: int
    value: float
    device: Optional[str] = None


def bin_index(timestamp: float, width: float = BIN_WIDTH_S) -> int:
    """Bins are half-open: [k * width, (k + 1) * width)."""
    return int(math.floor(timestamp / width))


def assimilation_step(bin_k: int, dt: float, width: float = BIN_WIDTH_S) -> int:
    """First filter timestep at or after the end of bin k."""
    return int(math.ceil((bin_k + 1) * width / dt - 1e-9))


def loop_observations(records: Iterable[LoopRecord], net: Network, include_unhealthy: bool = False) -> List[Observation]:
    """
    Density observations from mainline detectors.

    Records on links that do not carry density (entry links) are boundary data and are skipped
    here. Unhealthy detectors are excluded unless asked for.

    Raises:
        SchemaError: a mainline record has neither density nor a usable flow/speed pair
    """
    out: List[Observation] = []
    for r in records:
        if r.link_id >= net.n_links:
            raise SchemaError(f"link_id {r.link_id} is not a corridor link", line=r.line)
        if not net.density_mask[r.link_id]:
            continue
        if not r.healthy and not include_unhealthy:
            continue
        value = r.density_value()
        if value is None:
            raise SchemaError(f"detector {r.detector_id} on mainline link {r.link_id} needs density or flow with non-zero speed", line=r.line)
        out.append(Observation(r.timestamp, MeasurementKind.DENSITY, r.link_id, value, r.detector_id))
    return out


def probe_observations(matched: Iterable[Tuple[ProbeRecord, int]]) -> List[Observation]:
    return [Observation(p.timestamp, MeasurementKind.VELOCITY, link, p.speed, p.device_id) for p, link in matched]


def bin_measurements(observations: Iterable[Observation], width: float = BIN_WIDTH_S) -> Dict[int, MeasurementBatch]:
    """
    Partition observations into per-bin batches keyed by bin index.

    Within a bin, measurements keep timestamp order (stable for equal stamps).
    """
    grouped: Dict[int, List[Observation]] = {}
    for obs in sorted(observations, key=lambda o: o.timestamp):
        grouped.setdefault(bin_index(obs.timestamp, width), []).append(obs)
    batches = {
        k: MeasurementBatch.of(Measurement(o.kind, o.value, o.link, k, o.device) for o in grouped[k])
        for k in sorted(grouped)
    }
    logger.debug(f"Binned {sum(len(b) for b in batches.values())} observations into {len(batches)} bins")
    return batches


def schedule_batches(batches: Dict[int, MeasurementBatch], dt: float, width: float = BIN_WIDTH_S) -> Dict[int, MeasurementBatch]:
    """Re-key bin batches by the filter timestep they are assimilated at."""
    return {assimilation_step(k, dt, width): batch for k, batch in batches.items()}


def merge_batches(*sources: Dict[int, MeasurementBatch]) -> Dict[int, MeasurementBatch]:
    """Concatenate batches sharing a key; density measurements first when merged in that order."""
    merged: Dict[int, List[Measurement]] = {}
    for source in sources:
        for k, batch in source.items():
            merged.setdefault(k, []).extend(batch)
    return {k: MeasurementBatch.of(merged[k]) for k in sorted(merged)}


def count_measurements(batches: Dict[int, MeasurementBatch], kinds: Optional[Sequence[MeasurementKind]] = None) -> int:
    kinds = tuple(kinds) if kinds else tuple(MeasurementKind)
    return sum(len(batch.of_kind(kind)) for batch in batches.values() for kind in kinds)
