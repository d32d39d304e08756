"""
Bounding-box map matching of probe points.

A probe point is assigned to a link only when exactly one link box contains it and its heading
lies within the heading tolerance of the link's end-to-end bearing.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.data.records import LinkGeometry, ProbeRecord
from core.errors import GeometryError

logger = logging.getLogger(__name__)

HEADING_TOLERANCE_DEG = 15.0


class MatchOutcome(str, Enum):
    MATCHED = "matched"
    HEADING_REJECTED = "heading_rejected"
    GEOMETRY_REJECTED = "geometry_rejected"


@dataclass
class MatchStats:
    matched: int = 0
    heading_rejected: int = 0
    geometry_rejected: int = 0

    @property
    def total(self) -> int:
        return self.matched + self.heading_rejected + self.geometry_rejected

    def record(self, outcome: MatchOutcome) -> None:
        setattr(self, outcome.value, getattr(self, outcome.value) + 1)

    def as_dict(self) -> dict:
        return {
            "matched": self.matched,
            "heading_rejected": self.heading_rejected,
            "geometry_rejected": self.geometry_rejected,
        }


def angular_distance(a: float, b: float) -> float:
    """Distance between two bearings on the circle, in [0, 180]."""
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def _overlap(a: LinkGeometry, b: LinkGeometry) -> bool:
    # shared edges are allowed; a point on the edge is simply ambiguous and gets dropped
    return a.x_min < b.x_max and b.x_min < a.x_max and a.y_min < b.y_max and b.y_min < a.y_max


@dataclass(frozen=True)
class GeometryIndex:
    """Validated link boxes with array views for vectorized containment tests."""

    boxes: Tuple[LinkGeometry, ...]
    link_ids: np.ndarray = field(repr=False)
    bounds: np.ndarray = field(repr=False)
    bearings: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, geometry: Iterable[LinkGeometry]) -> "GeometryIndex":
        boxes = tuple(geometry)
        validate_geometry(boxes)
        return cls(
            boxes=boxes,
            link_ids=np.asarray([g.link_id for g in boxes], dtype=int),
            bounds=np.asarray([[g.x_min, g.x_max, g.y_min, g.y_max] for g in boxes], dtype=float).reshape(-1, 4),
            bearings=np.asarray([g.bearing for g in boxes], dtype=float),
        )

    def containing(self, x: float, y: float) -> np.ndarray:
        b = self.bounds
        inside = (b[:, 0] <= x) & (x <= b[:, 1]) & (b[:, 2] <= y) & (y <= b[:, 3])
        return np.flatnonzero(inside)

    def bearing_of(self, link_id: int) -> Optional[float]:
        hits = np.flatnonzero(self.link_ids == link_id)
        return float(self.bearings[hits[0]]) if hits.size else None


def validate_geometry(geometry: Sequence[LinkGeometry]) -> None:
    """
    Raises:
        GeometryError: a link appears twice or two boxes overlap with positive area
    """
    seen = set()
    for g in geometry:
        if g.link_id in seen:
            raise GeometryError(f"link {g.link_id} has more than one bounding box", link_ids=(g.link_id,))
        seen.add(g.link_id)
    for a, b in combinations(geometry, 2):
        if _overlap(a, b):
            raise GeometryError(f"bounding boxes of links {a.link_id} and {b.link_id} overlap", link_ids=(a.link_id, b.link_id))


def _as_index(geometry: Union[GeometryIndex, Iterable[LinkGeometry]]) -> GeometryIndex:
    return geometry if isinstance(geometry, GeometryIndex) else GeometryIndex.build(geometry)


def classify_probe(
    p: ProbeRecord,
    geometry: Union[GeometryIndex, Iterable[LinkGeometry]],
    heading_tolerance: float = HEADING_TOLERANCE_DEG,
) -> Tuple[MatchOutcome, Optional[int]]:
    index = _as_index(geometry)
    if p.has_position:
        hits = index.containing(p.x, p.y)
        if hits.size != 1:
            return MatchOutcome.GEOMETRY_REJECTED, None
        link_id, bearing = int(index.link_ids[hits[0]]), float(index.bearings[hits[0]])
    else:
        # pre-matched record: keep the link, still apply the heading rule when its bearing is known
        link_id, bearing = p.link_id, index.bearing_of(p.link_id)
        if bearing is None:
            return MatchOutcome.MATCHED, link_id
    if angular_distance(p.heading, bearing) > heading_tolerance:
        return MatchOutcome.HEADING_REJECTED, None
    return MatchOutcome.MATCHED, link_id


def match_probe(
    p: ProbeRecord,
    geometry: Union[GeometryIndex, Iterable[LinkGeometry]],
    heading_tolerance: float = HEADING_TOLERANCE_DEG,
) -> Optional[int]:
    """Link id the probe point is assigned to, or None when it is dropped."""
    return classify_probe(p, geometry, heading_tolerance)[1]


def match_probes(
    records: Iterable[ProbeRecord],
    geometry: Union[GeometryIndex, Iterable[LinkGeometry]],
    heading_tolerance: float = HEADING_TOLERANCE_DEG,
) -> Tuple[List[Tuple[ProbeRecord, int]], MatchStats]:
    """Match every record; returns the matched (record, link id) pairs and the outcome counts."""
    index = _as_index(geometry)
    stats = MatchStats()
    matched: List[Tuple[ProbeRecord, int]] = []
    for p in records:
        outcome, link_id = classify_probe(p, index, heading_tolerance)
        stats.record(outcome)
        if link_id is not None:
            matched.append((p, link_id))
    logger.info(
        f"Probe matching: {stats.matched} matched, {stats.heading_rejected} heading-rejected, "
        f"{stats.geometry_rejected} outside every box (of {stats.total})"
    )
    return matched, stats
