from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator, Optional, Tuple

import numpy as np

from core.network.network_class import Network


class MeasurementKind(str, Enum):
    DENSITY = "density"
    VELOCITY = "velocity"


@dataclass(frozen=True)
class Measurement:
    """A density (veh/m) or velocity (m/s) observation of one link, assimilated with bin t_bin."""

    kind: MeasurementKind
    value: float
    link: int
    t_bin: int
    device: Optional[str] = None

    def __post_init__(self):
        if not np.isfinite(self.value) or self.value < 0:
            raise ValueError(f"measurement value must be non-negative, got {self.value} on link {self.link}")


@dataclass(frozen=True)
class MeasurementBatch:
    """Measurements assimilated together at one filter timestep."""

    measurements: Tuple[Measurement, ...] = ()

    @classmethod
    def of(cls, measurements: Iterable[Measurement]) -> "MeasurementBatch":
        return cls(tuple(measurements))

    def __len__(self) -> int:
        return len(self.measurements)

    def __iter__(self) -> Iterator[Measurement]:
        return iter(self.measurements)

    def of_kind(self, kind: MeasurementKind) -> "MeasurementBatch":
        return MeasurementBatch(tuple(m for m in self.measurements if m.kind == kind))

    def without_kind(self, kind: MeasurementKind) -> "MeasurementBatch":
        return MeasurementBatch(tuple(m for m in self.measurements if m.kind != kind))

    @cached_property
    def links(self) -> np.ndarray:
        return np.asarray([m.link for m in self.measurements], dtype=int)

    @cached_property
    def values(self) -> np.ndarray:
        return np.asarray([m.value for m in self.measurements], dtype=float)

    def validate(self, net: Network) -> None:
        for m in self.measurements:
            if not (0 <= m.link < net.n_links) or not net.density_mask[m.link]:
                raise ValueError(f"{m.kind.value} measurement bound to link {m.link}, which is not a mainline link")
