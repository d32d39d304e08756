import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from core.ctm.noise import NoiseConfig
from core.fusion.likelihood import LikelihoodConfig
from core.network.corridor_spec import FundamentalDiagramSpec

logger = logging.getLogger(__name__)

PATH_FIELDS = ("corridor", "loops_file", "probes_file", "geometry_file")


class Mode(str, Enum):
    OPEN_LOOP = "open_loop"
    LOOPS_ONLY = "loops_only"
    PROBES_ONLY = "probes_only"
    FUSED = "fused"


class BoundaryMode(str, Enum):
    NOMINAL = "nominal"
    MEASURED_HOLD = "measured_hold"


class ScenarioConfig(BaseModel):
    """
    Everything that determines a run. Identical configs (seeds included) give identical outputs.

    Detectors are identified by the mainline link id they sit on.
    """

    name: str = "scenario"
    corridor: str = Field(..., description="Path to the corridor CSV")
    dt: float = Field(default=5.0, gt=0, description="Timestep (s)")
    horizon: float = Field(default=7200.0, gt=0, description="Simulated duration (s)")
    particles: int = Field(default=1000, ge=1, description="Particle count P")
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    likelihood: LikelihoodConfig = Field(default_factory=LikelihoodConfig)
    mode: Mode = Mode.FUSED
    penetration_rate: float = Field(default=0.0, ge=0.0, le=1.0)
    measurement_noise_frac: float = Field(default=0.10, ge=0.0)
    detectors: List[int] = Field(default_factory=list)
    held_out: List[int] = Field(default_factory=list)
    truth_seed: int = 0
    filter_seed: int = 1
    measurement_seed: int = 2
    bin_width: float = Field(default=300.0, gt=0, description="Measurement bin width (s)")
    initial_density: Union[float, List[float]] = 0.02
    ic_noise_frac: float = Field(default=0.10, ge=0.0)
    demands: Dict[int, List[Tuple[float, float]]] = Field(default_factory=dict)
    truth_demand_scale: float = Field(default=1.0, gt=0.0)
    boundary: BoundaryMode = BoundaryMode.NOMINAL
    resample_ess_threshold: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    default_fd: Optional[FundamentalDiagramSpec] = None
    mape_floor: float = Field(default=1e-4, gt=0.0)
    loops_file: Optional[str] = None
    probes_file: Optional[str] = None
    geometry_file: Optional[str] = None

    @field_validator("initial_density")
    @classmethod
    def _non_negative_density(cls, value):
        values = value if isinstance(value, list) else [value]
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise ValueError("initial_density must be non-negative")
        return value

    @model_validator(mode="after")
    def _consistent(self):
        ratio = self.bin_width / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(f"dt={self.dt:g} must divide the bin width {self.bin_width:g}")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(f"dt={self.dt:g} must divide the horizon {self.horizon:g}")
        missing = sorted(set(self.held_out) - set(self.detectors))
        if missing:
            raise ValueError(f"held-out detectors {missing} are not among the placed detectors")
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def assimilated_detectors(self) -> List[int]:
        held = set(self.held_out)
        return [d for d in self.detectors if d not in held]

    @property
    def is_file_based(self) -> bool:
        return self.loops_file is not None or self.probes_file is not None

    def seeds(self) -> Dict[str, int]:
        return {"truth": self.truth_seed, "filter": self.filter_seed, "measurement": self.measurement_seed}


def probe_count(penetration_rate: float) -> int:
    """floor(PR * 100), tolerant of the binary representation of rates like 0.03."""
    return int(math.floor(penetration_rate * 100 + 1e-9))


def _resolve(path: Optional[str], base: Path) -> Optional[str]:
    if path is None:
        return None
    p = Path(path)
    return str(p if p.is_absolute() else (base / p))


def load_scenario(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> ScenarioConfig:
    """
    Read a JSON scenario file; overrides (e.g. CLI flags) win over file values, None means unset.

    Relative paths in the file resolve against the file's directory; override paths are taken as given.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    for key in PATH_FIELDS:
        if raw.get(key) is not None:
            raw[key] = _resolve(raw[key], path.parent)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            raw[key] = {**raw[key], **value}
        else:
            raw[key] = value
    config = ScenarioConfig.model_validate(raw)
    logger.info(f"Loaded scenario {config.name} from {path} (mode={config.mode.value}, P={config.particles})")
    return config
