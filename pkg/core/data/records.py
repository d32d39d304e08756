from typing import Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class LoopRecord(BaseModel):
    """
    One loop-detector report. Mainline rows carry density, or flow and speed from which density
    is derived; entry-link rows (source, onramps) carry flow for the boundary demand.
    """

    timestamp: float = Field(..., ge=0, description="Seconds since run start")
    detector_id: str = Field(..., min_length=1)
    link_id: int = Field(..., ge=0)
    density: Optional[float] = Field(default=None, ge=0, description="veh/m")
    flow: Optional[float] = Field(default=None, ge=0, description="veh/s")
    speed: Optional[float] = Field(default=None, ge=0, description="m/s")
    healthy: bool = True
    line: Optional[int] = None

    @model_validator(mode="after")
    def _has_reading(self):
        if self.density is None and self.flow is None:
            raise ValueError("a loop record needs density or flow")
        return self

    def density_value(self) -> Optional[float]:
        if self.density is not None:
            return self.density
        if self.flow is not None and self.speed:
            return self.flow / self.speed
        return None


class ProbeRecord(BaseModel):
    """A GPS probe report located either by corridor-local x/y or by a pre-matched link id."""

    timestamp: float = Field(..., ge=0)
    device_id: str = Field(..., min_length=1, description="Hashed device identifier")
    x: Optional[float] = None
    y: Optional[float] = None
    link_id: Optional[int] = Field(default=None, ge=0)
    speed: float = Field(..., ge=0, description="m/s")
    heading: float = Field(..., ge=0, lt=360, description="Degrees clockwise from north")
    line: Optional[int] = None

    @model_validator(mode="after")
    def _has_location(self):
        has_xy = self.x is not None and self.y is not None
        if not has_xy and self.link_id is None:
            raise ValueError("a probe record needs both x and y, or a link_id")
        if (self.x is None) != (self.y is None):
            raise ValueError("x and y must be given together")
        return self

    @property
    def has_position(self) -> bool:
        return self.x is not None and self.y is not None


class LinkGeometry(BaseModel):
    """Axis-aligned bounding box of a link in corridor-local meters and its end-to-end bearing."""

    link_id: int = Field(..., ge=0)
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    bearing: float = Field(..., ge=0, lt=360)
    line: Optional[int] = None

    @field_validator("x_max")
    @classmethod
    def _x_order(cls, value, info):
        if "x_min" in info.data and value <= info.data["x_min"]:
            raise ValueError("x_max must exceed x_min")
        return value

    @field_validator("y_max")
    @classmethod
    def _y_order(cls, value, info):
        if "y_min" in info.data and value <= info.data["y_min"]:
            raise ValueError("y_max must exceed y_min")
        return value

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max
