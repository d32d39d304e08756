from dataclasses import dataclass

import numpy as np

from core.errors import ParameterError


def critical_density(fd: "FundamentalDiagram") -> float:
    """
    Density where the freeflow and congested branches of the triangular diagram meet.

    Solves v_f * rho = w * (rho_j - rho), i.e. rho_c = w * rho_j / (v_f + w).
    """
    return fd.w * fd.rho_j / (fd.v_f + fd.w)


@dataclass(frozen=True)
class FundamentalDiagram:
    """
    Triangular flux function of a link.

    Units are fixed corridor-wide: v_f and w in m/s, rho_j in veh/m, flows in veh/s.
    """

    v_f: float
    w: float
    rho_j: float

    def __post_init__(self):
        for name in ("v_f", "w", "rho_j"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"fundamental diagram parameter {name} must be positive, got {value}")

    @property
    def rho_c(self) -> float:
        return critical_density(self)

    @property
    def q_max(self) -> float:
        return self.v_f * self.rho_c

    def flow(self, rho):
        """Equilibrium flow q(rho) = min(v_f * rho, w * (rho_j - rho))."""
        rho = np.asarray(rho, dtype=float)
        return np.minimum(self.v_f * rho, self.w * (self.rho_j - rho))
