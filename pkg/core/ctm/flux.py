"""
Sending, receiving and velocity functions of the triangular fundamental diagram.

Every function accepts either a single FundamentalDiagram with scalar densities or a
Network with per-link density vectors: both expose v_f, w, rho_j and q_max.
"""
import numpy as np


def _out(value):
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


def sending(fd, rho):
    """Demand: the largest flow a link can send downstream, min(v_f * rho, q_max)."""
    rho = np.asarray(rho, dtype=float)
    return _out(np.minimum(fd.v_f * rho, fd.q_max))


def receiving(fd, rho):
    """Supply: the largest flow a link can accept from upstream, min(q_max, w * (rho_j - rho))."""
    rho = np.asarray(rho, dtype=float)
    return _out(np.minimum(fd.q_max, fd.w * (fd.rho_j - rho)))


def link_velocity(fd, rho):
    """
    Average link velocity q(rho) / rho.

    Constant at v_f below the critical density, so velocity pins density down only in the
    congested branch. At rho = 0 the ratio is undefined and the freeflow limit v_f is returned.
    """
    rho = np.asarray(rho, dtype=float)
    flow = np.minimum(fd.v_f * rho, fd.w * (fd.rho_j - rho))
    with np.errstate(divide="ignore", invalid="ignore"):
        velocity = np.where(rho > 0, flow / np.where(rho > 0, rho, 1.0), fd.v_f)
    return _out(np.clip(velocity, 0.0, fd.v_f))


def inverse_congested_velocity(fd, velocity):
    """Density on the congested branch that moves at the given speed: rho = w * rho_j / (v + w)."""
    velocity = np.asarray(velocity, dtype=float)
    return _out(fd.w * fd.rho_j / (velocity + fd.w))
