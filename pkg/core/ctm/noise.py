from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from core.network.network_class import Network


class NoiseConfig(BaseModel):
    """
    Process-noise portion of the model parameters.

    Entry demands (onramps and the upstream source) get additive Gaussian noise with standard
    deviation onramp_flow_sigma_frac * nominal, clamped at zero. Each diverge draws its split
    ratio per timestep from a beta distribution whose mean is the corridor's nominal beta and
    whose concentration (alpha + beta shape) is split_concentration, unless split_beta_params
    pins explicit shapes for that offramp. split_concentration=None keeps split ratios fixed.
    """

    onramp_flow_sigma_frac: float = Field(default=0.15, ge=0.0)
    split_concentration: Optional[float] = Field(default=50.0, gt=0.0)
    split_beta_params: Dict[int, Tuple[float, float]] = Field(default_factory=dict)
    seed: int = 0

    @field_validator("split_beta_params")
    @classmethod
    def _positive_shapes(cls, value):
        for offramp, (a, b) in value.items():
            if a <= 0 or b <= 0:
                raise ValueError(f"beta shapes for offramp {offramp} must be positive, got ({a}, {b})")
        return value


def perturb_demands(nominal, sigma_frac: float, rng: np.random.Generator, batch: Optional[int] = None) -> np.ndarray:
    """
    Draw noisy demands nominal + N(0, (sigma_frac * nominal)^2), clamped at zero.

    The draw always consumes one standard normal per value so the stream position does not
    depend on sigma_frac.
    """
    nominal = np.asarray(nominal, dtype=float)
    shape = nominal.shape if batch is None else (batch,) + nominal.shape
    z = rng.standard_normal(shape)
    return np.maximum(nominal + sigma_frac * nominal * z, 0.0)


def split_beta_shapes(net: Network, noise: NoiseConfig) -> Dict[int, Optional[Tuple[float, float]]]:
    """Beta shapes per diverge node id; None marks a fixed (point-mass) split ratio."""
    shapes: Dict[int, Optional[Tuple[float, float]]] = {}
    for node in net.nodes:
        if node.ramp is None or not net.diverge_mask[node.id]:
            continue
        explicit = noise.split_beta_params.get(node.ramp)
        if explicit is not None:
            shapes[node.id] = tuple(explicit)
        elif noise.split_concentration is None or node.beta in (0.0, 1.0):
            shapes[node.id] = None
        else:
            shapes[node.id] = (node.beta * noise.split_concentration, (1.0 - node.beta) * noise.split_concentration)
    return shapes


def draw_split_ratios(net: Network, noise: NoiseConfig, rng: np.random.Generator, batch: Optional[int] = None) -> np.ndarray:
    """Split ratio per node, shape (batch, n_nodes) or (n_nodes,); non-diverge nodes get 0."""
    shape = (net.n_nodes,) if batch is None else (batch, net.n_nodes)
    betas = np.broadcast_to(net.nominal_betas, shape).copy()
    for node_id, shapes in split_beta_shapes(net, noise).items():
        if shapes is None:
            continue
        size = None if batch is None else batch
        betas[..., node_id] = rng.beta(shapes[0], shapes[1], size=size)
    return betas
