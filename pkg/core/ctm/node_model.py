"""
Junction models of the corridor.

These are the standard closures used with lane-aggregate freeway CTMs: demand-proportional
rationing at onramp merges, and first-in-first-out splitting at offramp diverges with an
offramp that never congests.
"""
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from core.network.network_class import Node, NodeKind


@dataclass(frozen=True)
class NodeFlows:
    """Sending and receiving values seen by one node and the interlink flows it realizes (veh/s)."""

    node_id: int
    sending: Tuple[float, ...]
    receiving: Tuple[float, ...]
    flows: Dict[Tuple[int, int], float]

    def sent(self, link_id: int) -> float:
        """Flow leaving upstream link link_id through this node."""
        return float(sum(q for (up, _), q in self.flows.items() if up == link_id))

    def received(self, link_id: int) -> float:
        """Flow entering downstream link link_id through this node."""
        return float(sum(q for (_, down), q in self.flows.items() if down == link_id))


def _check_beta(beta) -> None:
    beta = np.asarray(beta, dtype=float)
    if np.any(~np.isfinite(beta)) or np.any(beta < 0.0) or np.any(beta > 1.0):
        raise ValueError(f"split ratio beta must lie in [0, 1], got {beta}")


def merge_flows(s_main, s_ramp, r_down):
    """
    Demand-proportional merge.

    Both upstream links send fully when their demands fit in the downstream supply;
    otherwise each sends r_down * S_i / (S_main + S_ramp).
    """
    s_main = np.asarray(s_main, dtype=float)
    s_ramp = np.asarray(s_ramp, dtype=float)
    total = s_main + s_ramp
    safe_total = np.where(total > 0, total, 1.0)
    ratio = np.where(total > r_down, r_down / safe_total, 1.0)
    return s_main * ratio, s_ramp * ratio


def diverge_flows(s_up, r_main, beta):
    """
    FIFO diverge with an unconstrained offramp.

    The upstream link sends q = min(S_up, R_main / (1 - beta)); (1 - beta) * q continues on the
    mainline and beta * q leaves on the offramp. beta = 1 ignores the mainline supply.
    Returns (q_up, q_main, q_offramp).
    """
    _check_beta(beta)
    beta = np.asarray(beta, dtype=float)
    s_up = np.asarray(s_up, dtype=float)
    through = np.where(beta < 1.0, 1.0 - beta, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        limit = np.where(beta < 1.0, np.asarray(r_main, dtype=float) / through, np.inf)
    q_up = np.minimum(s_up, limit)
    return q_up, (1.0 - beta) * q_up, beta * q_up


def resolve_node(
    node: Node,
    sending: Sequence[float],
    receiving: Sequence[float],
    beta: Optional[float] = None,
) -> NodeFlows:
    """
    Resolve the flows through one node.

    Args:
        node: the junction
        sending: S of each link in node.upstream, same order
        receiving: R of each link in node.downstream, same order. Offramp supply is ignored and
            may be omitted at a diverge node.
        beta: realized split ratio, required for diverge nodes (defaults to node.beta)

    Returns:
        NodeFlows keyed by (upstream link, downstream link)
    """
    if node.kind == NodeKind.DIVERGE and len(receiving) == 1:
        receiving = (receiving[0], np.inf)
    if len(sending) != len(node.upstream) or len(receiving) != len(node.downstream):
        raise ValueError(f"node {node.id}: expected {len(node.upstream)} sending and {len(node.downstream)} receiving values")

    up, down = node.main_upstream, node.main_downstream
    if node.kind == NodeKind.SIMPLE:
        q = float(min(sending[0], receiving[0]))
        flows = {(up, down): q}
    elif node.kind == NodeKind.MERGE:
        q_main, q_ramp = merge_flows(sending[0], sending[1], receiving[0])
        flows = {(up, down): float(q_main), (node.upstream[1], down): float(q_ramp)}
    else:
        beta = node.beta if beta is None else beta
        if beta is None:
            raise ValueError(f"diverge node {node.id} needs a split ratio")
        _, q_main, q_off = diverge_flows(sending[0], receiving[0], beta)
        flows = {(up, down): float(q_main), (up, node.downstream[1]): float(q_off)}

    return NodeFlows(
        node_id=node.id,
        sending=tuple(float(s) for s in sending),
        receiving=tuple(float(r) for r in receiving),
        flows=flows,
    )
