import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.errors import CFLError, ParameterError, TopologyError
from core.network.corridor_spec import CorridorSpec, LinkKind, LinkSpec
from core.network.fundamental_diagram import FundamentalDiagram

logger = logging.getLogger(__name__)

# absolute slack on the CFL comparison so that e.g. 30 m/s * 5 s == 150 m passes
CFL_TOLERANCE = 1e-9


class NodeKind(str, Enum):
    SIMPLE = "simple"
    MERGE = "merge"
    DIVERGE = "diverge"


@dataclass(frozen=True)
class Link:
    id: int
    length: float
    kind: LinkKind
    fd: Optional[FundamentalDiagram] = None

    @property
    def carries_density(self) -> bool:
        return self.kind == LinkKind.MAINLINE

    @property
    def is_entry(self) -> bool:
        """Source and onramp links hold an infinite-storage queue fed by boundary demand."""
        return self.kind in (LinkKind.SOURCE, LinkKind.ONRAMP)


@dataclass(frozen=True)
class Node:
    """
    Junction between two consecutive mainline positions.

    Merge nodes list (mainline, onramp) upstream; diverge nodes list (mainline, offramp) downstream.
    """

    id: int
    upstream: Tuple[int, ...]
    downstream: Tuple[int, ...]
    kind: NodeKind
    beta: Optional[float] = None

    @property
    def main_upstream(self) -> int:
        return self.upstream[0]

    @property
    def main_downstream(self) -> int:
        return self.downstream[0]

    @property
    def ramp(self) -> Optional[int]:
        if self.kind == NodeKind.MERGE:
            return self.upstream[1]
        if self.kind == NodeKind.DIVERGE:
            return self.downstream[1]
        return None


@dataclass(frozen=True)
class Network:
    """
    Freeway corridor: one mainline chain with attached ramps, immutable after construction.

    Link ids are contiguous 0..n-1 so that per-link vectors are indexed directly by id.
    """

    links: Tuple[Link, ...]
    nodes: Tuple[Node, ...]
    dt: float

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def link(self, link_id: int) -> Link:
        return self.links[link_id]

    def internal_nodes(self) -> List[Node]:
        """Nodes whose main upstream and downstream links are both mainline links."""
        return [
            node for node in self.nodes
            if self.links[node.main_upstream].kind == LinkKind.MAINLINE
            and self.links[node.main_downstream].kind == LinkKind.MAINLINE
        ]

    def nodes_of_kind(self, kind: NodeKind) -> List[Node]:
        return [node for node in self.nodes if node.kind == kind]

    @cached_property
    def mainline_ids(self) -> np.ndarray:
        """Mainline link ids in upstream to downstream order."""
        order = [node.main_downstream for node in self.nodes if self.links[node.main_downstream].kind == LinkKind.MAINLINE]
        return np.asarray(order, dtype=int)

    @cached_property
    def entry_ids(self) -> np.ndarray:
        return np.asarray([link.id for link in self.links if link.is_entry], dtype=int)

    @cached_property
    def source_id(self) -> int:
        return self.nodes[0].main_upstream

    @cached_property
    def sink_id(self) -> int:
        return self.nodes[-1].main_downstream

    @cached_property
    def offramp_ids(self) -> np.ndarray:
        return np.asarray([link.id for link in self.links if link.kind == LinkKind.OFFRAMP], dtype=int)

    def _fd_array(self, attr: str) -> np.ndarray:
        return np.asarray(
            [getattr(link.fd, attr) if link.fd is not None else np.nan for link in self.links],
            dtype=float,
        )

    @cached_property
    def v_f(self) -> np.ndarray:
        return self._fd_array("v_f")

    @cached_property
    def w(self) -> np.ndarray:
        return self._fd_array("w")

    @cached_property
    def rho_j(self) -> np.ndarray:
        return self._fd_array("rho_j")

    @cached_property
    def rho_c(self) -> np.ndarray:
        return self._fd_array("rho_c")

    @cached_property
    def q_max(self) -> np.ndarray:
        return self._fd_array("q_max")

    @cached_property
    def length(self) -> np.ndarray:
        return np.asarray([link.length for link in self.links], dtype=float)

    @cached_property
    def density_mask(self) -> np.ndarray:
        return np.asarray([link.carries_density for link in self.links], dtype=bool)

    @cached_property
    def entry_mask(self) -> np.ndarray:
        return np.asarray([link.is_entry for link in self.links], dtype=bool)

    @cached_property
    def node_up(self) -> np.ndarray:
        return np.asarray([node.main_upstream for node in self.nodes], dtype=int)

    @cached_property
    def node_down(self) -> np.ndarray:
        return np.asarray([node.main_downstream for node in self.nodes], dtype=int)

    @cached_property
    def node_ramp(self) -> np.ndarray:
        return np.asarray([node.ramp if node.ramp is not None else -1 for node in self.nodes], dtype=int)

    @cached_property
    def merge_mask(self) -> np.ndarray:
        return np.asarray([node.kind == NodeKind.MERGE for node in self.nodes], dtype=bool)

    @cached_property
    def diverge_mask(self) -> np.ndarray:
        return np.asarray([node.kind == NodeKind.DIVERGE for node in self.nodes], dtype=bool)

    @cached_property
    def nominal_betas(self) -> np.ndarray:
        """Split ratio per node (0 for non-diverge nodes)."""
        return np.asarray([node.beta if node.beta is not None else 0.0 for node in self.nodes], dtype=float)


def _resolve_fd(row: LinkSpec, spec: CorridorSpec, required: bool) -> Optional[FundamentalDiagram]:
    if row.has_fd():
        return FundamentalDiagram(v_f=row.v_f, w=row.w, rho_j=row.rho_j)
    if any(value is not None for value in (row.v_f, row.w, row.rho_j)):
        raise ParameterError("fundamental diagram needs all of v_f, w, rho_j or none of them", link_id=row.id)
    if spec.default_fd is not None and required:
        return FundamentalDiagram(v_f=spec.default_fd.v_f, w=spec.default_fd.w, rho_j=spec.default_fd.rho_j)
    if required:
        raise ParameterError(f"{row.kind.value} link needs a fundamental diagram and no default_fd was given", link_id=row.id)
    return None


def _check_cfl(link: Link, dt: float) -> None:
    if link.fd is None:
        return
    if link.fd.v_f * dt > link.length + CFL_TOLERANCE:
        raise CFLError(
            f"CFL violation: v_f*dt = {link.fd.v_f * dt:g} m exceeds length {link.length:g} m",
            link_id=link.id,
        )
    if link.fd.w * dt > link.length + CFL_TOLERANCE:
        raise CFLError(
            f"CFL violation: w*dt = {link.fd.w * dt:g} m exceeds length {link.length:g} m",
            link_id=link.id,
        )


def build_network(spec: CorridorSpec) -> Network:
    """
    Validate a corridor description and assemble the immutable Network.

    Node kinds are inferred from ramp attachments: an onramp merges at the upstream node of
    the mainline link it attaches to, an offramp diverges at the downstream node of its
    mainline link. Source and sink links are added at the corridor ends when the
    description omits them.

    Raises:
        TopologyError: duplicate or non-contiguous ids, dangling ramps, two ramps on one node
        ParameterError: non-positive lengths or FD parameters, split ratio outside [0, 1]
        CFLError: v_f*dt or w*dt longer than the link
    """
    rows = list(spec.links)
    seen: Dict[int, LinkSpec] = {}
    for row in rows:
        if row.id in seen:
            raise TopologyError("duplicate link id (a mainline cannot revisit a link)", link_id=row.id)
        if row.id < 0:
            raise TopologyError("link ids must be non-negative", link_id=row.id)
        seen[row.id] = row

    mainline = [row for row in rows if row.kind == LinkKind.MAINLINE]
    if not mainline:
        raise TopologyError("corridor has no mainline links")
    sources = [row for row in rows if row.kind == LinkKind.SOURCE]
    sinks = [row for row in rows if row.kind == LinkKind.SINK]
    if len(sources) > 1:
        raise TopologyError("a corridor has at most one source link", link_id=sources[1].id)
    if len(sinks) > 1:
        raise TopologyError("a corridor has at most one sink link", link_id=sinks[1].id)

    next_id = max(seen) + 1
    if not sources:
        sources = [LinkSpec(id=next_id, kind=LinkKind.SOURCE)]
        next_id += 1
    if not sinks:
        sinks = [LinkSpec(id=next_id, kind=LinkKind.SINK)]
        next_id += 1
    all_rows = rows + [r for r in sources + sinks if r.id not in seen]

    ids = sorted(row.id for row in all_rows)
    if ids != list(range(len(ids))):
        missing = sorted(set(range(max(ids) + 1)) - set(ids))
        raise TopologyError(f"link ids must be contiguous from 0, missing {missing[:5]}", link_id=missing[0] if missing else None)

    main_pos = {row.id: pos for pos, row in enumerate(mainline)}
    first_main, last_main = mainline[0], mainline[-1]

    links: Dict[int, Link] = {}
    for row in all_rows:
        if row.kind == LinkKind.MAINLINE:
            fd = _resolve_fd(row, spec, required=True)
            length = row.length_m
        elif row.kind == LinkKind.SOURCE:
            # without its own FD the source caps its release at the first mainline link's capacity
            fd = _resolve_fd(row, spec, required=False) or _resolve_fd(first_main, spec, required=True)
            length = row.length_m if row.length_m is not None else first_main.length_m
        elif row.kind == LinkKind.ONRAMP:
            fd = _resolve_fd(row, spec, required=True)
            attached = seen.get(row.attach_to)
            length = row.length_m if row.length_m is not None else (attached.length_m if attached else None)
        elif row.kind == LinkKind.OFFRAMP:
            fd = _resolve_fd(row, spec, required=False)
            attached = seen.get(row.attach_to)
            length = row.length_m if row.length_m is not None else (attached.length_m if attached else None)
        else:
            fd = None
            length = row.length_m if row.length_m is not None else last_main.length_m
        if length is None or not np.isfinite(length) or length <= 0:
            raise ParameterError(f"length must be positive, got {length}", link_id=row.id)
        links[row.id] = Link(id=row.id, length=float(length), kind=row.kind, fd=fd)

    source_id, sink_id = sources[0].id, sinks[0].id
    n_main = len(mainline)
    node_ramps: Dict[int, LinkSpec] = {}
    for row in rows:
        if row.kind not in (LinkKind.ONRAMP, LinkKind.OFFRAMP):
            continue
        if row.attach_to is None or row.attach_to not in main_pos:
            raise TopologyError(f"dangling {row.kind.value}: attach_to={row.attach_to} is not a mainline link", link_id=row.id)
        node_index = main_pos[row.attach_to] + (1 if row.kind == LinkKind.OFFRAMP else 0)
        if node_index in node_ramps:
            raise TopologyError(
                f"node already carries ramp {node_ramps[node_index].id}; one ramp per node is supported",
                link_id=row.id,
            )
        if row.kind == LinkKind.OFFRAMP:
            if row.beta is None or not (0.0 <= row.beta <= 1.0):
                raise ParameterError(f"offramp split ratio beta must be in [0, 1], got {row.beta}", link_id=row.id)
        elif row.beta is not None:
            raise ParameterError("only offramps carry a split ratio", link_id=row.id)
        node_ramps[node_index] = row

    nodes: List[Node] = []
    for k in range(n_main + 1):
        up = source_id if k == 0 else mainline[k - 1].id
        down = sink_id if k == n_main else mainline[k].id
        ramp = node_ramps.get(k)
        if ramp is None:
            nodes.append(Node(id=k, upstream=(up,), downstream=(down,), kind=NodeKind.SIMPLE))
        elif ramp.kind == LinkKind.ONRAMP:
            nodes.append(Node(id=k, upstream=(up, ramp.id), downstream=(down,), kind=NodeKind.MERGE))
        else:
            nodes.append(Node(id=k, upstream=(up,), downstream=(down, ramp.id), kind=NodeKind.DIVERGE, beta=float(ramp.beta)))

    for link in links.values():
        _check_cfl(link, spec.dt)

    network = Network(links=tuple(links[i] for i in range(len(links))), nodes=tuple(nodes), dt=float(spec.dt))
    logger.info(
        f"Network built: {n_main} mainline links, {len(network.nodes_of_kind(NodeKind.MERGE))} merge and "
        f"{len(network.nodes_of_kind(NodeKind.DIVERGE))} diverge nodes, dt={spec.dt:g}s"
    )
    return network
