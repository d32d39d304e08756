import os
from pathlib import Path
from typing import Optional, Sequence, Tuple

# keep test runs from writing a log file into the working directory
os.environ.setdefault("TRAFFIC_LOG_FILE", "")

import numpy as np
import pytest

from core.ctm.density_state import DensityState
from core.experiment.scenario_config import load_scenario
from core.network.corridor_spec import CorridorSpec, LinkKind, LinkSpec
from core.network.network_class import Network, build_network
from tools.ingest.parse_corridor import load_network

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = REPO_ROOT / "scenarios"


def chain_spec(
    n_main: int = 3,
    length: float = 200.0,
    v_f: float = 30.0,
    w: float = 6.0,
    rho_j: float = 0.12,
    dt: float = 5.0,
    onramps: Sequence[int] = (),
    offramps: Sequence[Tuple[int, float]] = (),
) -> CorridorSpec:
    """Mainline links 0..n_main-1 with one shared FD, then onramps and offramps (attach_to, beta)."""
    rows = [
        LinkSpec(id=i, kind=LinkKind.MAINLINE, length_m=length, v_f=v_f, w=w, rho_j=rho_j)
        for i in range(n_main)
    ]
    next_id = n_main
    for attach in onramps:
        rows.append(LinkSpec(id=next_id, kind=LinkKind.ONRAMP, length_m=length, v_f=v_f, w=w, rho_j=rho_j, attach_to=attach))
        next_id += 1
    for attach, beta in offramps:
        rows.append(LinkSpec(id=next_id, kind=LinkKind.OFFRAMP, length_m=length, attach_to=attach, beta=beta))
        next_id += 1
    return CorridorSpec(links=rows, dt=dt)


def chain_network(**kwargs) -> Network:
    return build_network(chain_spec(**kwargs))


def write_csv(path: Path, header: str, rows: Sequence[str] = ()) -> str:
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def chain3() -> Network:
    """Three 200 m links, v_f=30, w=6, rho_j=0.12, dt=5 (rho_c=0.02, q_max=0.6)."""
    return chain_network()


@pytest.fixture
def ramp_corridor() -> Network:
    """Six mainline links with an onramp merging into link 2 and an offramp leaving link 4."""
    return chain_network(n_main=6, onramps=(2,), offramps=((4, 0.1),))


@pytest.fixture
def toy_config():
    return load_scenario(SCENARIOS / "toy" / "scenario.json")


@pytest.fixture
def toy_network(toy_config) -> Network:
    return load_network(toy_config.corridor, toy_config.dt, toy_config.default_fd)


@pytest.fixture
def reference_config():
    return load_scenario(SCENARIOS / "reference" / "scenario.json")


@pytest.fixture
def reference_network(reference_config) -> Network:
    return load_network(reference_config.corridor, reference_config.dt, reference_config.default_fd)


def mainline_state(net: Network, values, queues: Optional[np.ndarray] = None) -> DensityState:
    return DensityState.from_mainline(net, values, queues)
