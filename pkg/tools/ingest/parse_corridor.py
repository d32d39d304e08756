from typing import List, Optional

from core.errors import SchemaError
from core.network.corridor_spec import CorridorSpec, FundamentalDiagramSpec, LinkSpec
from core.network.network_class import Network, build_network
from tools.ingest.csv_record_tool import CsvRecordTool


class ParseCorridorTool(CsvRecordTool):
    record_model = LinkSpec
    sort_by_timestamp = False

    def __init__(self):
        input_schema = {
            "id": {"type": "integer", "required": True, "description": "Link id, contiguous from 0", "example": 0},
            "kind": {"type": "string", "required": True, "description": "mainline | onramp | offramp | source | sink", "example": "mainline"},
            "length_m": {"type": "number", "required": False, "description": "Link length in m (required for mainline)", "example": 200.0},
            "v_f": {"type": "number", "required": False, "description": "Freeflow speed in m/s", "example": 30.0},
            "w": {"type": "number", "required": False, "description": "Congestion wave speed in m/s", "example": 6.0},
            "rho_j": {"type": "number", "required": False, "description": "Jam density in veh/m", "example": 0.36},
            "attach_to": {"type": "integer", "required": False, "description": "Mainline link a ramp attaches to", "example": ""},
            "beta": {"type": "number", "required": False, "description": "Offramp split ratio in [0, 1]", "example": ""},
        }
        super().__init__(name="corridor", description="Corridor links in mainline order", input_schema=input_schema)


def parse_corridor(path: str, dt: float, default_fd: Optional[FundamentalDiagramSpec] = None) -> CorridorSpec:
    rows: List[LinkSpec] = ParseCorridorTool().load(path)
    if not rows:
        raise SchemaError("corridor file has no links", path=path)
    return CorridorSpec(links=rows, dt=dt, default_fd=default_fd)


def load_network(path: str, dt: float, default_fd: Optional[FundamentalDiagramSpec] = None) -> Network:
    """Parse and validate a corridor file into a Network."""
    return build_network(parse_corridor(path, dt, default_fd))
