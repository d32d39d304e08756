from typing import Any, Dict, List
import logging

from controller.common import failure, success
from core.data.probe_matching import validate_geometry
from core.errors import GeometryError, NetworkValidationError
from core.network.network_class import build_network
from tools.ingest.parse_corridor import ParseCorridorTool, parse_corridor
from tools.ingest.parse_geometry import ParseGeometryTool
from tools.ingest.parse_loops import ParseLoopsTool
from tools.ingest.parse_probes import ParseProbesTool

logger = logging.getLogger(__name__)

TOOLS = {
    "corridor": ParseCorridorTool,
    "loops": ParseLoopsTool,
    "probes": ParseProbesTool,
    "geometry": ParseGeometryTool,
}


def describe_schemas() -> Dict[str, str]:
    return {kind: tool().get_input_schema_prompt() for kind, tool in TOOLS.items()}


def check_file(kind: str, path: str, dt: float = None) -> List[str]:
    """Every violation in one file; corridors are also checked for topology and CFL when dt is given."""
    tool = TOOLS[kind]()
    violations = [str(v) for v in tool.check(path)]
    if violations:
        return violations
    try:
        if kind == "geometry":
            validate_geometry(tool.load(path))
        elif kind == "corridor" and dt is not None:
            build_network(parse_corridor(path, dt))
    except (GeometryError, NetworkValidationError) as e:
        violations.append(f"{path}: {e}")
    return violations


async def validate_controller(data: Dict[str, Any]) -> Dict[str, Any]:
    """
    Check record files against their schemas.

    data maps file kinds (corridor, loops, probes, geometry) to paths; "describe" returns the
    documented schemas instead. A file with violations makes the request fail with all of them listed.
    """
    if data.get("describe"):
        return success({"schemas": describe_schemas()})
    files = {kind: data[kind] for kind in TOOLS if data.get(kind)}
    if not files:
        return failure(ValueError(f"nothing to validate: give one of {sorted(TOOLS)}"))
    try:
        report = {kind: check_file(kind, path, data.get("dt")) for kind, path in files.items()}
    except Exception as e:
        return failure(e)
    total = sum(len(v) for v in report.values())
    logger.info(f"Validated {len(files)} file(s): {total} violation(s)")
    if total:
        return {"success": False, "server_error": False, "error": f"{total} schema violation(s)", "violations": report}
    return success({"violations": report})
