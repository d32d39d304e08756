import logging
import math
from typing import Any, Dict

import numpy as np
from pydantic import ValidationError

from core.experiment.scenario_config import ScenarioConfig, load_scenario
from workflows.experiment_nodes import VALIDATION_ERRORS

logger = logging.getLogger(__name__)


def load_config(data: Dict[str, Any]) -> ScenarioConfig:
    """
    Scenario from a request: data["config"] is a path to a JSON scenario file or an inline
    scenario dictionary; data["overrides"] wins over either.
    """
    source = data.get("config")
    overrides = {k: v for k, v in (data.get("overrides") or {}).items() if v is not None}
    if isinstance(source, dict):
        return ScenarioConfig.model_validate({**source, **overrides})
    if not source:
        raise ValueError("request needs a 'config' scenario path or object")
    return load_scenario(source, overrides)


def plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars and arrays become Python values, NaN becomes None."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def failure(e: Exception) -> Dict[str, Any]:
    """Envelope for an exception: validation problems are client errors, anything else is a server error."""
    if isinstance(e, (ValidationError, FileNotFoundError) + VALIDATION_ERRORS):
        logger.warning(f"Request rejected: {e}")
        return {"success": False, "server_error": False, "error": str(e)}
    logger.error(f"Request failed: {e}", exc_info=True)
    return {"success": False, "server_error": True, "error": str(e)}


def success(response: Any) -> Dict[str, Any]:
    return {"success": True, "server_error": False, "response": plain(response)}
