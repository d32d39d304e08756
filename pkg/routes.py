from controller.demo_controller import demo_controller
from controller.evaluate_controller import evaluate_controller
from controller.filter_controller import filter_controller
from controller.simulate_controller import simulate_controller
from controller.validate_controller import validate_controller
from utils.request_validator import RequestData
from typing import Dict, Any
import logging

logger = logging.getLogger(__name__)

CONTROLLERS = {
    "simulate": simulate_controller,
    "filter": filter_controller,
    "evaluate": evaluate_controller,
    "validate": validate_controller,
    "demo": demo_controller,
}


def exit_code(envelope: Dict[str, Any]) -> int:
    """0 success, 1 invalid input, 2 runtime failure."""
    if envelope.get("success"):
        return 0
    return 2 if envelope.get("server_error", True) else 1


async def handle_request(requestData: RequestData) -> Dict[str, Any]:
    type = requestData.type
    data = requestData.data

    logger.info(f"Handling request: {type} with data: {data}")

    controller = CONTROLLERS.get(type)
    if controller is None:
        return {"success": False, "server_error": False, "error": f"Invalid type: {type}"}
    return await controller(data)
