from pydantic import BaseModel, ValidationError, Field
from typing import Any, Dict, Literal, Optional
import json
import logging

logger = logging.getLogger(__name__)

RequestType = Literal["simulate", "filter", "evaluate", "validate", "demo"]


class RequestData(BaseModel):
    """
    Envelope shared by the WebSocket, HTTP and CLI surfaces:
    { type: "simulate" | "filter" | "evaluate" | "validate" | "demo", data: {} }
    """
    type: RequestType = Field(..., description="Harness operation to run")
    data: Dict[str, Any] = Field(default_factory=dict, description="Operation arguments")


def validate_request(json_data: str) -> tuple[bool, Optional[RequestData], Optional[str]]:
    """
    Validate a JSON request string.

    Returns:
        tuple: (is_valid, validated_data, error_message)
    """
    try:
        parsed_data = json.loads(json_data)
    except json.JSONDecodeError as e:
        logger.warning(f"JSON decode error: {str(e)}")
        return False, None, f"Invalid JSON format: {str(e)}"
    if not isinstance(parsed_data, dict):
        return False, None, "Request must be a JSON object"
    return validate_request_dict(parsed_data)


def validate_request_dict(data: Dict[str, Any]) -> tuple[bool, Optional[RequestData], Optional[str]]:
    """
    Validate an already-decoded request.

    Returns:
        tuple: (is_valid, validated_data, error_message)
    """
    logger.debug(f"Validating request: {data}")
    try:
        validated_data = RequestData(**data)
        logger.info(f"Request validated - Type: {validated_data.type}")
        return True, validated_data, None
    except ValidationError as e:
        logger.warning(f"Request validation error: {str(e)}")
        return False, None, f"Schema validation error: {str(e)}"
    except Exception as e:
        logger.error(f"Unexpected error during request validation: {str(e)}", exc_info=True)
        return False, None, f"Unexpected error: {str(e)}"
