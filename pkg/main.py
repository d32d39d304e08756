from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.encoders import jsonable_encoder
import uvicorn
import logging
from typing import Any, Dict
from utils.logging_config import configure_logging
from utils.request_validator import RequestData, validate_request_dict
from utils.settings import get_settings
from routes import exit_code, handle_request

configure_logging()

logger = logging.getLogger(__name__)

app = FastAPI(title="freeway-rbpf")

HTTP_STATUS = {0: 200, 1: 422, 2: 500}


async def respond(type: str, data: Dict[str, Any]) -> JSONResponse:
    response = await handle_request(RequestData(type=type, data=data))
    return JSONResponse(status_code=HTTP_STATUS[exit_code(response)], content=jsonable_encoder(response))


@app.post("/simulate")
async def simulate(data: dict):
    return await respond("simulate", data)


@app.post("/filter")
async def run_filter(data: dict):
    return await respond("filter", data)


@app.post("/evaluate")
async def evaluate(data: dict):
    return await respond("evaluate", data)


@app.post("/validate")
async def validate(data: dict):
    return await respond("validate", data)


@app.post("/demo")
async def demo(data: dict):
    return await respond("demo", data)


@app.websocket("/ws")
async def websocket_endpoint(websocket: WebSocket):
    await websocket.accept()
    logger.info("WebSocket connection established")

    try:
        while True:
            data = await websocket.receive_json()
            logger.debug(f"Received WebSocket message: {data}")

            is_valid, validated_data, error = validate_request_dict(data) if isinstance(data, dict) else (False, None, "Request must be a JSON object")

            if is_valid:
                response = await handle_request(validated_data)
                await websocket.send_json({
                    "status": "success" if response.get("success") else "error",
                    "message": jsonable_encoder(response)
                })
            else:
                logger.warning(f"Invalid message received: {error}")
                await websocket.send_json({
                    "status": "error",
                    "message": "Invalid message format",
                    "error": error
                })

    except WebSocketDisconnect:
        logger.info("WebSocket disconnected")
    except Exception as e:
        logger.error(f"WebSocket error: {e}", exc_info=True)
        try:
            await websocket.send_json({
                "status": "error",
                "message": "Internal server error",
                "error": str(e)
            })
        except Exception:
            logger.error("Failed to send error response to WebSocket")


if __name__ == "__main__":
    uvicorn.run(app, host="0.0.0.0", port=get_settings().port)
