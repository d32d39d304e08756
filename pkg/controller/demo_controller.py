from typing import Any, Dict
import logging

from controller.common import failure, load_config, success
from workflows.demo_sweep import demo

logger = logging.getLogger(__name__)


async def demo_controller(data: Dict[str, Any]) -> Dict[str, Any]:
    """Table-style sweep: every demo mode and penetration rate over `seeds` seed triples."""
    try:
        cfg = load_config(data)
        seeds = int(data.get("seeds", 10))
        workers = int(data.get("workers", 1))
        if seeds < 1 or workers < 1:
            raise ValueError("seeds and workers must be at least 1")
    except Exception as e:
        return failure(e)
    logger.info(f"Demo sweep of {cfg.name}: {seeds} seeds on {workers} worker(s)")
    try:
        return success(await demo(cfg, seeds, out_dir=data.get("out_dir"), workers=workers))
    except Exception as e:
        return failure(e)
