from typing import Any, Dict
import logging

import pandas as pd

from controller.common import failure, load_config, success
from core.errors import EvaluationError
from core.experiment.evaluation import compute_mape
from tools.ingest.parse_corridor import load_network

logger = logging.getLogger(__name__)


def read_grid(path: str) -> pd.DataFrame:
    """Grid CSV as exported: link_id column, then one column per timestep."""
    frame = pd.read_csv(path)
    if "link_id" not in frame.columns:
        raise ValueError(f"{path}: grid file needs a link_id column")
    return frame.set_index("link_id")


async def evaluate_controller(data: Dict[str, Any]) -> Dict[str, Any]:
    """MAPE of an exported estimate grid against a reference grid, split by congestion."""
    try:
        cfg = load_config(data)
        net = load_network(cfg.corridor, cfg.dt, cfg.default_fd)
        estimate, reference = read_grid(data["estimate"]), read_grid(data["reference"])
        if list(estimate.index) != list(reference.index) or list(estimate.columns) != list(reference.columns):
            raise ValueError("estimate and reference grids do not share links and timesteps")
        links = reference.index.to_numpy()
        unknown = sorted(set(links.tolist()) - set(net.mainline_ids.tolist()))
        if unknown:
            raise EvaluationError(f"grid link ids {unknown} are not mainline links of {cfg.corridor}")
        # skip the initial column: it is the prior mean, not an estimate
        start = 1 if data.get("skip_initial", True) else 0
        result = compute_mape(
            estimate.to_numpy()[:, start:].T, reference.to_numpy()[:, start:].T, net.rho_c[links], cfg.mape_floor,
        )
    except KeyError as e:
        return failure(ValueError(f"request is missing {e}"))
    except Exception as e:
        return failure(e)
    logger.info(f"MAPE of {data['estimate']}: overall {result.overall:.3f}%")
    return success({
        "overall": result.overall,
        "congested": result.congested,
        "freeflow": result.freeflow,
        "evaluated_cells": result.evaluated_cells,
        "excluded_cells": result.excluded_cells,
    })
