from typing import Any, Dict
import logging

from controller.common import failure, load_config, success
from workflows.experiment_workflow import SimulateWorkflow

logger = logging.getLogger(__name__)


async def simulate_controller(data: Dict[str, Any]) -> Dict[str, Any]:
    """Ground truth plus synthetic loops.csv / probes.csv / geometry.csv / truth.csv in out_dir."""
    try:
        cfg = load_config(data)
    except Exception as e:
        return failure(e)
    logger.info(f"Simulating scenario {cfg.name} into {data.get('out_dir')}")
    result = await SimulateWorkflow.run({"config": cfg, "out_dir": data.get("out_dir"), "pgm": data.get("pgm", False)})
    if not result["success"]:
        return result
    context = result["data"]
    truth = context["truth"]
    net = context["net"]
    main = net.mainline_ids
    return success({
        "steps": truth.n_steps,
        "congested_link_steps": int((truth.rho[:, main] > net.rho_c[main]).sum()),
        "loop_records": len(context["records"]["loops"]),
        "probe_records": len(context["records"]["probes"]),
        "written": context.get("written", []),
    })
