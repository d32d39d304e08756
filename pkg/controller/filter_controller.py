from typing import Any, Dict
import logging

from controller.common import failure, load_config, success
from core.experiment.scenario_config import Mode
from workflows.experiment_workflow import ExperimentWorkflow, FileFilterWorkflow

logger = logging.getLogger(__name__)


def summarize_report(report) -> Dict[str, Any]:
    mean, std = report.held_out_summary
    return {
        "mode": report.mode.value,
        "penetration_rate": report.penetration_rate,
        "mape": None if report.mape is None else {
            "overall": report.mape.overall,
            "congested": report.mape.congested,
            "freeflow": report.mape.freeflow,
            "excluded_cells": report.mape.excluded_cells,
        },
        "held_out": {"per_detector": report.held_out, "mean": mean, "std": std},
        "diagnostics": report.diagnostics,
        "timings": report.timings,
    }


async def filter_controller(data: Dict[str, Any]) -> Dict[str, Any]:
    """
    Run the filter in one or more modes.

    File-based scenarios (loops_file / probes_file) assimilate the ingested records; otherwise a
    synthetic truth is generated and measured first.
    """
    try:
        cfg = load_config(data)
        modes = [Mode(m) for m in data.get("modes") or [cfg.mode]]
    except Exception as e:
        return failure(e)
    workflow = FileFilterWorkflow if cfg.is_file_based else ExperimentWorkflow
    logger.info(f"Running {workflow.name} for modes {[m.value for m in modes]}")
    result = await workflow.run({
        "config": cfg,
        "runs": [(mode, cfg.penetration_rate) for mode in modes],
        "out_dir": data.get("out_dir"),
        "pgm": data.get("pgm", False),
        "xlsx": data.get("xlsx", False),
    })
    if not result["success"]:
        return result
    context = result["data"]
    response = {"reports": [summarize_report(r) for r in context["reports"]], "written": context.get("written", [])}
    if "match_stats" in context:
        response["match_stats"] = context["match_stats"]
        response["unhealthy_detectors"] = context["unhealthy_detectors"]
    return success(response)
