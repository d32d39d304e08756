import logging
from typing import Any, Dict, List, Tuple

from pydantic import ValidationError

from core.data.binning import bin_measurements, loop_observations, merge_batches, probe_observations
from core.data.boundary import boundary_series
from core.data.probe_matching import GeometryIndex, MatchStats, match_probes
from core.errors import CoverageError, EvaluationError, GeometryError, NetworkValidationError, SchemaError
from core.experiment.measurement_simulator import (
    corridor_geometry,
    loop_records,
    probe_records,
    simulate_loop_measurements,
    simulate_probe_measurements,
)
from core.experiment.runner import evaluate_report, run_filter
from core.experiment.scenario_config import BoundaryMode, Mode, ScenarioConfig
from core.experiment.truth import generate_truth, nominal_demand
from core.workflow.workflow_class import WorkflowNode
from tools.export_grids import ExportGridsTool
from tools.export_measurements import ExportMeasurementsTool
from tools.ingest.parse_corridor import load_network
from tools.ingest.parse_geometry import parse_geometry
from tools.ingest.parse_loops import parse_loops
from tools.ingest.parse_probes import parse_probes
from utils.rng import Stream, rng_stream

logger = logging.getLogger(__name__)

# problems with the caller's input rather than with the program
VALIDATION_ERRORS = (
    NetworkValidationError, SchemaError, CoverageError, GeometryError, EvaluationError, ValidationError, ValueError,
)


def probe_stream_key(penetration_rate: float) -> int:
    return int(round(penetration_rate * 10000))


class StageNode(WorkflowNode):
    """Workflow node that turns validation failures into a client-error envelope."""

    async def call(self, context: Dict[str, Any]) -> Dict[str, Any]:
        try:
            return {"success": True, "server_error": False, "data": self.execute(context)}
        except VALIDATION_ERRORS as e:
            logger.warning(f"{self.name}: {e}")
            return {"success": False, "server_error": False, "error": str(e)}

    def execute(self, context: Dict[str, Any]) -> Dict[str, Any]:
        raise NotImplementedError


class LoadNetworkNode(StageNode):
    name = "load_network"

    def execute(self, context):
        cfg: ScenarioConfig = context["config"]
        net = load_network(cfg.corridor, cfg.dt, cfg.default_fd)
        for link in cfg.detectors:
            if not (0 <= link < net.n_links) or not net.density_mask[link]:
                raise ValueError(f"detector placed on link {link}, which is not a mainline link")
        return {"net": net}


class GenerateTruthNode(StageNode):
    name = "generate_truth"

    def execute(self, context):
        return {"truth": generate_truth(context["config"], context["net"])}


class SimulateMeasurementsNode(StageNode):
    """
    Loop batches for every placed detector, probe batches for each requested penetration rate,
    the same data as ingestible records, and the filter's boundary demand.
    """

    name = "simulate_measurements"

    def execute(self, context):
        cfg: ScenarioConfig = context["config"]
        net, truth = context["net"], context["truth"]
        rates = sorted({pr for _, pr in context.get("runs", [(cfg.mode, cfg.penetration_rate)])} | {cfg.penetration_rate})

        loops = simulate_loop_measurements(
            truth.rho, cfg.detectors, cfg.measurement_noise_frac,
            rng_stream(cfg.measurement_seed, Stream.LOOPS), net.dt, cfg.bin_width,
        )
        probes = {
            pr: simulate_probe_measurements(
                truth.rho, net, pr, cfg.measurement_noise_frac,
                rng_stream(cfg.measurement_seed, Stream.PROBES, probe_stream_key(pr)), cfg.bin_width,
            )
            for pr in rates
        }
        geometry = corridor_geometry(net)
        records = {
            "loops": loop_records(loops, truth, net, width=cfg.bin_width),
            "probes": probe_records(probes[cfg.penetration_rate], geometry, cfg.bin_width),
            "geometry": geometry,
        }
        if cfg.boundary == BoundaryMode.MEASURED_HOLD:
            demand = boundary_series(records["loops"], net, cfg.horizon, cfg.bin_width)
        else:
            demand = nominal_demand(net, cfg)
        logger.info(
            f"Simulated {sum(len(b) for b in loops.values())} loop and "
            f"{sum(len(b) for b in probes[cfg.penetration_rate].values())} probe measurements"
        )
        return {"loop_batches": loops, "probe_batches": probes, "records": records, "filter_demand": demand}


class IngestRecordsNode(StageNode):
    """Parse loop/probe/geometry files, map-match probes, bin everything, and build boundary demand."""

    name = "ingest_records"

    def execute(self, context):
        cfg: ScenarioConfig = context["config"]
        net = context["net"]
        if cfg.loops_file is None:
            raise ValueError("a file-based run needs loops_file")
        loops = parse_loops(cfg.loops_file)
        unhealthy = sorted({r.detector_id for r in loops if not r.healthy})
        if unhealthy:
            logger.warning(f"Excluding {len(unhealthy)} unhealthy detector(s): {unhealthy}")

        stats = MatchStats()
        matched: List[Tuple[Any, int]] = []
        if cfg.probes_file is not None:
            geometry = GeometryIndex.build(parse_geometry(cfg.geometry_file) if cfg.geometry_file else [])
            matched, stats = match_probes(parse_probes(cfg.probes_file), geometry)
            stray = [link for _, link in matched if not (0 <= link < net.n_links) or not net.density_mask[link]]
            if stray:
                raise GeometryError(f"probes matched to non-mainline links {sorted(set(stray))}")

        loop_batches = bin_measurements(loop_observations(loops, net), cfg.bin_width)
        probe_batches = bin_measurements(probe_observations(matched), cfg.bin_width)
        if cfg.boundary == BoundaryMode.NOMINAL and cfg.demands:
            demand = nominal_demand(net, cfg)
        else:
            demand = boundary_series(loops, net, cfg.horizon, cfg.bin_width)
        return {
            "loop_batches": loop_batches,
            "probe_batches": {cfg.penetration_rate: probe_batches},
            "filter_demand": demand,
            "match_stats": stats.as_dict(),
            "unhealthy_detectors": unhealthy,
        }


class RunFilterNode(StageNode):
    """Run the filter once per requested (mode, penetration rate)."""

    name = "run_filter"

    def execute(self, context):
        cfg: ScenarioConfig = context["config"]
        net = context["net"]
        reports = []
        for mode, pr in context.get("runs", [(cfg.mode, cfg.penetration_rate)]):
            run_cfg = cfg.model_copy(update={"mode": Mode(mode), "penetration_rate": pr})
            batches = merge_batches(context["loop_batches"], context["probe_batches"].get(pr, {}))
            reports.append(run_filter(run_cfg, net, batches, context["filter_demand"], width=cfg.bin_width))
        return {"reports": reports}


class EvaluateNode(StageNode):
    name = "evaluate"

    def execute(self, context):
        cfg: ScenarioConfig = context["config"]
        truth = context.get("truth")
        for report in context["reports"]:
            run_cfg = cfg.model_copy(update={"mode": report.mode, "penetration_rate": report.penetration_rate})
            evaluate_report(
                report, context["net"], run_cfg,
                truth=truth.rho if truth is not None else None,
                batches=context["loop_batches"], width=cfg.bin_width,
            )
            if report.mape is not None:
                logger.info(
                    f"{report.mode.value} PR={report.penetration_rate:g}: MAPE overall {report.mape.overall:.3f}%, "
                    f"congested {report.mape.congested:.3f}%, freeflow {report.mape.freeflow:.3f}%"
                )
        return {}


class ExportMeasurementsNode(WorkflowNode):
    name = "export_measurements"

    async def call(self, context):
        if not context.get("out_dir"):
            return {"success": True, "server_error": False, "data": {}}
        result = ExportMeasurementsTool().run({"out_dir": context["out_dir"], **context["records"]})
        if result["success"]:
            return {"success": True, "server_error": False, "data": {"written": context.get("written", []) + result["response"]}}
        return result


class ExportGridsNode(WorkflowNode):
    name = "export_grids"

    async def call(self, context):
        if not context.get("out_dir"):
            return {"success": True, "server_error": False, "data": {}}
        cfg: ScenarioConfig = context["config"]
        truth = context.get("truth")
        metadata = {
            "scenario": cfg.name,
            "particles": cfg.particles,
            **{f"{name}_seed": seed for name, seed in cfg.seeds().items()},
        }
        if "match_stats" in context:
            metadata.update({f"probes_{key}": value for key, value in context["match_stats"].items()})
        if "unhealthy_detectors" in context:
            metadata["unhealthy_detectors"] = ",".join(context["unhealthy_detectors"]) or "none"
        result = ExportGridsTool().run({
            "out_dir": context["out_dir"],
            "net": context["net"],
            "reports": context.get("reports", []),
            "truth": truth.rho if truth is not None else None,
            "metadata": metadata,
            "pgm": context.get("pgm", False),
            "xlsx": context.get("xlsx", False),
        })
        if result["success"]:
            return {"success": True, "server_error": False, "data": {"written": context.get("written", []) + result["response"]}}
        return result
