"""
Command-line surface for the freeway density estimation harness.

Each subcommand builds the same {type, data} request the HTTP and WebSocket endpoints accept and
dispatches it through routes.handle_request. The response envelope is printed as JSON and mapped to
the exit code: 0 success, 1 validation error, 2 runtime error.
"""
import argparse
import asyncio
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from routes import exit_code, handle_request
from utils.logging_config import configure_logging
from utils.request_validator import validate_request_dict
from utils.settings import get_settings

logger = logging.getLogger(__name__)

MODES = ["open_loop", "loops_only", "probes_only", "fused"]

# flag dest -> ScenarioConfig field
OVERRIDES = {
    "corridor": "corridor",
    "dt": "dt",
    "horizon": "horizon",
    "particles": "particles",
    "pr": "penetration_rate",
    "measurement_noise": "measurement_noise_frac",
    "detectors": "detectors",
    "held_out": "held_out",
    "truth_seed": "truth_seed",
    "filter_seed": "filter_seed",
    "measurement_seed": "measurement_seed",
    "boundary": "boundary",
    "resample_ess": "resample_ess_threshold",
    "loops": "loops_file",
    "probes": "probes_file",
    "geometry": "geometry_file",
}


def link_list(value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated link ids, got {value!r}")


def add_scenario_flags(parser: argparse.ArgumentParser, files: bool = False) -> None:
    parser.add_argument("--config", required=True, help="scenario JSON file")
    group = parser.add_argument_group("scenario overrides")
    group.add_argument("--corridor", help="corridor CSV")
    group.add_argument("--dt", type=float, help="timestep in seconds")
    group.add_argument("--horizon", type=float, help="horizon in seconds")
    group.add_argument("--particles", type=int, help="particle count P")
    group.add_argument("--pr", type=float, help="probe penetration rate in [0, 1]")
    group.add_argument("--measurement-noise", type=float, help="relative measurement noise")
    group.add_argument("--detectors", type=link_list, help="detector links, e.g. 5,15,25")
    group.add_argument("--held-out", type=link_list, help="held-out detector links")
    group.add_argument("--truth-seed", type=int)
    group.add_argument("--filter-seed", type=int)
    group.add_argument("--measurement-seed", type=int)
    group.add_argument("--boundary", choices=["nominal", "measured_hold"])
    group.add_argument("--resample-ess", type=float, help="resample when ESS/P falls below this")
    if files:
        group.add_argument("--loops", help="loops.csv to assimilate")
        group.add_argument("--probes", help="probes.csv to assimilate")
        group.add_argument("--geometry", help="geometry.csv for probe matching")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freeway-rbpf", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--log-level", help="overrides TRAFFIC_LOG_LEVEL")
    parser.add_argument("--log-file", help="overrides TRAFFIC_LOG_FILE; empty string disables the file")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="ground truth and synthetic measurements")
    add_scenario_flags(simulate)
    simulate.add_argument("--out", help="output directory (default: TRAFFIC_OUTPUT_DIR)")
    simulate.add_argument("--pgm", action="store_true", help="also write graymap renderings")

    run = sub.add_parser("filter", help="run the filter in one or more modes")
    add_scenario_flags(run, files=True)
    run.add_argument("--mode", action="append", choices=MODES + ["all"], help="repeatable; default from config")
    run.add_argument("--out", help="output directory")
    run.add_argument("--pgm", action="store_true")
    run.add_argument("--xlsx", action="store_true", help="also write report.xlsx")

    evaluate = sub.add_parser("evaluate", help="MAPE of an estimate grid against a reference grid")
    add_scenario_flags(evaluate)
    evaluate.add_argument("--estimate", required=True, help="estimate grid CSV")
    evaluate.add_argument("--reference", required=True, help="reference grid CSV, e.g. truth.csv")
    evaluate.add_argument("--include-initial", action="store_true", help="score the t=0 column too")

    validate = sub.add_parser("validate", help="check input files against their schemas")
    validate.add_argument("--corridor")
    validate.add_argument("--loops")
    validate.add_argument("--probes")
    validate.add_argument("--geometry")
    validate.add_argument("--dt", type=float, help="also check corridor topology and CFL at this timestep")
    validate.add_argument("--describe", action="store_true", help="print the documented schemas")

    demo = sub.add_parser("demo", help="every mode and penetration rate over several seeds")
    add_scenario_flags(demo)
    demo.add_argument("--seeds", type=int, default=10)
    demo.add_argument("--workers", type=int, default=1)
    demo.add_argument("--out", help="output directory")
    return parser


def scenario_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {field: getattr(args, dest) for dest, field in OVERRIDES.items() if getattr(args, dest, None) is not None}


def build_request(args: argparse.Namespace) -> Dict[str, Any]:
    """Namespace to a {type, data} request."""
    if args.command == "validate":
        data = {kind: getattr(args, kind) for kind in ("corridor", "loops", "probes", "geometry") if getattr(args, kind)}
        data.update({"dt": args.dt, "describe": args.describe})
        return {"type": "validate", "data": data}

    data: Dict[str, Any] = {"config": args.config, "overrides": scenario_overrides(args)}
    if args.command in ("simulate", "filter", "demo"):
        data["out_dir"] = args.out or get_settings().output_dir
    if args.command in ("simulate", "filter"):
        data["pgm"] = args.pgm
    if args.command == "filter":
        data["xlsx"] = args.xlsx
        if args.mode:
            data["modes"] = MODES if "all" in args.mode else list(dict.fromkeys(args.mode))
    elif args.command == "evaluate":
        data.update({"estimate": args.estimate, "reference": args.reference, "skip_initial": not args.include_initial})
    elif args.command == "demo":
        data.update({"seeds": args.seeds, "workers": args.workers})
    return {"type": args.command, "data": data}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, args.log_file)

    is_valid, request, error = validate_request_dict(build_request(args))
    if not is_valid:
        print(json.dumps({"success": False, "server_error": False, "error": error}, indent=2))
        return 1
    response = asyncio.run(handle_request(request))
    if args.command == "validate" and args.describe and response.get("success"):
        for kind, schema in response["response"]["schemas"].items():
            print(f"== {kind}.csv ==\n{schema}\n")
    else:
        print(json.dumps(response, indent=2, default=str))
    code = exit_code(response)
    if code:
        logger.error(f"{args.command} failed ({code}): {response.get('error')}")
    return code


if __name__ == "__main__":
    sys.exit(main())
