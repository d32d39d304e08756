"""
Mode by penetration-rate sweep over independent seeds, summarized as a MAPE table.
"""
import asyncio
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import ttest_rel

from core.experiment.scenario_config import Mode, ScenarioConfig
from tools.export_grids import REPORT_FLOAT_FORMAT, report_rows
from workflows.experiment_workflow import ExperimentWorkflow

logger = logging.getLogger(__name__)

DEMO_RUNS: Tuple[Tuple[Mode, float], ...] = (
    (Mode.OPEN_LOOP, 0.0),
    (Mode.LOOPS_ONLY, 0.0),
    (Mode.FUSED, 0.01),
    (Mode.FUSED, 0.02),
    (Mode.FUSED, 0.03),
    (Mode.PROBES_ONLY, 0.01),
    (Mode.PROBES_ONLY, 0.02),
    (Mode.PROBES_ONLY, 0.03),
)

# (worse, better): the first label is expected to have the larger mean MAPE
EXPECTED_ORDERINGS = (
    ("open_loop", "loops_only"),
    ("loops_only", "fused_pr03"),
    ("open_loop", "probes_only_pr01"),
    ("loops_only", "fused_pr01"),
    ("fused_pr01", "fused_pr02"),
    ("fused_pr02", "fused_pr03"),
)


def seed_config(cfg: ScenarioConfig, index: int) -> ScenarioConfig:
    """Seed triple of sweep member index; member 0 keeps the configured seeds."""
    return cfg.model_copy(update={
        "truth_seed": cfg.truth_seed + index,
        "filter_seed": cfg.filter_seed + index,
        "measurement_seed": cfg.measurement_seed + index,
    })


def run_seed(config_json: str, index: int, runs: Sequence[Tuple[str, float]]) -> List[Dict[str, Any]]:
    """One sweep member end to end; module-level so worker processes can run it."""
    cfg = seed_config(ScenarioConfig.model_validate_json(config_json), index)
    result = asyncio.run(ExperimentWorkflow.run({"config": cfg, "runs": [(Mode(m), pr) for m, pr in runs]}))
    if not result["success"]:
        raise RuntimeError(f"seed {index}: {result.get('error')}")
    rows = report_rows(result["data"]["reports"])
    for row in rows:
        row["seed_index"] = index
        row["truth_seed"] = cfg.truth_seed
        row["filter_seed"] = cfg.filter_seed
    return rows


async def run_sweep(
    cfg: ScenarioConfig,
    seeds: int,
    runs: Sequence[Tuple[Mode, float]] = DEMO_RUNS,
    workers: int = 1,
) -> pd.DataFrame:
    """Per-seed rows collected in seed order, so the table does not depend on scheduling."""
    config_json = cfg.model_dump_json()
    plain_runs = [(Mode(m).value, float(pr)) for m, pr in runs]
    if workers > 1:
        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [loop.run_in_executor(pool, run_seed, config_json, i, plain_runs) for i in range(seeds)]
            per_seed = await asyncio.gather(*futures)
    else:
        per_seed = [await asyncio.to_thread(run_seed, config_json, i, plain_runs) for i in range(seeds)]
    rows = [row for seed_rows in per_seed for row in seed_rows]
    logger.info(f"Sweep finished: {seeds} seeds x {len(runs)} runs")
    return pd.DataFrame(rows)


def summarize_sweep(table: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation of every MAPE column per run label, in sweep order."""
    order = list(dict.fromkeys(table["label"]))
    grouped = table.groupby("label", sort=False)
    summary = grouped[["overall_mape", "congested_mape", "freeflow_mape"]].agg(["mean", "std"])
    summary.columns = [f"{col}_{stat}" for col, stat in summary.columns]
    summary = summary.reindex(order).reset_index()
    summary.insert(1, "seeds", grouped.size().reindex(order).values)
    return summary


def ordering_tests(table: pd.DataFrame) -> List[Dict[str, Any]]:
    """One-sided paired t-test per expected ordering on overall MAPE, paired by seed."""
    pivot = table.pivot(index="seed_index", columns="label", values="overall_mape")
    results = []
    for worse, better in EXPECTED_ORDERINGS:
        if worse not in pivot or better not in pivot:
            continue
        a, b = pivot[worse].to_numpy(), pivot[better].to_numpy()
        if len(a) >= 2 and np.any(a != b):
            p_value = float(ttest_rel(a, b, alternative="greater").pvalue)
        else:
            p_value = float("nan")
        results.append({
            "worse": worse, "better": better,
            "mean_worse": float(np.mean(a)), "mean_better": float(np.mean(b)),
            "holds": bool(np.mean(a) > np.mean(b)), "p_value": p_value,
        })
    return results


def export_sweep(out_dir: str, table: pd.DataFrame, cfg: ScenarioConfig, seeds: int) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, name) for name in ("sweep.csv", "report.csv", "meta.txt")]
    table.to_csv(paths[0], index=False, float_format=REPORT_FLOAT_FORMAT, lineterminator="\n")
    summarize_sweep(table).to_csv(paths[1], index=False, float_format=REPORT_FLOAT_FORMAT, lineterminator="\n")
    lines = [
        f"scenario: {cfg.name}",
        f"particles: {cfg.particles}",
        f"seeds: {seeds}",
        f"base_seeds: truth={cfg.truth_seed} filter={cfg.filter_seed} measurement={cfg.measurement_seed}",
    ]
    for test in ordering_tests(table):
        lines.append(
            f"ordering {test['worse']} > {test['better']}: holds={test['holds']} "
            f"mean={test['mean_worse']!r}/{test['mean_better']!r} p={test['p_value']!r}"
        )
    with open(paths[2], "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return paths


async def demo(cfg: ScenarioConfig, seeds: int, out_dir: Optional[str] = None, workers: int = 1) -> Dict[str, Any]:
    table = await run_sweep(cfg, seeds, workers=workers)
    written = export_sweep(out_dir, table, cfg, seeds) if out_dir else []
    return {"summary": summarize_sweep(table).to_dict(orient="records"), "orderings": ordering_tests(table), "written": written}
