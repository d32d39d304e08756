"""Ground truth, synthetic measurements, scoring, exports and the end-to-end workflows."""
import asyncio
import os

import numpy as np
import pandas as pd
import pytest

from core.data.binning import assimilation_step
from core.errors import EvaluationError
from core.experiment.evaluation import compute_mape, detector_mape, summarize_detectors
from core.experiment.measurement_simulator import (
    corridor_geometry,
    measured_bins,
    simulate_loop_measurements,
    simulate_probe_measurements,
)
from core.experiment.runner import RunReport, drop_detectors, run_filter
from core.experiment.scenario_config import Mode, probe_count
from core.experiment.truth import generate_truth, nominal_demand
from tools.export_grids import ExportGridsTool
from utils.rng import Stream, rng_stream
from workflows.demo_sweep import demo, ordering_tests, run_sweep
from workflows.experiment_workflow import ExperimentWorkflow, FileFilterWorkflow, SimulateWorkflow


def run(coro):
    return asyncio.run(coro)


def grid(n_steps, net, value=0.0):
    return np.full((n_steps + 1, net.n_links), value)


class TestMape:
    def test_identical_grids(self):
        ref = np.array([[0.01, 0.05], [0.02, 0.06]])
        assert compute_mape(ref, ref, 0.02).overall == 0.0

    def test_ten_percent_over(self):
        ref = np.array([[0.01, 0.05], [0.02, 0.06]])
        assert compute_mape(1.1 * ref, ref, 0.02).overall == pytest.approx(10.0)

    def test_mean_of_cell_errors(self):
        ref = np.ones((1, 4))
        result = compute_mape([[1.1, 1.2, 1.0, 1.3]], ref, 0.5)
        assert result.overall == pytest.approx(15.0)
        assert result.congested == pytest.approx(15.0)
        assert np.isnan(result.freeflow)

    def test_split_by_congestion(self):
        ref = np.array([[0.01, 0.05]])
        result = compute_mape([[0.011, 0.04]], ref, [0.02, 0.02])
        assert result.freeflow == pytest.approx(10.0)
        assert result.congested == pytest.approx(20.0)
        assert (result.congested_cells, result.freeflow_cells) == (1, 1)

    def test_cells_below_floor_are_excluded(self):
        result = compute_mape([[5.0, 0.011]], [[0.0, 0.01]], 0.02)
        assert result.excluded_cells == 1
        assert result.overall == pytest.approx(10.0)

    def test_nothing_to_score(self):
        with pytest.raises(EvaluationError):
            compute_mape([[0.1, 0.2]], [[0.0, 0.0]], 0.02)

    def test_detector_summary(self):
        assert np.isnan(detector_mape([0.02, 0.03], [0.0, 0.0]))
        mean, std = summarize_detectors({1: 10.0, 2: 20.0, 3: float("nan")})
        assert (mean, std) == (pytest.approx(15.0), pytest.approx(5.0))


class TestTruth:
    def test_empty_corridor_stays_empty(self, toy_config, toy_network):
        cfg = toy_config.model_copy(update={"demands": {}, "initial_density": 0.0})
        truth = generate_truth(cfg, toy_network)
        np.testing.assert_array_equal(truth.rho, 0.0)

    def test_same_seed_same_grid(self, toy_config, toy_network):
        a = generate_truth(toy_config, toy_network)
        b = generate_truth(toy_config, toy_network)
        np.testing.assert_array_equal(a.rho, b.rho)
        assert a.rho.shape == (toy_config.n_steps + 1, toy_network.n_links)

    def test_other_seed_other_grid(self, toy_config, toy_network):
        a = generate_truth(toy_config, toy_network)
        b = generate_truth(toy_config.model_copy(update={"truth_seed": 99}), toy_network)
        assert not np.array_equal(a.rho, b.rho)

    def test_toy_corridor_congests(self, toy_config, toy_network):
        truth = generate_truth(toy_config, toy_network)
        main = toy_network.mainline_ids
        assert (truth.rho[:, main] > toy_network.rho_c[main]).any()


class TestSimulatedMeasurements:
    def test_bins_inside_horizon(self):
        assert measured_bins(180, 5.0) == [0, 1, 2]
        assert measured_bins(179, 5.0) == [0, 1]

    def test_noiseless_loops_read_the_truth(self, chain3):
        rho = np.random.default_rng(0).uniform(0.0, 0.1, size=(181, chain3.n_links))
        batches = simulate_loop_measurements(rho, [0, 2], 0.0, np.random.default_rng(1), chain3.dt)
        assert sorted(batches) == [0, 1, 2]
        for k, batch in batches.items():
            np.testing.assert_array_equal(batch.values, rho[assimilation_step(k, chain3.dt), [0, 2]])

    def test_empty_truth_gives_zero_readings(self, chain3):
        batches = simulate_loop_measurements(grid(180, chain3), [1], 0.15, np.random.default_rng(1), chain3.dt)
        assert all(batch.values.tolist() == [0.0] for batch in batches.values())

    def test_loop_noise_spread(self, chain3):
        rho = grid(180, chain3, 0.05)
        values = simulate_loop_measurements(rho, [1] * 10_000, 0.10, np.random.default_rng(0), chain3.dt)[0].values
        assert values.std() == pytest.approx(0.005, rel=0.05)

    def test_no_probes_at_zero_penetration(self, chain3):
        assert simulate_probe_measurements(grid(180, chain3, 0.01), chain3, 0.0, 0.1, np.random.default_rng(0)) == {}

    def test_probe_count_per_bin(self, chain3):
        assert probe_count(0.03) == 3
        batches = simulate_probe_measurements(grid(180, chain3, 0.01), chain3, 0.03, 0.1, np.random.default_rng(0))
        assert [len(b) for b in batches.values()] == [3, 3, 3]

    def test_probes_follow_occupancy(self, chain3):
        rho = grid(180, chain3)
        rho[:, 2] = 0.05
        batches = simulate_probe_measurements(rho, chain3, 0.10, 0.0, np.random.default_rng(0))
        links = np.concatenate([b.links for b in batches.values()])
        assert set(links.tolist()) == {2}
        speeds = np.concatenate([b.values for b in batches.values()])
        np.testing.assert_allclose(speeds, 6.0 * (0.12 / 0.05 - 1.0))

    def test_empty_corridor_has_no_probes(self, chain3):
        assert simulate_probe_measurements(grid(180, chain3), chain3, 0.03, 0.1, np.random.default_rng(0)) == {}

    def test_geometry_tiles_the_mainline(self, toy_network):
        boxes = corridor_geometry(toy_network)
        assert [b.link_id for b in boxes] == list(toy_network.mainline_ids)
        assert all(a.x_max == b.x_min for a, b in zip(boxes, boxes[1:]))


class TestFilterRuns:
    def test_single_particle_open_loop_replays_truth(self, toy_config, toy_network):
        cfg = toy_config.model_copy(update={
            "particles": 1,
            "ic_noise_frac": 0.0,
            "truth_demand_scale": 1.0,
            "filter_seed": toy_config.truth_seed,
            "mode": Mode.OPEN_LOOP,
        })
        truth = generate_truth(cfg, toy_network)
        report = run_filter(cfg, toy_network, {}, nominal_demand(toy_network, cfg), truth=truth.rho)
        np.testing.assert_array_equal(report.estimate, truth.rho)
        assert report.mape.overall == 0.0

    def test_fused_without_probes_equals_loops_only(self, toy_config, toy_network):
        cfg = toy_config.model_copy(update={"particles": 50})
        truth = generate_truth(cfg, toy_network)
        loops = simulate_loop_measurements(
            truth.rho, cfg.detectors, cfg.measurement_noise_frac, rng_stream(cfg.measurement_seed, Stream.LOOPS), cfg.dt,
        )
        demand = nominal_demand(toy_network, cfg)
        fused = run_filter(cfg.model_copy(update={"mode": Mode.FUSED}), toy_network, loops, demand, truth=truth.rho)
        plain = run_filter(cfg.model_copy(update={"mode": Mode.LOOPS_ONLY}), toy_network, loops, demand, truth=truth.rho)
        np.testing.assert_array_equal(fused.estimate, plain.estimate)

    def test_held_out_detector_is_not_assimilated(self, toy_config, toy_network):
        cfg = toy_config.model_copy(update={"particles": 50, "mode": Mode.LOOPS_ONLY})
        truth = generate_truth(cfg, toy_network)
        loops = simulate_loop_measurements(
            truth.rho, cfg.detectors, cfg.measurement_noise_frac, rng_stream(cfg.measurement_seed, Stream.LOOPS), cfg.dt,
        )
        without = {k: drop_detectors(b, cfg.held_out) for k, b in loops.items()}
        demand = nominal_demand(toy_network, cfg)
        a = run_filter(cfg, toy_network, loops, demand, truth=truth.rho)
        b = run_filter(cfg, toy_network, without, demand, truth=truth.rho)
        np.testing.assert_array_equal(a.estimate, b.estimate)
        assert set(a.held_out) == {4}
        assert np.isfinite(a.held_out[4])

    def test_run_is_reproducible(self, toy_config, toy_network):
        cfg = toy_config.model_copy(update={"particles": 30})
        truth = generate_truth(cfg, toy_network)
        demand = nominal_demand(toy_network, cfg)
        a = run_filter(cfg, toy_network, {}, demand, truth=truth.rho)
        b = run_filter(cfg, toy_network, {}, demand, truth=truth.rho)
        np.testing.assert_array_equal(a.estimate, b.estimate)


class TestExport:
    def make_report(self, net):
        rng = np.random.default_rng(3)
        truth = rng.uniform(0.005, 0.05, size=(4, net.n_links))
        estimate = truth * rng.uniform(0.9, 1.1, size=truth.shape)
        main = net.mainline_ids
        report = RunReport(mode=Mode.FUSED, penetration_rate=0.02, estimate=estimate, truth=truth, metadata={"scenario": "grid"})
        report.mape = compute_mape(estimate[1:, main], truth[1:, main], net.rho_c[main])
        return report

    def test_layout(self, tmp_path, chain3):
        report = self.make_report(chain3)
        written = ExportGridsTool().export(str(tmp_path), chain3, [report], truth=report.truth, pgm=True)
        names = sorted(os.path.basename(p) for p in written)
        assert names == sorted(["truth.csv", "truth.pgm", "estimate_fused_pr02.csv", "estimate_fused_pr02.pgm", "meta.txt", "report.csv"])
        frame = pd.read_csv(tmp_path / "truth.csv")
        assert list(frame.columns) == ["link_id", "0", "5", "10", "15"]
        assert frame["link_id"].tolist() == [0, 1, 2]
        header = (tmp_path / "truth.pgm").read_bytes()[:12]
        assert header.startswith(b"P5\n4 3\n255\n")

    def test_re_export_is_byte_identical(self, tmp_path, chain3):
        report = self.make_report(chain3)
        for name in ("a", "b"):
            ExportGridsTool().export(str(tmp_path / name), chain3, [report], truth=report.truth, pgm=True)
        for path in sorted((tmp_path / "a").iterdir()):
            assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()

    def test_reported_mape_reads_back_exactly(self, tmp_path, chain3):
        report = self.make_report(chain3)
        ExportGridsTool().export(str(tmp_path), chain3, [report], truth=report.truth)
        table = pd.read_csv(tmp_path / "report.csv", float_precision="round_trip")
        assert table.loc[0, "overall_mape"] == report.mape.overall
        meta = (tmp_path / "meta.txt").read_text(encoding="utf-8").splitlines()
        line = next(l for l in meta if l.startswith("mape[fused_pr02]"))
        overall = float(line.split("overall=")[1].split()[0])
        assert overall == report.mape.overall

    def test_mismatched_grids_are_rejected(self, tmp_path, chain3):
        report = self.make_report(chain3)
        result = ExportGridsTool().run({"out_dir": str(tmp_path), "net": chain3, "reports": [report], "truth": np.zeros((9, chain3.n_links))})
        assert result["success"] is False
        assert result["server_error"] is False


class TestWorkflows:
    def test_simulate_then_filter_from_files(self, tmp_path, toy_config):
        cfg = toy_config.model_copy(update={"particles": 20})
        out = tmp_path / "sim"
        simulated = run(SimulateWorkflow.run({"config": cfg, "out_dir": str(out)}))
        assert simulated["success"], simulated.get("error")
        for name in ("loops.csv", "probes.csv", "geometry.csv", "truth.csv", "meta.txt"):
            assert (out / name).exists()

        file_cfg = cfg.model_copy(update={
            "loops_file": str(out / "loops.csv"),
            "probes_file": str(out / "probes.csv"),
            "geometry_file": str(out / "geometry.csv"),
        })
        result = run(FileFilterWorkflow.run({"config": file_cfg, "out_dir": str(tmp_path / "filter")}))
        assert result["success"], result.get("error")
        data = result["data"]
        probes = pd.read_csv(out / "probes.csv")
        assert data["match_stats"]["matched"] == len(probes)
        (report,) = data["reports"]
        assert report.mape is None
        assert np.isfinite(report.held_out[4])
        assert (tmp_path / "filter" / "estimate_fused_pr02.csv").exists()

    def test_experiment_scores_every_run(self, toy_config):
        cfg = toy_config.model_copy(update={"particles": 20})
        runs = [(Mode.OPEN_LOOP, 0.0), (Mode.FUSED, 0.02)]
        result = run(ExperimentWorkflow.run({"config": cfg, "runs": runs}))
        assert result["success"], result.get("error")
        reports = result["data"]["reports"]
        assert [r.mode for r in reports] == [Mode.OPEN_LOOP, Mode.FUSED]
        assert all(np.isfinite(r.mape.overall) for r in reports)

    def test_bad_detector_is_a_client_error(self, toy_config):
        cfg = toy_config.model_copy(update={"detectors": [7], "held_out": []})
        result = run(ExperimentWorkflow.run({"config": cfg}))
        assert result["success"] is False
        assert result["server_error"] is False
        assert result["node"] == "load_network"

    def test_missing_loops_file(self, toy_config):
        cfg = toy_config.model_copy(update={"probes_file": "probes.csv"})
        result = run(FileFilterWorkflow.run({"config": cfg}))
        assert result["success"] is False
        assert result["server_error"] is False


class TestDemo:
    def test_sweep_is_reproducible(self, tmp_path, toy_config):
        cfg = toy_config.model_copy(update={"particles": 20})
        first = run(demo(cfg, seeds=2, out_dir=str(tmp_path / "a")))
        run(demo(cfg, seeds=2, out_dir=str(tmp_path / "b")))
        assert len(first["summary"]) == 8
        for name in ("sweep.csv", "report.csv", "meta.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    @pytest.mark.slow
    def test_reference_orderings(self, reference_config):
        table = run(run_sweep(reference_config, seeds=10, workers=os.cpu_count() or 1))
        tests = {(t["worse"], t["better"]): t for t in ordering_tests(table)}
        for key, test in tests.items():
            assert test["holds"], key
        assert tests[("open_loop", "loops_only")]["p_value"] < 0.05
        assert tests[("loops_only", "fused_pr03")]["p_value"] < 0.05
        means = table.groupby("label")["overall_mape"].mean()
        assert means["fused_pr03"] <= 0.85 * means["loops_only"]
