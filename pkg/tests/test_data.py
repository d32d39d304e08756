import numpy as np
import pytest

from conftest import write_csv
from core.data.binning import (
    assimilation_step,
    bin_index,
    bin_measurements,
    count_measurements,
    loop_observations,
    merge_batches,
    probe_observations,
    schedule_batches,
)
from core.data.boundary import PiecewiseDemand, boundary_series
from core.data.probe_matching import angular_distance, match_probe, match_probes, validate_geometry
from core.data.records import LinkGeometry, LoopRecord, ProbeRecord
from core.errors import CoverageError, GeometryError, SchemaError
from core.fusion.measurement import MeasurementKind
from tools.ingest.parse_geometry import parse_geometry
from tools.ingest.parse_loops import ParseLoopsTool, parse_loops
from tools.ingest.parse_probes import parse_probes

LOOP_HEADER = "timestamp,detector_id,link_id,density,flow,speed,healthy"
PROBE_HEADER = "timestamp,device_id,x,y,link_id,speed,heading"


def boxes(n=3, length=200.0, bearing=90.0):
    return [
        LinkGeometry(link_id=i, x_min=i * length, x_max=(i + 1) * length, y_min=-10.0, y_max=10.0, bearing=bearing)
        for i in range(n)
    ]


def probe(x=None, y=None, heading=90.0, link_id=None, t=10.0, speed=25.0, device="d1"):
    return ProbeRecord(timestamp=t, device_id=device, x=x, y=y, link_id=link_id, speed=speed, heading=heading)


def loop(t, link, flow=None, density=None, speed=None, healthy=True, detector="L"):
    return LoopRecord(timestamp=t, detector_id=detector, link_id=link, density=density, flow=flow, speed=speed, healthy=healthy)


class TestLoopFile:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "loops.csv"
        path.write_text("", encoding="utf-8")
        assert parse_loops(str(path)) == []

    def test_header_only(self, tmp_path):
        assert parse_loops(write_csv(tmp_path / "loops.csv", LOOP_HEADER)) == []

    def test_negative_density_reports_its_line(self, tmp_path):
        path = write_csv(tmp_path / "loops.csv", LOOP_HEADER, ["0,a,1,0.02,,,true", "300,a,1,-0.01,,,true"])
        with pytest.raises(SchemaError) as exc:
            parse_loops(path)
        assert exc.value.line == 3

    def test_check_collects_every_violation(self, tmp_path):
        path = write_csv(tmp_path / "loops.csv", LOOP_HEADER, ["0,a,x,0.02,,,", "300,a,1,,,,", "600,a,1,0.03,,,maybe"])
        lines = [v.line for v in ParseLoopsTool().check(path)]
        assert lines == [2, 3, 4]

    def test_full_day_of_reports(self, tmp_path):
        rows = [
            f"{k * 600},loop-{d},{d},0.02,,,true"
            for k in range(144)
            for d in range(42)
        ]
        records = parse_loops(write_csv(tmp_path / "loops.csv", LOOP_HEADER, rows))
        assert len(records) == 42 * 144
        timestamps = [r.timestamp for r in records]
        assert timestamps == sorted(timestamps)

    def test_unhealthy_flag(self, tmp_path):
        path = write_csv(tmp_path / "loops.csv", LOOP_HEADER, ["0,a,1,0.02,,,false", "0,b,2,0.03,,,"])
        a, b = parse_loops(path)
        assert not a.healthy
        assert b.healthy


class TestProbeFile:
    def test_xy_or_link_required(self, tmp_path):
        path = write_csv(tmp_path / "probes.csv", PROBE_HEADER, ["10,d,,,,20,90"])
        with pytest.raises(SchemaError) as exc:
            parse_probes(path)
        assert exc.value.line == 2

    def test_heading_range(self, tmp_path):
        path = write_csv(tmp_path / "probes.csv", PROBE_HEADER, ["10,d,5,0,,20,360"])
        with pytest.raises(SchemaError):
            parse_probes(path)

    def test_pre_matched_row(self, tmp_path):
        (record,) = parse_probes(write_csv(tmp_path / "probes.csv", PROBE_HEADER, ["10,d,,,4,20,90"]))
        assert record.link_id == 4
        assert not record.has_position


class TestGeometry:
    def test_overlapping_boxes(self):
        a = LinkGeometry(link_id=0, x_min=0, x_max=200, y_min=-10, y_max=10, bearing=90)
        b = LinkGeometry(link_id=1, x_min=150, x_max=300, y_min=-10, y_max=10, bearing=90)
        with pytest.raises(GeometryError) as exc:
            validate_geometry([a, b])
        assert set(exc.value.link_ids) == {0, 1}

    def test_shared_edges_are_allowed(self):
        validate_geometry(boxes())

    def test_inverted_box_rejected_on_load(self, tmp_path):
        path = write_csv(tmp_path / "geometry.csv", "link_id,x_min,x_max,y_min,y_max,bearing", ["0,200,0,-10,10,90"])
        with pytest.raises(SchemaError):
            parse_geometry(path)

    def test_duplicate_link_rejected_on_load(self, tmp_path):
        rows = ["0,0,200,-10,10,90", "0,400,600,-10,10,90"]
        path = write_csv(tmp_path / "geometry.csv", "link_id,x_min,x_max,y_min,y_max,bearing", rows)
        with pytest.raises(GeometryError):
            parse_geometry(path)


class TestProbeMatching:
    def test_inside_one_box_with_matching_heading(self):
        assert match_probe(probe(x=100.0, y=0.0, heading=95.0), boxes()) == 0

    def test_heading_outside_tolerance(self):
        assert match_probe(probe(x=100.0, y=0.0, heading=120.0), boxes()) is None

    def test_opposite_direction(self):
        assert match_probe(probe(x=300.0, y=0.0, heading=270.0), boxes()) is None

    def test_point_on_shared_edge_is_ambiguous(self):
        assert match_probe(probe(x=200.0, y=0.0), boxes()) is None

    def test_point_outside_every_box(self):
        assert match_probe(probe(x=700.0, y=0.0), boxes()) is None
        assert match_probe(probe(x=100.0, y=50.0), boxes()) is None

    def test_heading_wraps_around_north(self):
        assert angular_distance(355.0, 5.0) == pytest.approx(10.0)
        assert match_probe(probe(x=100.0, y=0.0, heading=5.0), boxes(bearing=355.0)) == 0

    def test_pre_matched_probe_keeps_its_link(self):
        assert match_probe(probe(link_id=1), boxes()) == 1
        assert match_probe(probe(link_id=1, heading=270.0), boxes()) is None
        assert match_probe(probe(link_id=9), boxes()) == 9

    def test_outcome_counts(self):
        records = [
            probe(x=100.0, y=0.0),
            probe(x=500.0, y=0.0),
            probe(x=300.0, y=0.0, heading=180.0),
            probe(x=900.0, y=0.0),
            probe(x=200.0, y=0.0),
        ]
        matched, stats = match_probes(records, boxes())
        assert [link for _, link in matched] == [0, 2]
        assert stats.as_dict() == {"matched": 2, "heading_rejected": 1, "geometry_rejected": 2}
        assert stats.total == len(records)


class TestBinning:
    def test_bin_edges(self):
        assert bin_index(0.0) == 0
        assert bin_index(299.0) == 0
        assert bin_index(300.0) == 1
        assert bin_index(301.0) == 1

    def test_first_bin_assimilated_at_its_end(self):
        assert assimilation_step(0, 5.0) == 60
        assert assimilation_step(1, 5.0) == 120
        assert assimilation_step(0, 7.0) == 43

    def test_neighbouring_seconds_split_across_bins(self, chain3):
        obs = loop_observations([loop(299.0, 1, density=0.02), loop(301.0, 1, density=0.03)], chain3)
        batches = bin_measurements(obs)
        assert sorted(batches) == [0, 1]
        assert sorted(schedule_batches(batches, chain3.dt)) == [60, 120]

    def test_loop_density_from_flow_and_speed(self, chain3):
        (obs,) = loop_observations([loop(0.0, 2, flow=0.5, speed=25.0)], chain3)
        assert obs.value == pytest.approx(0.02)

    def test_entry_and_unhealthy_records_are_skipped(self, chain3):
        records = [
            loop(0.0, chain3.source_id, flow=0.4),
            loop(0.0, 1, density=0.02, healthy=False),
            loop(0.0, 0, density=0.01),
        ]
        obs = loop_observations(records, chain3)
        assert [o.link for o in obs] == [0]
        assert len(loop_observations(records, chain3, include_unhealthy=True)) == 2

    def test_mainline_flow_without_speed(self, chain3):
        with pytest.raises(SchemaError):
            loop_observations([loop(0.0, 1, flow=0.4)], chain3)

    def test_every_matched_record_is_binned_once(self, chain3):
        loops = [loop(float(t), link, density=0.02) for t in range(0, 1500, 60) for link in (0, 2)]
        probes = [probe(x=100.0 + i, y=0.0, t=float(17 * i), device=f"d{i}") for i in range(40)]
        probes += [probe(x=900.0, y=0.0, t=5.0)]
        matched, stats = match_probes(probes, boxes())
        density = bin_measurements(loop_observations(loops, chain3))
        velocity = bin_measurements(probe_observations(matched))
        merged = merge_batches(density, velocity)
        assert count_measurements(merged) == len(loops) + stats.matched
        assert count_measurements(merged, [MeasurementKind.VELOCITY]) == 40
        first = merged[0].measurements
        kinds = [m.kind for m in first]
        assert kinds == sorted(kinds, key=lambda k: k != MeasurementKind.DENSITY)


class TestBoundary:
    def test_constant_flow_holds(self, chain3):
        src = chain3.source_id
        records = [loop(float(t), src, flow=0.4) for t in range(0, 900, 60)]
        demand = boundary_series(records, chain3, horizon=900.0)
        for step in (0, 59, 60, 179):
            assert demand(step)[src] == pytest.approx(0.4)
        assert demand(0)[chain3.mainline_ids].sum() == 0.0

    def test_change_shows_up_one_bin_later(self, chain3):
        src = chain3.source_id
        records = [loop(float(t), src, flow=0.2 if t < 300 else 0.5) for t in range(0, 900, 60)]
        demand = boundary_series(records, chain3, horizon=900.0)
        assert demand.at_time(310.0)[src] == pytest.approx(0.2)
        assert demand.at_time(610.0)[src] == pytest.approx(0.5)

    def test_warmup_covers_the_first_bin(self, chain3):
        src = chain3.source_id
        records = [loop(float(t), src, flow=0.4) for t in range(0, 600, 60)]
        demand = boundary_series(records, chain3, horizon=900.0, warmup={src: 0.1})
        assert demand.at_time(0.0)[src] == pytest.approx(0.1)
        assert demand.at_time(350.0)[src] == pytest.approx(0.4)

    def test_unhealthy_reports_are_ignored(self, chain3):
        src = chain3.source_id
        records = [loop(0.0, src, flow=0.4), loop(10.0, src, flow=9.0, healthy=False)]
        demand = boundary_series(records, chain3, horizon=300.0)
        assert demand(0)[src] == pytest.approx(0.4)

    def test_gap_raises_coverage_error(self, chain3):
        src = chain3.source_id
        records = [loop(float(t), src, flow=0.4) for t in range(0, 300, 60)]
        with pytest.raises(CoverageError) as exc:
            boundary_series(records, chain3, horizon=900.0)
        assert exc.value.uncovered == [(src, 300.0, 600.0)]

    def test_piecewise_profile(self, ramp_corridor):
        onramp = [i for i in ramp_corridor.entry_ids if i != ramp_corridor.source_id][0]
        demand = PiecewiseDemand(ramp_corridor, {ramp_corridor.source_id: [(0, 0.3), (600, 0.5)], onramp: [(100, 0.1)]}, scale=2.0)
        np.testing.assert_allclose(demand.at_time(0.0)[[ramp_corridor.source_id, onramp]], [0.6, 0.0])
        np.testing.assert_allclose(demand.at_time(650.0)[[ramp_corridor.source_id, onramp]], [1.0, 0.2])

    def test_profile_on_mainline_rejected(self, ramp_corridor):
        with pytest.raises(ValueError):
            PiecewiseDemand(ramp_corridor, {0: [(0, 0.3)]})
