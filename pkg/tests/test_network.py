"""Corridor construction: fundamental diagram, topology and CFL checks."""
import numpy as np
import pytest

from conftest import chain_network, chain_spec, write_csv
from core.errors import CFLError, ParameterError, SchemaError, TopologyError
from core.network.corridor_spec import CorridorSpec, FundamentalDiagramSpec, LinkKind, LinkSpec
from core.network.fundamental_diagram import FundamentalDiagram, critical_density
from core.network.network_class import NodeKind, build_network
from tools.ingest.parse_corridor import load_network


class TestFundamentalDiagram:
    def test_critical_density_by_hand(self):
        fd = FundamentalDiagram(v_f=30.0, w=6.0, rho_j=0.12)
        assert critical_density(fd) == pytest.approx(0.02)
        assert fd.q_max == pytest.approx(0.6)

    def test_symmetric_diagram_peaks_at_half_jam(self):
        fd = FundamentalDiagram(v_f=20.0, w=20.0, rho_j=0.2)
        assert fd.rho_c == pytest.approx(0.1)

    def test_flow_is_triangular(self):
        fd = FundamentalDiagram(v_f=30.0, w=6.0, rho_j=0.12)
        np.testing.assert_allclose(fd.flow([0.0, 0.01, 0.02, 0.07, 0.12]), [0.0, 0.3, 0.6, 0.3, 0.0], atol=1e-12)

    def test_branches_meet_at_capacity(self):
        fd = FundamentalDiagram(v_f=25.0, w=7.0, rho_j=0.15)
        assert fd.v_f * fd.rho_c == pytest.approx(fd.w * (fd.rho_j - fd.rho_c))

    @pytest.mark.parametrize("field", ["v_f", "w", "rho_j"])
    def test_non_positive_parameters_rejected(self, field):
        params = {"v_f": 30.0, "w": 6.0, "rho_j": 0.12, field: 0.0}
        with pytest.raises(ParameterError):
            FundamentalDiagram(**params)


class TestBuildNetwork:
    def test_minimal_chain(self):
        net = chain_network(n_main=3)
        assert [node.kind for node in net.internal_nodes()] == [NodeKind.SIMPLE, NodeKind.SIMPLE]
        assert net.n_nodes == 4
        np.testing.assert_array_equal(net.mainline_ids, [0, 1, 2])
        assert net.link(net.source_id).kind == LinkKind.SOURCE
        assert net.link(net.sink_id).kind == LinkKind.SINK

    def test_cfl_violation(self):
        with pytest.raises(CFLError) as exc:
            build_network(chain_spec(n_main=3, dt=10.0))
        assert exc.value.link_id == 0

    def test_full_corridor_ramp_counts(self):
        onramps = list(range(2, 2 + 23 * 5, 5))
        offramps = [(a + 2, 0.05) for a in range(2, 2 + 21 * 5, 5)]
        net = chain_network(n_main=127, onramps=onramps, offramps=offramps)
        assert len(net.nodes_of_kind(NodeKind.MERGE)) == 23
        assert len(net.nodes_of_kind(NodeKind.DIVERGE)) == 21
        assert len(net.mainline_ids) == 127

    def test_ramps_attach_at_expected_nodes(self, ramp_corridor):
        merge = ramp_corridor.nodes_of_kind(NodeKind.MERGE)[0]
        diverge = ramp_corridor.nodes_of_kind(NodeKind.DIVERGE)[0]
        assert merge.main_downstream == 2
        assert diverge.main_upstream == 4
        assert diverge.beta == pytest.approx(0.1)

    def test_deterministic(self):
        spec = chain_spec(n_main=6, onramps=(2,), offramps=((4, 0.1),))
        assert build_network(spec) == build_network(spec)

    def test_non_contiguous_ids(self):
        rows = [
            LinkSpec(id=0, kind=LinkKind.MAINLINE, length_m=200, v_f=30, w=6, rho_j=0.12),
            LinkSpec(id=2, kind=LinkKind.MAINLINE, length_m=200, v_f=30, w=6, rho_j=0.12),
        ]
        with pytest.raises(TopologyError):
            build_network(CorridorSpec(links=rows, dt=5.0))

    def test_duplicate_ids(self):
        rows = [LinkSpec(id=0, kind=LinkKind.MAINLINE, length_m=200, v_f=30, w=6, rho_j=0.12)] * 2
        with pytest.raises(TopologyError):
            build_network(CorridorSpec(links=rows, dt=5.0))

    def test_dangling_ramp(self):
        spec = chain_spec(n_main=3)
        spec.links.append(LinkSpec(id=3, kind=LinkKind.ONRAMP, length_m=200, v_f=30, w=6, rho_j=0.12, attach_to=9))
        with pytest.raises(TopologyError):
            build_network(spec)

    def test_two_ramps_on_one_node(self):
        with pytest.raises(TopologyError):
            build_network(chain_spec(n_main=4, onramps=(2,), offramps=((1, 0.1),)))

    def test_split_ratio_out_of_range(self):
        with pytest.raises(ParameterError):
            build_network(chain_spec(n_main=4, offramps=((1, 1.5),)))

    def test_partial_fd_rejected(self):
        rows = [LinkSpec(id=0, kind=LinkKind.MAINLINE, length_m=200, v_f=30)]
        with pytest.raises(ParameterError):
            build_network(CorridorSpec(links=rows, dt=5.0))

    def test_default_fd_fills_blank_rows(self):
        rows = [LinkSpec(id=i, kind=LinkKind.MAINLINE, length_m=200) for i in range(2)]
        net = build_network(CorridorSpec(links=rows, dt=5.0, default_fd=FundamentalDiagramSpec(v_f=30, w=6, rho_j=0.36)))
        np.testing.assert_allclose(net.rho_c[net.mainline_ids], [0.06, 0.06])


class TestCorridorFile:
    def test_reference_corridor(self, reference_network):
        net = reference_network
        assert len(net.mainline_ids) == 40
        assert len(net.nodes_of_kind(NodeKind.MERGE)) == 4
        assert len(net.nodes_of_kind(NodeKind.DIVERGE)) == 3
        assert net.rho_j[31] == pytest.approx(0.24)
        assert net.rho_c[31] < net.rho_c[10]

    def test_missing_column_reports_line_one(self, tmp_path):
        path = write_csv(tmp_path / "corridor.csv", "id,length_m", ["0,200"])
        with pytest.raises(SchemaError) as exc:
            load_network(path, dt=5.0)
        assert exc.value.line == 1

    def test_bad_value_reports_its_line(self, tmp_path):
        path = write_csv(
            tmp_path / "corridor.csv",
            "id,kind,length_m,v_f,w,rho_j,attach_to,beta",
            ["0,mainline,200,30,6,0.12,,", "1,motorway,200,30,6,0.12,,"],
        )
        with pytest.raises(SchemaError) as exc:
            load_network(path, dt=5.0)
        assert exc.value.line == 3
