import numpy as np
import pytest

from _helpers import random_partition_set, random_relu_net
from nts.network import FeedForwardNetwork, Layer
from nts.partition import MePartitionConfig, PartitionSet
from nts.reach import HyperRectangle
from nts.traces import Trace, TraceSet, simulate
from nts.transition import (
    SelfLoopConfig,
    TransitionSystem,
    build_abstraction,
    compute_transitions,
    export_dot,
    guaranteed_transitions,
    load_transition_system,
    reduce_self_loops,
    save_transition_system,
    transition_system_from_dict,
    transition_system_to_dict,
)


def affine_net(w, b):
    w = np.atleast_2d(np.asarray(w, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return FeedForwardNetwork([Layer(w, b, "identity")])


def two_cell_parts(lo=0.0, mid=1.0, hi=2.0):
    zone = HyperRectangle([lo], [hi])
    return PartitionSet(
        [HyperRectangle([lo], [mid]), HyperRectangle([mid], [hi])], zone
    )


class TestComputeTransitions:
    def test_shift_map_hand_matrix(self):
        # image of [0,1] is [0.5,1.5]; image of [1,2] is [1.5,2.5]
        parts = two_cell_parts()
        matrix = compute_transitions(affine_net(1.0, 0.5), parts)
        assert matrix.tolist() == [[True, True], [False, True]]

    def test_identity_keeps_diagonal_and_touching(self):
        parts = two_cell_parts()
        matrix = compute_transitions(affine_net(1.0, 0.0), parts)
        # each cell maps onto itself; the shared face makes neighbors touch
        assert np.all(matrix.diagonal())
        assert matrix[0, 1] and matrix[1, 0]

    def test_constant_map_hits_boundary_cells(self):
        # image is the single point 0, on the closed boundary of both cells
        zone = HyperRectangle([-1.0], [1.0])
        parts = PartitionSet(
            [HyperRectangle([-1.0], [0.0]), HyperRectangle([0.0], [1.0])], zone
        )
        matrix = compute_transitions(affine_net(0.0, 0.0), parts)
        assert matrix.tolist() == [[True, True], [True, True]]

    def test_dimension_mismatch(self):
        parts = two_cell_parts()
        net = affine_net([[1.0, 0.0]], [0.0])
        with pytest.raises(ValueError, match="input"):
            compute_transitions(net, parts)

    def test_every_row_total(self):
        rng = np.random.default_rng(3)
        parts = random_partition_set(HyperRectangle([0.0, 0.0], [1.0, 1.0]), rng, splits=5)
        net = affine_net(np.eye(2) * 0.5, [0.1, 0.1])
        matrix = compute_transitions(net, parts)
        assert matrix.shape == (len(parts), len(parts))


class TestGuaranteed:
    def test_inflated_image_inside_cell(self):
        # image of [0,1] is [0.2,0.4]; inflating by 0.05 stays inside [0,1]
        zone = HyperRectangle([0.0], [1.0])
        parts = PartitionSet([HyperRectangle([0.0], [1.0])], zone)
        g = guaranteed_transitions(affine_net(0.2, 0.2), parts, epsilon=0.05)
        assert g.tolist() == [[True]]

    def test_zero_epsilon_is_containment(self):
        parts = two_cell_parts()
        # image of [0,1] is [0.25,0.5] inside cell 1; image of [1,2] is [0.5,0.75]
        net = affine_net(0.25, 0.25)
        g = guaranteed_transitions(net, parts, epsilon=0.0)
        assert g.tolist() == [[True, False], [True, False]]

    def test_inflation_crossing_face_not_guaranteed(self):
        zone = HyperRectangle([0.0], [1.0])
        parts = PartitionSet([HyperRectangle([0.0], [1.0])], zone)
        # image of [0,1] is [0.9,0.95]; +0.1 pushes past the face
        net = affine_net(0.05, 0.9)
        e = compute_transitions(net, parts)
        g = guaranteed_transitions(net, parts, epsilon=0.1)
        assert e.tolist() == [[True]]
        assert g.tolist() == [[False]]

    def test_guaranteed_subset_of_transitions(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            zone = HyperRectangle([-1.0, -1.0], [1.0, 1.0])
            parts = random_partition_set(zone, rng, splits=4)
            net = random_relu_net(rng, max_width=6, in_dim=2, out_dim=2)
            e = compute_transitions(net, parts)
            g = guaranteed_transitions(net, parts, epsilon=float(rng.random() * 0.1))
            assert not np.any(g & ~e)

    def test_monotone_in_epsilon(self):
        rng = np.random.default_rng(13)
        zone = HyperRectangle([-1.0, -1.0], [1.0, 1.0])
        parts = random_partition_set(zone, rng, splits=4)
        net = affine_net(np.eye(2) * 0.3, [0.05, -0.05])
        g_small = guaranteed_transitions(net, parts, epsilon=0.01)
        g_big = guaranteed_transitions(net, parts, epsilon=0.2)
        assert not np.any(g_big & ~g_small)

    def test_negative_epsilon_rejected(self):
        parts = two_cell_parts()
        with pytest.raises(ValueError, match="nonnegative"):
            guaranteed_transitions(affine_net(1.0, 0.0), parts, epsilon=-0.1)


def make_ts(parts, transitions, guaranteed=None):
    return TransitionSystem(parts, transitions, guaranteed)


class TestReduceSelfLoops:
    def test_long_dwell_keeps_loop(self):
        parts = two_cell_parts()
        ts = make_ts(parts, [[1, 1], [0, 1]])
        dwellers = TraceSet([Trace(np.full((150, 1), 0.5))])
        out = reduce_self_loops(ts, dwellers, SelfLoopConfig(dwell_threshold=100))
        assert out.transitions[0, 0]

    def test_short_dwell_removes_loop(self):
        parts = two_cell_parts()
        ts = make_ts(parts, [[1, 1], [0, 1]])
        brief = TraceSet([Trace(np.array([[0.5]] * 5 + [[1.5]] * 5))])
        out = reduce_self_loops(ts, brief, SelfLoopConfig(dwell_threshold=100))
        assert not out.transitions[0, 0]

    def test_absent_loop_stays_absent(self):
        parts = two_cell_parts()
        ts = make_ts(parts, [[0, 1], [0, 1]])
        dwellers = TraceSet([Trace(np.full((150, 1), 0.5))])
        out = reduce_self_loops(ts, dwellers, SelfLoopConfig(dwell_threshold=10))
        assert not out.transitions[0, 0]

    def test_off_diagonal_untouched(self):
        rng = np.random.default_rng(17)
        parts = random_partition_set(HyperRectangle([0.0], [1.0]), rng, splits=3)
        n = len(parts)
        matrix = rng.random((n, n)) < 0.5
        np.fill_diagonal(matrix, True)
        ts = make_ts(parts, matrix)
        traces = TraceSet([Trace(rng.uniform(0, 1, size=(20, 1)))])
        out = reduce_self_loops(ts, traces, SelfLoopConfig(dwell_threshold=3))
        off = ~np.eye(n, dtype=bool)
        assert np.array_equal(out.transitions & off, ts.transitions & off)

    def test_guaranteed_loop_survives_reduction(self):
        # the cell maps into itself, which no dwell statistic can refute
        zone = HyperRectangle([0.0], [1.0])
        parts = PartitionSet([HyperRectangle([0.0], [1.0])], zone)
        net = affine_net(0.2, 0.2)
        e = compute_transitions(net, parts)
        g = guaranteed_transitions(net, parts, epsilon=0.0)
        ts = TransitionSystem(parts, e, g)
        nobody_home = TraceSet([Trace(np.array([[0.5], [0.6]]))])
        out = reduce_self_loops(ts, nobody_home, SelfLoopConfig(dwell_threshold=100))
        assert out.transitions[0, 0]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SelfLoopConfig(dwell_threshold=0)


class TestTransitionSystem:
    def test_guaranteed_must_be_subset(self):
        parts = two_cell_parts()
        with pytest.raises(ValueError, match="subset"):
            TransitionSystem(parts, [[0, 1], [0, 1]], [[1, 0], [0, 0]])

    def test_matrix_shape_checked(self):
        parts = two_cell_parts()
        with pytest.raises(ValueError, match="2x2"):
            TransitionSystem(parts, [[1]])

    def test_json_round_trip(self, tmp_path):
        parts = two_cell_parts()
        net = affine_net(1.0, 0.5)
        e = compute_transitions(net, parts)
        g = guaranteed_transitions(net, parts, epsilon=0.0)
        ts = TransitionSystem(parts, e, g, metadata={"entropy": 0.04, "out_rows": []})
        path = tmp_path / "ts.json"
        save_transition_system(ts, path)
        loaded = load_transition_system(path)
        assert np.array_equal(loaded.transitions, ts.transitions)
        assert np.array_equal(loaded.guaranteed, ts.guaranteed)
        assert loaded.partition_set.ids == parts.ids
        assert loaded.metadata["entropy"] == 0.04

    def test_dict_round_trip_preserves_input_set(self):
        parts = two_cell_parts()
        input_set = HyperRectangle([-0.1], [0.1])
        net = affine_net([[1.0, 1.0]], [0.0])
        e = compute_transitions(net, parts, input_set)
        ts = TransitionSystem(parts, e, input_set=input_set)
        doc = transition_system_to_dict(ts)
        again = transition_system_from_dict(doc)
        assert again.input_set == input_set


class TestBuildAbstraction:
    def test_contraction_keeps_center_loop(self):
        rng = np.random.default_rng(23)
        net = affine_net(0.5, 0.0)
        starts = rng.uniform(-1, 1, size=(10, 1))
        traces = simulate(net, starts, horizon=60)
        zone = HyperRectangle([-1.0], [1.0])
        ts = build_abstraction(
            net,
            traces,
            zone,
            MePartitionConfig(entropy_threshold=0.2, min_length=0.2),
            None,
            SelfLoopConfig(dwell_threshold=5),
            epsilon=0.0,
        )
        center = ts.partition_set.locate([0.0])
        i = ts.partition_set.index_of(center)
        assert ts.transitions[i, i]

    def test_metadata_records_thresholds(self):
        net = affine_net(0.5, 0.0)
        traces = simulate(net, [[0.5], [-0.5]], horizon=30)
        zone = HyperRectangle([-1.0], [1.0])
        ts = build_abstraction(
            net,
            traces,
            zone,
            MePartitionConfig(entropy_threshold=0.3, min_length=0.4),
            None,
            SelfLoopConfig(dwell_threshold=7),
            epsilon=0.02,
        )
        md = ts.metadata
        assert md["entropy"] == 0.3
        assert md["l_min"] == 0.4
        assert md["dwell_n"] == 7
        assert md["epsilon"] == 0.02
        assert isinstance(md["out_rows"], list)

    def test_single_partition_degenerate(self):
        net = affine_net(0.5, 0.0)
        traces = simulate(net, [[0.4]], horizon=10)
        zone = HyperRectangle([-1.0], [1.0])
        ts = build_abstraction(
            net,
            traces,
            zone,
            MePartitionConfig(entropy_threshold=0.99, min_length=0.5),
            None,
            SelfLoopConfig(dwell_threshold=1),
            epsilon=0.0,
        )
        assert ts.n >= 1
        assert ts.transitions.shape == (ts.n, ts.n)

    def test_sample_completeness_randomized(self):
        rng = np.random.default_rng(29)
        for _ in range(8):
            net = random_relu_net(rng, max_layers=2, max_width=5, in_dim=2, out_dim=2)
            starts = rng.uniform(-0.5, 0.5, size=(5, 2))
            traces = simulate(net, starts, horizon=8)
            states = traces.all_states()
            zone = HyperRectangle(states.min(axis=0), states.max(axis=0))
            if np.any(zone.widths <= 0):
                continue
            parts = random_partition_set(zone, rng, splits=4)
            matrix = compute_transitions(net, parts)
            for trace in traces:
                for a, b in zip(trace.states, trace.states[1:]):
                    pa, pb = parts.locate(a), parts.locate(b)
                    if pa is None or pb is None:
                        continue
                    assert matrix[parts.index_of(pa), parts.index_of(pb)]


class TestExportDot:
    def test_two_partition_edges(self):
        parts = two_cell_parts()
        ts = make_ts(parts, [[1, 1], [0, 0]])
        dot = export_dot(ts)
        assert "digraph" in dot
        assert "P1;" in dot and "P2;" in dot
        assert "P1 -> P1;" in dot and "P1 -> P2;" in dot
        assert "P2 ->" not in dot

    def test_empty_matrix_nodes_only(self):
        parts = two_cell_parts()
        ts = make_ts(parts, np.zeros((2, 2), dtype=bool))
        dot = export_dot(ts)
        assert "P1;" in dot and "P2;" in dot
        assert "->" not in dot

    def test_guaranteed_edge_styled(self):
        parts = two_cell_parts()
        ts = make_ts(parts, [[1, 1], [0, 1]], [[1, 0], [0, 0]])
        dot = export_dot(ts)
        assert "P1 -> P1 [color=red, style=bold];" in dot
        assert "P1 -> P2;" in dot

    def test_deterministic(self):
        parts = two_cell_parts()
        ts = make_ts(parts, [[1, 1], [1, 1]])
        assert export_dot(ts) == export_dot(ts)
