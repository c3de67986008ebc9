import gzip
from collections import deque

import numpy as np
import pytest
import scipy.sparse as sp

from generators import random_digraph
from walkrank import (
    BipartiteGraph,
    DanglingNodeError,
    DirectedGraph,
    DomainError,
    ParseError,
    ScoreVector,
    TransitionMatrix,
    add_ground_node,
    build_heat_operator,
    build_transition,
    dump_edge_list,
    load_bipartite,
    load_directed_graph,
    parse_bipartite,
    parse_directed_graph,
)


class TestEdgeListParsing:
    def test_default_weight(self):
        g = parse_directed_graph("a\tb\nb\ta")
        assert g.node_count == 2
        assert g.edge_count == 2
        assert sorted(g.edges) == [(0, 1, 1.0), (1, 0, 1.0)]

    def test_explicit_weight(self):
        g = parse_directed_graph("a\tb\t2.5")
        assert g.edges == [(0, 1, 2.5)]

    def test_negative_weight_is_domain_error(self):
        with pytest.raises(DomainError, match="line 1"):
            parse_directed_graph("a\tb\t-1")

    @pytest.mark.parametrize("text", ["a\tb\tx", "a\tb\tnan", "a", "a\tb\t1\t2", "\tb"])
    def test_malformed_lines(self, text):
        with pytest.raises(ParseError):
            parse_directed_graph(text)

    def test_error_reports_line_number(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_directed_graph("a\tb\n# comment\nc\td\tbad\n")

    def test_duplicates_merge_by_summing(self):
        g = parse_directed_graph("a\tb\t1\na\tb\t2\n")
        assert g.edges == [(0, 1, 3.0)]

    def test_zero_weight_dropped_nodes_kept(self):
        g = parse_directed_graph("a\tb\t0\nb\tc\n")
        assert g.labels == ("a", "b", "c")
        assert g.edges == [(1, 2, 1.0)]

    def test_whitespace_and_comments(self):
        g = parse_directed_graph("# header\n\n a \t b \r\n")
        assert g.labels == ("a", "b")

    def test_undirected_mirrors(self):
        g = parse_directed_graph("a\tb\t2\nb\tb\n", undirected=True)
        assert sorted(g.edges) == [(0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]
        assert g.is_symmetric

    def test_gzip_file(self, tmp_path):
        path = tmp_path / "g.tsv.gz"
        with gzip.open(path, "wt") as fh:
            fh.write("x\ty\t4\n")
        assert load_directed_graph(path).edges == [(0, 1, 4.0)]

    def test_round_trip_exact(self, rng):
        for _ in range(20):
            g = random_digraph(rng, int(rng.integers(1, 15)), 0.3)
            h = parse_directed_graph(dump_edge_list(g))
            assert h.labels == g.labels
            assert (h.weights != g.weights).nnz == 0

    def test_round_trip_keeps_isolated_nodes(self):
        g = DirectedGraph.from_edges([(2, 0, 0.1 + 0.2)], labels=("p", "q", "r"))
        h = parse_directed_graph(dump_edge_list(g))
        assert h.labels == ("p", "q", "r")
        assert h.edges == [(2, 0, 0.1 + 0.2)]


class TestBipartiteParsing:
    def test_degree(self):
        b = parse_bipartite("u1\ti1\nu1\ti2")
        assert b.user_degree.tolist() == [2]

    def test_rating(self):
        b = parse_bipartite("u1\ti1\t4.0")
        assert b.rating_matrix[0, 0] == 4.0

    def test_timestamp(self):
        b = parse_bipartite("u1\ti1\t4.0\t100")
        assert b.timestamps[0] == 100

    def test_duplicate_pair_last_wins_with_warning(self):
        with pytest.warns(UserWarning, match="duplicate"):
            b = parse_bipartite("u\ti\t1\nu\ti\t5\n")
        assert b.entries == [(0, 0, 5.0, None)]

    def test_bad_rating(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_bipartite("u\ti\t1\nu\tj\tgood\n")

    def test_mean_rating_and_collected(self):
        b = parse_bipartite("u\ti\t1\nu\tj\t3\nv\tj\n")
        assert b.user_mean_rating[0] == 2.0
        assert np.isnan(b.user_mean_rating[1])
        assert b.collected(0).tolist() == [0, 1]
        assert b.item_degree.tolist() == [1, 2]

    def test_constructor_rejects_duplicates(self):
        with pytest.raises(DomainError):
            BipartiteGraph(("u",), ("i",), np.array([0, 0]), np.array([0, 0]))

    def test_load_file(self, tmp_path):
        path = tmp_path / "r.tsv"
        path.write_text("a\tx\t2\n")
        assert load_bipartite(path).user_labels == ("a",)


class TestTransition:
    def test_uniform_dangling_rows(self):
        P = build_transition(DirectedGraph.from_edges([(0, 1)], node_count=2), "uniform")
        np.testing.assert_array_equal(P.toarray(), [[0, 1], [0.5, 0.5]])

    def test_weighted_normalization(self):
        g = DirectedGraph.from_edges([(0, 1, 2.0), (0, 2, 6.0)], node_count=3)
        np.testing.assert_allclose(build_transition(g, "self-loop").toarray()[0], [0, 0.25, 0.75])

    def test_error_policy(self):
        with pytest.raises(DanglingNodeError) as info:
            build_transition(DirectedGraph.from_edges([(0, 1)], node_count=2), "error")
        assert info.value.nodes == [1]

    def test_self_loop_policy(self):
        P = build_transition(DirectedGraph.from_edges([(0, 1)], node_count=2), "self-loop")
        np.testing.assert_array_equal(P.toarray(), [[0, 1], [0, 1]])

    def test_rows_sum_to_one(self, rng):
        for policy in ("uniform", "self-loop"):
            for _ in range(30):
                g = random_digraph(rng, int(rng.integers(1, 40)), rng.uniform(0, 0.4))
                P = build_transition(g, policy)
                assert np.abs(P.toarray().sum(axis=1) - 1).max() <= 1e-12
                assert P.toarray().min() >= 0

    def test_implicit_rows_match_explicit(self, rng):
        g = random_digraph(rng, 12, 0.1)
        P = build_transition(g)
        h = rng.random(12)
        np.testing.assert_allclose(P.rmatvec(h), P.toarray().T @ h, atol=1e-14)
        np.testing.assert_allclose(P.matvec(h), P.toarray() @ h, atol=1e-14)

    def test_rejects_non_stochastic(self):
        with pytest.raises(DomainError):
            TransitionMatrix(sp.csr_matrix(np.array([[0.5, 0.4], [0, 1.0]])), "self-loop")


class TestHeatOperator:
    def test_star_center_averages(self):
        g = DirectedGraph.undirected([(0, 1), (0, 2), (0, 3)])
        x = np.array([0.0, 0.2, 0.5, 0.8])
        op = build_heat_operator(g)
        assert op.step(x)[0] == pytest.approx((0.2 + 0.5 + 0.8) / 3, abs=1e-15)

    def test_regular_graph_equals_walk_operator(self):
        ring = DirectedGraph.undirected([(i, (i + 1) % 6) for i in range(6)])
        op = build_heat_operator(ring)
        np.testing.assert_allclose(op.matrix.toarray(), build_transition(ring).toarray())

    def test_path_center(self):
        g = DirectedGraph.undirected([(0, 1), (1, 2)])
        # O = A diag(1/k): the center's new value is (x0 + x2) / 2
        assert build_heat_operator(g).step(np.array([0.3, 9.0, 0.7]))[1] == pytest.approx(0.5)

    def test_warns_on_zero_in_strength(self):
        with pytest.warns(UserWarning, match="zero in-strength"):
            build_heat_operator(DirectedGraph.from_edges([(0, 1)], node_count=2))


def _reachable_from(w, s):
    seen = {s}
    queue = deque([s])
    while queue:
        v = queue.popleft()
        for u in w.indices[w.indptr[v]:w.indptr[v + 1]]:
            if u not in seen:
                seen.add(int(u))
                queue.append(int(u))
    return seen


class TestGroundNode:
    def test_single_node(self):
        g = add_ground_node(DirectedGraph.from_edges([], node_count=1))
        assert sorted(g.edges) == [(0, 1, 1.0), (1, 0, 1.0)]

    def test_empty_graph_of_three(self):
        assert add_ground_node(DirectedGraph.from_edges([], node_count=3)).edge_count == 6

    def test_ninety_nine_out_links(self):
        g = DirectedGraph.from_edges([(0, j) for j in range(1, 100)], node_count=100)
        P = build_transition(add_ground_node(g), "error")
        assert P.toarray()[0, 100] == pytest.approx(1 / 100)

    def test_irreducible(self, rng):
        for _ in range(10):
            g = add_ground_node(random_digraph(rng, 15, 0.05))
            for s in range(g.node_count):
                assert len(_reachable_from(g.weights, s)) == g.node_count

    def test_label_collision(self):
        g = DirectedGraph.from_edges([], labels=("ground",))
        assert add_ground_node(g).labels == ("ground", "_ground")


class TestScoreVector:
    def test_declared_normalization_enforced(self):
        with pytest.raises(DomainError):
            ScoreVector(np.array([0.2, 0.2]), "sum-one")

    def test_rejects_nan(self):
        with pytest.raises(DomainError):
            ScoreVector(np.array([np.nan, 1.0]))

    def test_ranking_ties_by_id(self):
        s = ScoreVector(np.array([1.0, 3.0, 1.0, 3.0]))
        assert s.ranking().tolist() == [1, 3, 0, 2]

    @pytest.mark.parametrize("kind,stat", [("sum-one", np.sum), ("mean-one", np.mean),
                                           ("max-one", np.max)])
    def test_normalized(self, kind, stat):
        s = ScoreVector.normalized(np.array([1.0, 2.0, 5.0]), kind)
        assert stat(s.values) == pytest.approx(1.0, abs=1e-12)

    def test_zero_vector_cannot_normalize(self):
        with pytest.raises(DomainError):
            ScoreVector.normalized(np.zeros(3), "mean-one")

    def test_immutable(self):
        s = ScoreVector(np.array([1.0]))
        with pytest.raises(ValueError):
            s.values[0] = 2.0


class TestDirectedGraph:
    def test_label_lookup(self):
        g = parse_directed_graph("a\tb\n")
        assert g.id_of("b") == 1
        with pytest.raises(DomainError):
            g.id_of("zz")

    def test_degrees(self):
        g = DirectedGraph.from_edges([(0, 1, 2.0), (0, 2, 1.0), (2, 1, 1.0)], node_count=3)
        assert g.out_degree.tolist() == [2, 0, 1]
        assert g.in_degree.tolist() == [0, 2, 1]
        assert g.out_strength.tolist() == [3.0, 0.0, 1.0]
        assert g.in_strength.tolist() == [0.0, 3.0, 1.0]

    def test_duplicate_labels_rejected(self):
        with pytest.raises(DomainError):
            DirectedGraph(("a", "a"), sp.csr_matrix((2, 2)))

    def test_out_of_range_edge(self):
        with pytest.raises(DomainError):
            DirectedGraph.from_edges([(0, 5)], node_count=2)
