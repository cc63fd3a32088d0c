import pytest
import itertools
import sys
import os

from hypothesis import given, settings, strategies as st

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..', 'backend', 'evolution'))

import graph_structures as gs
from evolution_errors import BudgetExceeded, ConfigError
from graph_structures import Graph


def _random_graph(draw_edges, n, directed=True):
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    if not directed:
        pairs = [(u, v) for u, v in pairs if u < v]
    return Graph.make(range(n), [p for p, keep in zip(pairs, draw_edges) if keep], directed)


@st.composite
def graphs_with_permutation(draw, max_order=7, directed=True):
    n = draw(st.integers(min_value=0, max_value=max_order))
    bits = draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    graph = _random_graph(bits, n, directed)
    perm = draw(st.permutations(list(range(n))))
    return graph, graph.relabel(dict(zip(range(n), perm)))


class TestGraph:
    def test_make_normalizes_vertices_and_edges(self):
        graph = Graph.make([3], [(2, 1), (1, 2)])
        assert graph.vertices == (1, 2, 3)
        assert graph.edges == ((1, 2), (2, 1))

    def test_undirected_edges_stored_once(self):
        graph = Graph.make([], [(2, 1), (1, 2)], directed=False)
        assert graph.edges == ((1, 2),)
        assert graph.has_edge(2, 1)

    def test_loops_rejected(self):
        with pytest.raises(ConfigError):
            Graph.make([1], [(1, 1)])

    def test_neighbors(self):
        graph = Graph.make([], [(1, 2), (3, 2)])
        assert graph.out_neighbors[1] == {2}
        assert graph.in_neighbors[2] == {1, 3}
        assert graph.out_neighbors[2] == frozenset()

    def test_fresh_vertex(self):
        graph = Graph.make([0, 1, 3])
        assert graph.fresh_vertex() == 2
        assert graph.fresh_vertex(floor=3) == 4

    def test_with_vertex_rejects_existing_name(self):
        graph = Graph.make([0])
        with pytest.raises(ConfigError):
            graph.with_vertex(0)

    def test_with_vertex_adds_both_directions(self):
        graph = Graph.make([0, 1]).with_vertex(2, out_nbrs=[0], in_nbrs=[1])
        assert graph.edges == ((1, 2), (2, 0))

    def test_induced(self):
        graph = Graph.make([], [(1, 2), (2, 3), (3, 1)])
        assert graph.induced([1, 2]).edges == ((1, 2),)

    def test_json_round_trip_keeps_mode(self):
        graph = Graph.make([], [(1, 2)], directed=False)
        assert Graph.from_json(graph.to_json()) == graph

    def test_from_json_rejects_bad_mode(self):
        with pytest.raises(ConfigError):
            Graph.from_json({"mode": "mixed", "vertices": []})

    def test_from_json_rejects_bad_edges(self):
        with pytest.raises(ConfigError):
            Graph.from_json({"edges": [[1, 2, 3]]})

    def test_to_dot(self):
        dot = Graph.make([], [(1, 2)]).to_dot("H")
        assert dot.startswith("digraph H {")
        assert "1 -> 2;" in dot


class TestCanonicalKeys:
    def test_empty_graph_key(self):
        assert gs.canonical_key(Graph()) == gs.EMPTY_GRAPH_KEY

    def test_orientation_matters(self):
        path = Graph.make([], [(0, 1), (1, 2)])
        fork = Graph.make([], [(1, 0), (1, 2)])
        assert gs.canonical_key(path) != gs.canonical_key(fork)

    def test_marks_separate_otherwise_equal_graphs(self):
        edge = Graph.make([], [(0, 1)])
        assert gs.canonical_key(edge, marks={0: 1}) != gs.canonical_key(edge, marks={1: 1})

    def test_canonical_form_is_idempotent(self):
        graph = Graph.make([], [(5, 7), (7, 9), (9, 5), (5, 8)])
        form = gs.canonical_form(graph)
        assert form.vertices == (0, 1, 2, 3)
        assert gs.canonical_form(form) == form

    def test_search_labeling_on_large_regular_graph(self):
        # a 10-cycle defeats color refinement, so the individualization search runs
        cycle = Graph.make([], [(i, (i + 1) % 10) for i in range(10)])
        rotated = cycle.relabel({i: (i + 3) % 10 for i in range(10)})
        two_cycles = Graph.make([], [(i, (i + 1) % 5) for i in range(5)] + [(5 + i, 5 + (i + 1) % 5) for i in range(5)])
        assert gs.canonical_key(cycle) == gs.canonical_key(rotated)
        assert gs.canonical_key(cycle) != gs.canonical_key(two_cycles)

    def test_labeling_budget(self):
        cycle = Graph.make([], [(i, (i + 1) % 12) for i in range(12)])
        with pytest.raises(BudgetExceeded):
            gs.canonical_key(cycle, node_cap=1)

    @settings(max_examples=60, deadline=None)
    @given(graphs_with_permutation())
    def test_key_invariant_under_relabelling(self, pair):
        graph, relabelled = pair
        assert gs.canonical_key(graph) == gs.canonical_key(relabelled)

    @settings(max_examples=40, deadline=None)
    @given(graphs_with_permutation(max_order=5, directed=False))
    def test_undirected_key_invariant_under_relabelling(self, pair):
        graph, relabelled = pair
        assert gs.canonical_key(graph) == gs.canonical_key(relabelled)

    def test_key_agrees_with_brute_force_on_four_vertices(self):
        pairs = [(u, v) for u in range(4) for v in range(4) if u != v]
        graphs = [
            Graph.make(range(4), [p for p, keep in zip(pairs, bits) if keep])
            for bits in itertools.islice(itertools.product([False, True], repeat=len(pairs)), 0, 4096, 157)
        ]
        graphs += [g.relabel({0: 2, 1: 0, 2: 3, 3: 1}) for g in graphs]
        for g, h in itertools.combinations(graphs, 2):
            brute = any(gs.is_isomorphism(g, h, dict(zip(range(4), perm))) for perm in itertools.permutations(range(4)))
            assert (gs.canonical_key(g) == gs.canonical_key(h)) == brute


class TestMatching:
    def test_isomorphisms_respect_pins(self):
        edge = Graph.make([], [(0, 1)])
        other = Graph.make([], [(5, 6)])
        assert list(gs.iter_isomorphisms(edge, other)) == [{0: 5, 1: 6}]
        assert list(gs.iter_isomorphisms(edge, other, pinned={0: 6})) == []

    def test_empty_graph_isomorphism(self):
        assert list(gs.iter_isomorphisms(Graph(), Graph())) == [{}]

    def test_embeddings_are_induced(self):
        path = Graph.make([], [(0, 1), (1, 2)])
        triangle = Graph.make([], [(0, 1), (1, 2), (0, 2)])
        assert list(gs.iter_embeddings(path, triangle)) == []
        assert len(list(gs.iter_monomorphisms(path, triangle))) == 1

    def test_is_induced_embedding(self):
        small = Graph.make([], [(0, 1)])
        big = Graph.make([], [(0, 1), (1, 2)])
        assert gs.is_induced_embedding(small, big, {0: 1, 1: 2})
        assert not gs.is_induced_embedding(small, big, {0: 2, 1: 1})

    def test_is_isomorphism_rejects_partial_map(self):
        edge = Graph.make([], [(0, 1)])
        assert not gs.is_isomorphism(edge, edge, {0: 0})
