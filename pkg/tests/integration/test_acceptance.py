"""
End-to-end scenarios: worked examples, seeded sweeps against oracles and
CLI round trips through the launcher
"""
import itertools
import os
import random
import sys

import networkx as nx
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..', 'backend', 'evolution'))

from .test_config import test_config
from .test_helpers import chain_oracle, cli_helper, random_dims
from ..fixtures.rewrite_graphs import A_1, A_2, CHAIN_COSTS, HOST, HOST_REWRITTEN, SEVEN_VERTEX

from amalgamation import amalgamate_paths
from dpo_engine import Match, find_matches, rewrite_graph, star_rule
from evolution_core import Verdict, enumerate_paths
from evolution_game import RandomStrategy, TopStrategy, genericity_verdict, odd_bookkeeping_strategy, play
from generic_builder import (
    Policy,
    back_and_forth,
    build_generic,
    check_absorption,
    check_path_absorption,
    cofinal_embed,
    homogeneity_witness,
)
from graph_structures import Graph, canonical_key
from rewrite_checks import (
    explore,
    find_normalized,
    is_confluent,
    is_locally_confluent,
    is_regular,
    is_terminating,
    min_cost_normalization,
    verify_newman,
    verify_newman_random,
)
from system_instances import GraphSystem, LinOrderSystem, MatrixChainSystem, SetCounterexampleSystem, build_system


def _top_insertions(system, length):
    evo = build_generic(system, 0, 8)
    for _ in range(length):
        top = next(
            a for a in system.transitions(evo.current, 64)
            if not a.is_iso and LinOrderSystem.new_position(a) == len(a.cod.payload) - 1
        )
        evo = evo.extended([top])
    return evo


@pytest.fixture(scope="module")
def linorder_runs():
    system = LinOrderSystem()
    return system, build_generic(system, 60, 64, Policy.FIFO), build_generic(system, 30, 64, Policy.ROUND_ROBIN)


class TestCounterexample:
    def test_reproduced_end_to_end(self):
        system = SetCounterexampleSystem()
        frag = explore(system, 3, 8)
        assert is_locally_confluent(system, frag, 4, 8).verdict is Verdict.TRUE
        assert is_terminating(system, frag, 4).verdict is Verdict.TRUE
        assert is_regular(system, frag, 8).verdict is Verdict.FALSE
        confluent = is_confluent(system, frag, 2, 4, 8)
        assert confluent.verdict is Verdict.FALSE
        assert set(confluent.witness["pair"]) == {"t", "s∘h"}
        assert len(find_normalized(system, frag, 8)) == 2


class TestStarRule:
    def test_first_application(self):
        rule = star_rule()
        match = Match(rule.name, ((1, 2), (2, 3), (3, 4)))
        result, _ = rewrite_graph(rule, Graph.from_json(HOST), match)
        assert canonical_key(result) == canonical_key(Graph.from_json(HOST_REWRITTEN))

    def test_second_application_reaches_seven_vertices(self):
        rule = star_rule()
        graph = Graph.from_json(HOST_REWRITTEN)
        for image in ((2, 5, 4), (3, 5, 4)):
            graph, _ = rewrite_graph(rule, graph, Match(rule.name, tuple(zip(rule.L.vertices, image))))
        assert canonical_key(graph) == canonical_key(Graph.from_json(SEVEN_VERTEX))

    def test_star_evolution_prefix(self):
        rule = star_rule()
        graph = Graph.from_json(A_1)
        match = next(m for m in find_matches(rule, graph) if m.image() == (1, 4, 3))
        result, _ = rewrite_graph(rule, graph, match)
        assert result == Graph.from_json(A_2)


class TestNewmanSweep:
    def test_seeded_random_systems(self):
        tally = verify_newman_random(test_config.seed, test_config.newman_count)
        assert tally["systems"] == test_config.newman_count
        assert tally["violations"] == []
        assert tally["hypotheses_hold"] > 0

    def test_matrix_chain_passes(self):
        system = MatrixChainSystem((10, 30, 5, 60))
        result = verify_newman(system, explore(system, 3, 8), 3, 8)
        assert result.details["confirmed"]


class TestGenericConstruction:
    @pytest.mark.parametrize("name,params,steps,k,budget", test_config.builder_runs)
    def test_builder_passes_absorption(self, name, params, steps, k, budget):
        system = build_system(name, params)
        evo = build_generic(system, steps, budget)
        assert evo.length >= steps
        assert check_absorption(system, evo, k, evo.length, budget).verdict is Verdict.TRUE

    def test_linorder_path_absorption(self, linorder_runs):
        system, evo, _ = linorder_runs
        assert check_path_absorption(system, evo, 2, 2, evo.length, 64).verdict is Verdict.TRUE

    def test_graph_path_absorption(self):
        system = GraphSystem(directed=False)
        evo = build_generic(system, 60, 16)
        assert check_path_absorption(system, evo, 1, 2, evo.length, 16).verdict is Verdict.TRUE

    def test_linorder_density(self, linorder_runs):
        system, evo, _ = linorder_runs
        images = dict(evo.composed(6, 40).composite(system).map_data)
        positions = sorted(images[point] for point in evo.stages[6].payload)
        assert all(b - a >= 2 for a, b in zip(positions, positions[1:]))


class TestBackAndForth:
    def test_linorder_schedules_agree(self, linorder_runs):
        system, fifo, rr = linorder_runs
        zigzag = back_and_forth(system, fifo, rr, 4, 64)
        assert zigzag.rounds == 4

    def test_graph_schedules_agree(self):
        system = GraphSystem(directed=False)
        fifo = build_generic(system, 20, 16, Policy.FIFO)
        rr = build_generic(system, 20, 16, Policy.ROUND_ROBIN)
        assert back_and_forth(system, fifo, rr, 4, 16).rounds == 4

    def test_cofinal_top_insertions(self, linorder_runs):
        system, evo, _ = linorder_runs
        ladder = cofinal_embed(system, _top_insertions(system, 5), evo, 5, 64)
        assert len(ladder.rungs) == 6
        assert ladder.u_index == sorted(ladder.u_index)

    def test_homogeneity_from_a_point(self, linorder_runs):
        system, evo, _ = linorder_runs
        i, j = evo.composed(1, 2), evo.composed(1, 3)
        zigzag = homogeneity_witness(system, evo, i, j, 4, 64)
        assert zigzag.rounds == 4


class TestGame:
    @pytest.mark.parametrize("seed", test_config.game_seeds)
    def test_bookkeeping_against_random_eve(self, seed):
        system = LinOrderSystem()
        result = play(system, RandomStrategy(seed), odd_bookkeeping_strategy(), 30, 16)
        assert result.forfeit is None
        assert genericity_verdict(system, result.evolution, 2, 30, 16).verdict is Verdict.TRUE

    def test_bookkeeping_against_adversarial_eve(self):
        system = LinOrderSystem()
        result = play(system, TopStrategy(), odd_bookkeeping_strategy(), 30, 32)
        assert genericity_verdict(system, result.evolution, 2, 30, 32).verdict is Verdict.TRUE

    def test_roles_swapped(self):
        system = LinOrderSystem()
        result = play(system, odd_bookkeeping_strategy(), RandomStrategy(5), 30, 16)
        assert genericity_verdict(system, result.evolution, 2, 30, 16).verdict is Verdict.TRUE

    def test_bookkeeping_fails_on_the_counterexample(self):
        system = SetCounterexampleSystem()
        result = play(system, TopStrategy(), odd_bookkeeping_strategy(), 6, 8)
        assert result.forfeit["player"] == "odd"
        assert result.forfeit["cause"]["error"] == "AmalgamationFailed"
        square = result.forfeit["cause"]["details"]["square"]
        assert square["cell"] is not None
        assert set(square["cell"]) == {"f", "g"}


class TestCostModel:
    @pytest.mark.parametrize("dims,cost", CHAIN_COSTS)
    def test_known_chains(self, dims, cost):
        system = MatrixChainSystem(dims)
        assert min_cost_normalization(system, explore(system, len(dims), 16), 16)[0] == cost

    def test_random_chains_match_oracle(self):
        rng = random.Random(test_config.seed)
        for _ in range(test_config.mincost_samples):
            dims = random_dims(rng)
            system = MatrixChainSystem(dims)
            cost, _ = min_cost_normalization(system, explore(system, len(dims), 16), 16)
            assert cost == chain_oracle(dims), dims


class TestCoreSoundness:
    @pytest.mark.parametrize("order,directed", [(4, True), (5, False)])
    def test_canonical_keys_against_exhaustive_search(self, order, directed):
        pairs = list(itertools.permutations(range(order), 2)) if directed else list(itertools.combinations(range(order), 2))
        classes = {}
        for bits in range(2 ** len(pairs)):
            edges = [pair for n, pair in enumerate(pairs) if bits >> n & 1]
            graph = Graph.make(range(order), edges, directed)
            classes.setdefault(canonical_key(graph), []).append(graph)
        representatives = [members[0].to_networkx() for members in classes.values()]
        for members in classes.values():
            first = members[0].to_networkx()
            assert all(nx.is_isomorphic(first, other.to_networkx()) for other in members[1:])
        for a, b in itertools.combinations(representatives, 2):
            assert not nx.is_isomorphic(a, b)

    def test_amalgamated_paths_reverify(self):
        system = GraphSystem()
        rng = random.Random(test_config.seed)
        frag = explore(system, 2, 32)
        paths = {obj.canon: enumerate_paths(system, obj, 3, 8) for obj in frag.objects[:4]}
        for _ in range(500):
            obj_paths = paths[rng.choice(list(paths))]
            f, g = rng.choice(obj_paths), rng.choice(obj_paths)
            witness = amalgamate_paths(system, f, g, 32)
            assert witness.verify(system, f, g)
            assert witness.within_bounds(f, g)


class TestCliRoundTrips:
    def test_check_confluence_exit_code(self):
        code, report = cli_helper.report("check", "confluence", "--system", "counterexample", "--max-size", 3, "--depth", 4)
        assert code == 1
        assert set(report["witness"]["pair"]) == {"t", "s∘h"}

    def test_build_audit_zigzag(self, tmp_path):
        fifo, rr = tmp_path / "fifo.json", tmp_path / "rr.json"
        assert cli_helper.run("build", "--system", "linorder", "--steps", 12, "--out", fifo)[0] == 0
        assert cli_helper.run("build", "--system", "linorder", "--steps", 12, "--policy", "rr", "--out", rr)[0] == 0
        code, report = cli_helper.report("audit", "absorption", "--evo", fifo, "--upto", 2)
        assert code == 0
        assert report["details"]["checked"] == 6
        code, _ = cli_helper.report("audit", "zigzag", "--evo", fifo, "--other", rr, "--rounds", 3)
        assert code == 0

    def test_mincost(self):
        code, report = cli_helper.report("mincost", "--dims", "10,30,5,60")
        assert code == 0
        assert report["details"]["cost"] == 4500

    def test_dot_output(self):
        code, out, _ = cli_helper.run("build", "--system", "poset", "--steps", 4, "--format", "dot")
        assert code == 0
        assert out.startswith("digraph")

    def test_usage_error(self):
        code, _, _ = cli_helper.run("check", "tap", "--system", "tensor")
        assert code == 3
