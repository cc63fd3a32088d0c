import pytest
import json
import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..', 'backend', 'evolution'))
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from dpo_engine import (
    DpoSystem,
    FreshNames,
    Match,
    Rule,
    apply_rule,
    as_evolution_system,
    check_rule_amalgamation,
    find_matches,
    is_valid_match,
    load_rules,
    rewrite_graph,
    rewrite_to_dot,
    run_rules,
    star_origin,
    star_rule,
    system_from_params,
)
from evolution_core import Verdict
from evolution_errors import ConfigError, InvalidMatch
from graph_structures import Graph, canonical_key
from fixtures.rewrite_graphs import (
    A_1,
    A_2,
    DELETE_EDGE_RULE,
    DROP_SOURCE_RULE,
    GROW_RULE,
    HOST,
    HOST_REWRITTEN,
    MULTI_HOST,
    PATH_2,
    REDIRECT_RULE,
    SEVEN_VERTEX,
    STAR_RULE,
    THETA,
    TRIANGLE_RULE,
)


def _match(rule, *image):
    return Match(rule.name, tuple(zip(rule.L.vertices, image)))


class TestRule:
    def test_from_json_defaults_to_shared_names(self):
        rule = Rule.from_json(STAR_RULE)
        assert rule == star_rule()
        assert rule.kl == {1: 1, 2: 2, 3: 3}

    def test_what_the_star_rule_changes(self):
        rule = star_rule()
        assert rule.deleted_edges == [(1, 2)]
        assert rule.deleted_vertices == []
        assert rule.added_vertices == [4]

    def test_drop_source_deletes_a_vertex(self):
        assert Rule.from_json(DROP_SOURCE_RULE).deleted_vertices == [1]

    def test_to_json_round_trip(self):
        rule = Rule.from_json(REDIRECT_RULE)
        assert Rule.from_json(rule.to_json()) == rule

    def test_rejects_non_injective_matching(self):
        with pytest.raises(ConfigError):
            Rule.from_json({**STAR_RULE, "injective": False})

    def test_rejects_missing_graphs(self):
        data = {key: value for key, value in STAR_RULE.items() if key != "R"}
        with pytest.raises(ConfigError) as excinfo:
            Rule.from_json(data)
        assert excinfo.value.details["missing"] == ["R"]

    @pytest.mark.parametrize("kl", [
        {"1": 1, "2": 2},
        {"1": 1, "2": 2, "3": 9},
        {"1": 1, "2": 1, "3": 3},
        {"1": 2, "2": 1, "3": 3},
    ], ids=["partial", "outside-L", "not-injective", "drops-K-edge"])
    def test_rejects_bad_interface(self, kl):
        with pytest.raises(ConfigError):
            Rule.from_json({**STAR_RULE, "kL": kl})


class TestFreshNames:
    def test_smallest_unused(self):
        assert FreshNames().allocate([1, 2, 3], 2) == [4, 5]
        assert FreshNames().allocate([2, 3], 1) == [1]

    def test_retired_names_stay_unused(self):
        names = FreshNames().retiring([4])
        assert names.allocate([1, 2, 3], 2) == [5, 6]
        assert FreshNames(floor=10).allocate([], 1) == [10]


class TestMatching:
    def setup_method(self):
        self.rule = star_rule()

    def test_theta_has_two_matches(self):
        matches = find_matches(self.rule, Graph.from_json(THETA))
        assert [m.describe() for m in matches] == ["star@1,2,3", "star@1,3,2"]

    def test_rewritten_graph_offers_two_sites(self):
        matches = find_matches(self.rule, Graph.from_json(A_2))
        assert {m.m[1] for m in matches} == {1, 3}

    def test_dangling_condition(self):
        rule = Rule.from_json(DROP_SOURCE_RULE)
        graph = Graph.from_json(PATH_2)
        assert [m.image() for m in find_matches(rule, graph)] == [(1, 2)]
        assert not is_valid_match(rule, graph, {1: 2, 2: 3})

    def test_mode_mismatch_has_no_matches(self):
        undirected = Graph.make([1, 2, 3], [(1, 2), (1, 3)], directed=False)
        assert find_matches(self.rule, undirected) == []


class TestRewrite:
    def setup_method(self):
        self.rule = star_rule()

    def test_single_application(self):
        result, names = rewrite_graph(self.rule, Graph.from_json(HOST), _match(self.rule, 2, 3, 4))
        assert result == Graph.from_json(HOST_REWRITTEN)
        assert names[4] == 5

    def test_second_step_of_the_star_evolution(self):
        result, _ = rewrite_graph(self.rule, Graph.from_json(A_1), _match(self.rule, 1, 4, 3))
        assert result == Graph.from_json(A_2)

    def test_two_further_steps_up_to_isomorphism(self):
        graph = Graph.from_json(HOST_REWRITTEN)
        graph, _ = rewrite_graph(self.rule, graph, _match(self.rule, 2, 5, 4))
        graph, _ = rewrite_graph(self.rule, graph, _match(self.rule, 3, 5, 4))
        assert graph.order == 7
        assert canonical_key(graph) == canonical_key(Graph.from_json(SEVEN_VERTEX))

    def test_vertex_deletion(self):
        rule = Rule.from_json(DROP_SOURCE_RULE)
        result, _ = rewrite_graph(rule, Graph.from_json(PATH_2), _match(rule, 1, 2))
        assert result == Graph.make([2, 3], [(2, 3)])

    def test_invalid_match(self):
        rule = Rule.from_json(DROP_SOURCE_RULE)
        with pytest.raises(InvalidMatch):
            rewrite_graph(rule, Graph.from_json(PATH_2), _match(rule, 2, 3))

    def test_apply_rule_traces_preserved_vertices(self):
        system = as_evolution_system([self.rule], star_origin())
        result, arrow = apply_rule(self.rule, star_origin(), _match(self.rule, 1, 2, 3), system=system)
        assert arrow.map_data == ((1, 1), (2, 2), (3, 3))
        assert arrow.label == "star@1,2,3"
        assert result.order == 4
        assert system.is_transition(arrow)

    def test_rewrite_to_dot(self):
        match = _match(self.rule, 2, 3, 4)
        graph = Graph.from_json(HOST)
        result, _ = rewrite_graph(self.rule, graph, match)
        dot = rewrite_to_dot(self.rule, graph, match, result)
        assert dot.startswith("digraph rewrite {")
        assert 'G_2 [label="2", shape=box];' in dot
        assert 'H_5 [label="5", shape=ellipse];' in dot


class TestDpoSystem:
    def test_needs_rules(self):
        with pytest.raises(ConfigError):
            DpoSystem([], star_origin())

    def test_needs_matching_modes(self):
        with pytest.raises(ConfigError):
            DpoSystem([star_rule()], Graph.make([1, 2], [(1, 2)], directed=False))

    def test_theta_has_one_transition_type(self):
        system = as_evolution_system([star_rule()], Graph.from_json(THETA))
        types = [a for a in system.transition_types(system.origin(), 16) if not a.is_iso]
        assert len(system.matches(system.origin())) == 2
        assert len(types) == 1

    def test_run_rules(self):
        system = as_evolution_system([star_rule()], star_origin())
        evo = run_rules(system, 3)
        assert evo.length == 3
        assert [stage.payload.order for stage in evo.stages] == [3, 4, 5, 6]
        assert evo.audit[0]["rule"] == "star"

    def test_run_rules_stops_at_normal_form(self):
        system = as_evolution_system([Rule.from_json(DROP_SOURCE_RULE)], Graph.from_json(PATH_2))
        evo = run_rules(system, 5)
        assert evo.length == 2
        assert evo.current.payload == Graph.make([3])

    def test_system_from_params_defaults(self):
        system = system_from_params({})
        assert system.origin().payload == star_origin()
        assert [rule.name for rule in system.rules] == ["star"]

    def test_system_from_params_with_rules(self):
        system = system_from_params({"rules": [REDIRECT_RULE, TRIANGLE_RULE], "origin": MULTI_HOST})
        assert [rule.name for rule in system.rules] == ["redirect", "triangle"]
        assert system.describe()["origin"] == Graph.from_json(MULTI_HOST).to_json()

    def test_load_rules_from_directory(self, tmp_path):
        (tmp_path / "b.json").write_text(json.dumps(GROW_RULE))
        (tmp_path / "a.json").write_text(json.dumps(DELETE_EDGE_RULE))
        assert [rule.name for rule in load_rules(str(tmp_path))] == ["delete", "grow"]

    def test_load_rules_empty_directory(self, tmp_path):
        with pytest.raises(ConfigError):
            load_rules(str(tmp_path))


class TestRuleAmalgamation:
    def test_compatible_rules_amalgamate(self):
        system = system_from_params({"rules": [REDIRECT_RULE, TRIANGLE_RULE], "origin": MULTI_HOST})
        result = check_rule_amalgamation(system, [system.origin()], budget=32)
        assert result.verdict is Verdict.TRUE
        assert result.details["rules"] == ["redirect", "triangle"]

    def test_destructive_rules_do_not(self):
        system = system_from_params({"rules": [DELETE_EDGE_RULE, GROW_RULE], "origin": PATH_2})
        result = check_rule_amalgamation(system, [system.origin()], budget=32)
        assert result.verdict is Verdict.FALSE
