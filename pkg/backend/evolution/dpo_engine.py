"""
Double-pushout graph rewriting.

A rule <L, K, R> deletes m(L - K), keeps the context graph
D = (G - m(L)) + m(K) and glues in R - K under fresh vertex names. Matches are
injective and must satisfy the dangling condition. A set of rules over an
origin graph is an evolution system whose nontrivial transitions are the rule
applications; arrows carry the partial vertex trace of preserved vertices.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import graph_structures as gs
from amalgamation import check_tap
from evolution_core import (
    Arrow,
    ArrowKind,
    CarrierMapsMixin,
    CheckResult,
    EqualityMode,
    Evolution,
    EvolutionSystem,
    Obj,
)
from evolution_errors import ConfigError, InvalidMatch
from graph_structures import Graph
from run_config import sanitize_log_input
from serialization import load_json

logger = logging.getLogger(__name__)


def _edge(graph, u, v):
    return (u, v) if graph.directed else (min(u, v), max(u, v))


def _parse_map(data, name) -> Tuple[Tuple[int, int], ...]:
    if not isinstance(data, dict):
        raise ConfigError(f"Rule field {name} must be an object", field=name)
    try:
        return tuple(sorted((int(k), int(v)) for k, v in data.items()))
    except (TypeError, ValueError):
        raise ConfigError(f"Rule field {name} must map vertices to vertices", field=name)


@dataclass(frozen=True)
class Rule:
    """A rewriting rule; k_in_l and k_in_r are injective graph morphisms out of K"""

    name: str
    L: Graph
    K: Graph
    R: Graph
    k_in_l: Tuple[Tuple[int, int], ...]
    k_in_r: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        for label, target, pairs in (("kL", self.L, self.k_in_l), ("kR", self.R, self.k_in_r)):
            mapping = dict(pairs)
            if set(mapping) != set(self.K.vertices):
                raise ConfigError(f"Rule {self.name}: {label} must be defined on every vertex of K", rule=self.name)
            if len(set(mapping.values())) != len(mapping) or not set(mapping.values()) <= set(target.vertices):
                raise ConfigError(f"Rule {self.name}: {label} is not injective into its target", rule=self.name)
            if not all(target.has_edge(mapping[u], mapping[v]) for u, v in self.K.edges):
                raise ConfigError(f"Rule {self.name}: {label} does not carry K's edges", rule=self.name)
        if not self.L.directed == self.K.directed == self.R.directed:
            raise ConfigError(f"Rule {self.name}: L, K and R must share a mode", rule=self.name)

    @classmethod
    def identity_embedded(cls, name, L, K, R):
        """Rule whose interface K sits inside L and R under the same vertex names"""
        same = tuple((v, v) for v in K.vertices)
        return cls(name, L, K, R, same, same)

    @property
    def kl(self) -> Dict[int, int]:
        return dict(self.k_in_l)

    @property
    def kr(self) -> Dict[int, int]:
        return dict(self.k_in_r)

    @property
    def deleted_vertices(self):
        kept = set(self.kl.values())
        return [x for x in self.L.vertices if x not in kept]

    @property
    def deleted_edges(self):
        kl = self.kl
        kept = {_edge(self.L, kl[u], kl[v]) for u, v in self.K.edges}
        return [e for e in self.L.edges if e not in kept]

    @property
    def added_vertices(self):
        kept = set(self.kr.values())
        return [y for y in self.R.vertices if y not in kept]

    def to_json(self):
        return {
            "name": self.name,
            "L": self.L.to_json(),
            "K": self.K.to_json(),
            "R": self.R.to_json(),
            "kL": {str(k): v for k, v in self.k_in_l},
            "kR": {str(k): v for k, v in self.k_in_r},
        }

    @classmethod
    def from_json(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("Rule JSON must be an object")
        if data.get("injective", True) is not True:
            raise ConfigError("Only injective matching is supported", rule=str(data.get("name", ""))[:40])
        missing = [key for key in ("L", "K", "R") if key not in data]
        if missing:
            raise ConfigError(f"Rule JSON is missing {', '.join(missing)}", missing=missing)
        K = Graph.from_json(data["K"])
        same = {str(v): v for v in K.vertices}
        return cls(
            str(data.get("name", "rule")),
            Graph.from_json(data["L"]),
            K,
            Graph.from_json(data["R"]),
            _parse_map(data.get("kL", same), "kL"),
            _parse_map(data.get("kR", same), "kR"),
        )


@dataclass(frozen=True)
class Match:
    """An injective edge-preserving vertex map L -> G"""

    rule: str
    mapping: Tuple[Tuple[int, int], ...]

    @property
    def m(self) -> Dict[int, int]:
        return dict(self.mapping)

    def image(self):
        return tuple(y for _, y in self.mapping)

    def describe(self):
        return f"{self.rule}@{','.join(map(str, self.image()))}"


@dataclass(frozen=True)
class FreshNames:
    """Fresh vertex allocator: smallest positive name neither in use nor retired"""

    floor: int = 1
    retired: frozenset = field(default_factory=frozenset)

    def allocate(self, used: Iterable[int], count) -> List[int]:
        taken = set(used) | self.retired
        names = []
        candidate = self.floor
        while len(names) < count:
            if candidate not in taken:
                names.append(candidate)
            candidate += 1
        return names

    def retiring(self, names: Iterable[int]) -> "FreshNames":
        return FreshNames(self.floor, self.retired | frozenset(names))


def _dangling_ok(rule: Rule, graph: Graph, m: Mapping[int, int]) -> bool:
    """No edge outside m(L) touches a vertex that the rule deletes"""
    doomed = {m[x] for x in rule.deleted_vertices}
    if not doomed:
        return True
    matched = {_edge(graph, m[u], m[v]) for u, v in rule.L.edges}
    return all(e in matched for e in graph.edges if e[0] in doomed or e[1] in doomed)


def is_valid_match(rule: Rule, graph: Graph, m: Mapping[int, int]) -> bool:
    if set(m) != set(rule.L.vertices) or len(set(m.values())) != len(m):
        return False
    if not set(m.values()) <= set(graph.vertices):
        return False
    if not all(graph.has_edge(m[u], m[v]) for u, v in rule.L.edges):
        return False
    return _dangling_ok(rule, graph, m)


def find_matches(rule: Rule, graph: Graph) -> List[Match]:
    """Valid matches ordered by the image of L's sorted vertices"""
    if rule.L.directed != graph.directed:
        return []
    found = set()
    for m in gs.iter_monomorphisms(rule.L, graph):
        if _dangling_ok(rule, graph, m):
            found.add(tuple(m[x] for x in rule.L.vertices))
    return [Match(rule.name, tuple(zip(rule.L.vertices, image))) for image in sorted(found)]


def rewrite_graph(rule: Rule, graph: Graph, match: Match, names: Optional[FreshNames] = None):
    """The rewritten graph and the name map R -> H; raises InvalidMatch on a bad match"""
    names = names or FreshNames()
    m = match.m
    if not is_valid_match(rule, graph, m):
        raise InvalidMatch(f"Match {match.describe()} is not valid for rule {rule.name}", rule=rule.name)

    doomed_vertices = {m[x] for x in rule.deleted_vertices}
    doomed_edges = {_edge(graph, m[u], m[v]) for u, v in rule.deleted_edges}
    context_vertices = [v for v in graph.vertices if v not in doomed_vertices]
    context_edges = [e for e in graph.edges if e not in doomed_edges]

    kl, kr = rule.kl, rule.kr
    into_h = {kr[k]: m[kl[k]] for k in rule.K.vertices}
    fresh = names.allocate(graph.vertices, len(rule.added_vertices))
    into_h.update(zip(rule.added_vertices, fresh))
    glued = [(into_h[u], into_h[v]) for u, v in rule.R.edges]

    result = Graph.make(context_vertices + fresh, context_edges + glued, graph.directed)
    if set(result.vertices) != set(context_vertices) | set(fresh):
        raise InvalidMatch(f"Rule {rule.name} left a dangling edge", rule=rule.name)
    for u, v in rule.K.edges:
        if not result.has_edge(m[kl[u]], m[kl[v]]):
            raise InvalidMatch(f"Rule {rule.name} lost an edge of its interface", rule=rule.name)
    return result, into_h


def apply_rule(rule: Rule, graph: Graph, match: Match, names: Optional[FreshNames] = None, system=None):
    """Apply a rule at a match; returns (H, arrow) where the arrow traces preserved vertices"""
    result, _ = rewrite_graph(rule, graph, match, names)
    make = system.make if system is not None else _make_obj
    dom, cod = make(graph), make(result)
    kept = set(result.vertices)
    preserved = tuple((v, v) for v in graph.vertices if v in kept)
    arrow = Arrow(dom, cod, preserved, ArrowKind.TRANSITION, match.describe())
    logger.debug(f"Applied {sanitize_log_input(match.describe())}: {graph.order} -> {result.order} vertices")
    return result, arrow


def _make_obj(graph):
    return Obj(graph, gs.canonical_key(graph))


class DpoSystem(CarrierMapsMixin, EvolutionSystem):
    """Graphs rewritten by a fixed rule set from a fixed origin"""

    name = "dpo"

    def __init__(self, rules: List[Rule], origin_graph: Graph, node_cap=200000):
        super().__init__(node_cap)
        if not rules:
            raise ConfigError("A DPO system needs at least one rule")
        if any(rule.L.directed != origin_graph.directed for rule in rules):
            raise ConfigError("Rules and origin must share a graph mode")
        self.rules = list(rules)
        self.origin_graph = origin_graph

    def origin(self):
        return self.make(self.origin_graph)

    def canonical_key(self, payload):
        return gs.canonical_key(payload, node_cap=self.node_cap)

    def carrier(self, obj):
        return obj.payload.vertices

    def is_iso_map(self, source, target, mapping):
        return gs.is_isomorphism(source.payload, target.payload, mapping)

    def iter_iso_maps(self, source, target, pinned=None):
        return gs.iter_isomorphisms(source.payload, target.payload, pinned)

    def matches(self, obj) -> List[Match]:
        return [match for rule in self.rules for match in find_matches(rule, obj.payload)]

    def _rule(self, name) -> Rule:
        return next(rule for rule in self.rules if rule.name == name)

    def _candidate_transitions(self, obj):
        for match in self.matches(obj):
            _, arrow = apply_rule(self._rule(match.rule), obj.payload, match, system=self)
            yield arrow

    def is_transition(self, f):
        mapping = dict(f.map_data)
        if len(mapping) == f.dom.payload.order == f.cod.payload.order and self.is_iso_map(f.dom, f.cod, mapping):
            return True
        return any(
            candidate.cod.canon == f.cod.canon and self.closing_iso(candidate, f) is not None
            for candidate in self._candidate_transitions(f.dom)
        )

    def encode_payload(self, payload):
        return payload.to_json()

    def decode_payload(self, data):
        return Graph.from_json(data, self.origin_graph.mode)

    def encode_map(self, map_data):
        return [list(pair) for pair in map_data]

    def decode_map(self, data):
        return tuple(sorted((int(x), int(y)) for x, y in data))

    def describe(self):
        return {
            "system": self.name,
            "rules": [rule.to_json() for rule in self.rules],
            "origin": self.origin_graph.to_json(),
        }


def as_evolution_system(rules, origin: Graph, node_cap=200000) -> DpoSystem:
    return DpoSystem(list(rules), origin, node_cap)


def check_rule_amalgamation(system: DpoSystem, frag, depth=1, budget=16) -> CheckResult:
    """
    TAP over the given fragment (a Fragment or a list of objects) with
    equality up to relabelling; explores `depth` steps from the origin when
    no fragment is given.
    """
    if frag is None:
        from rewrite_checks import explore

        frag = explore(system, depth, budget)
    frontier = frag.objects if hasattr(frag, "objects") else list(frag)
    result = check_tap(system, frontier, budget, EqualityMode.RELAXED)
    result.details["rules"] = [rule.name for rule in system.rules]
    return result


def run_rules(system: DpoSystem, steps, names: Optional[FreshNames] = None) -> Evolution:
    """
    Apply rules in rotation, each at its first match, for up to `steps` steps.
    Deleted vertex names are retired so a trace never reuses a name.
    """
    names = names or FreshNames()
    evo = Evolution.start(system.origin())
    rule_index = 0
    for step in range(steps):
        graph = evo.current.payload
        applied = None
        for offset in range(len(system.rules)):
            rule = system.rules[(rule_index + offset) % len(system.rules)]
            matches = find_matches(rule, graph)
            if matches:
                applied = rule, matches[0]
                rule_index = (rule_index + offset + 1) % len(system.rules)
                break
        if applied is None:
            logger.info(f"No rule matches after {step} steps; the current graph is normalized")
            break
        rule, match = applied
        result, arrow = apply_rule(rule, graph, match, names, system)
        names = names.retiring(v for v in graph.vertices if v not in set(result.vertices))
        evo = evo.extended([arrow], {"step": step, "rule": rule.name, "match": [list(p) for p in match.mapping]})
    return evo


def load_rule(path) -> Rule:
    return Rule.from_json(load_json(path))


def load_rules(path) -> List[Rule]:
    """A single rule file or every *.json file of a directory, in name order"""
    if os.path.isdir(path):
        files = sorted(f for f in os.listdir(path) if f.endswith(".json"))
        if not files:
            raise ConfigError(f"No rule files in {sanitize_log_input(path)}", path=str(path))
        return [load_rule(os.path.join(path, f)) for f in files]
    return [load_rule(path)]


def system_from_params(params, node_cap=200000) -> DpoSystem:
    """Build a DpoSystem from {"rules": [rule JSON] | path, "origin": graph JSON}"""
    rules = params.get("rules")
    if isinstance(rules, str):
        rules = load_rules(rules)
    elif isinstance(rules, list):
        rules = [Rule.from_json(rule) for rule in rules]
    else:
        rules = [star_rule()]
    origin = params.get("origin")
    origin_graph = Graph.from_json(origin) if origin else star_origin()
    return DpoSystem(rules, origin_graph, node_cap)


def star_rule() -> Rule:
    """{x1->x2, x1->x3} => {x1->x3, x1->a, x2->a, x3->a}, with vertices 1, 2, 3 and a = 4"""
    L = Graph.make((1, 2, 3), [(1, 2), (1, 3)])
    K = Graph.make((1, 2, 3), [(1, 3)])
    R = Graph.make((1, 2, 3, 4), [(1, 3), (1, 4), (2, 4), (3, 4)])
    return Rule.identity_embedded("star", L, K, R)


def star_origin() -> Graph:
    return Graph.make((1, 2, 3), [(1, 2), (1, 3)])


def rewrite_to_dot(rule: Rule, graph: Graph, match: Match, result: Graph) -> str:
    """G and H side by side; matched vertices are boxed in G"""
    image = set(match.image())
    lines = ["digraph rewrite {", f'  label="{match.describe()}";']
    for name, g in (("G", graph), ("H", result)):
        lines.append(f"  subgraph cluster_{name} {{")
        lines.append(f'    label="{name}";')
        for v in g.vertices:
            shape = "box" if name == "G" and v in image else "ellipse"
            lines.append(f'    {name}_{v} [label="{v}", shape={shape}];')
        for u, v in g.edges:
            extra = "" if graph.directed else " [dir=none]"
            lines.append(f"    {name}_{u} -> {name}_{v}{extra};")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
