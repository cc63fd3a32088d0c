"""
Rewriting-style checkers over an explored fragment: confluence and local
confluence, regularity, determination, termination, normalized objects,
directedness, the Newman-style implications between them, and least-cost
normalization.

Quantified properties are tri-state. A fragment cut off by a budget can only
make a universal claim unknown, never true.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import networkx as nx

from evolution_core import CheckResult, EqualityMode, Obj, Path, Verdict, compose, path_moves, reachable_keys
from evolution_errors import BudgetExceeded, NoNormalizedObject
from serialization import encode_arrow, encode_obj, encode_path

logger = logging.getLogger(__name__)


@dataclass
class Fragment:
    """Objects reachable within max_size nontrivial moves, one per canonical key"""

    objects: List[Obj] = field(default_factory=list)
    edges: List[Tuple[bytes, bytes, Path]] = field(default_factory=list)
    max_size: int = 0
    truncated: bool = False
    closed: bool = True

    @property
    def keys(self):
        return [obj.canon for obj in self.objects]

    def obj(self, key) -> Obj:
        return next(o for o in self.objects if o.canon == key)

    def graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.keys)
        for source, target, move in self.edges:
            cost = move.cost
            if not graph.has_edge(source, target) or graph[source][target]["cost"] > cost:
                graph.add_edge(source, target, cost=cost, move=move)
        return graph

    def summary(self):
        return {
            "objects": len(self.objects),
            "edges": len(self.edges),
            "max_size": self.max_size,
            "truncated": self.truncated,
            "closed": self.closed,
        }


def explore(system, max_size, budget, cap=None) -> Fragment:
    """Breadth-first search from the origin; size_hint is the BFS depth"""
    cap = cap or system.node_cap
    origin = system.origin().with_size(0)
    fragment = Fragment([origin], [], max_size)
    seen = {origin.canon}
    frontier = [origin]
    for depth in range(max_size + 1):
        next_frontier = []
        for obj in frontier:
            fragment.truncated = fragment.truncated or system.enumerate_transitions(obj, budget).truncated
            moves = [move for move in path_moves(system, obj, budget) if move.length > 0]
            if depth == max_size:
                if moves:
                    fragment.closed = False
                continue
            for move in moves:
                fragment.edges.append((obj.canon, move.end.canon, move))
                if move.end.canon in seen:
                    continue
                seen.add(move.end.canon)
                reached = move.end.with_size(depth + 1)
                fragment.objects.append(reached)
                next_frontier.append(reached)
                if len(fragment.objects) > cap:
                    raise BudgetExceeded("fragment_objects", cap)
        frontier = next_frontier
    if fragment.truncated:
        fragment.closed = False
    logger.info(f"Explored {system.name}: {fragment.summary()}")
    return fragment


# ---------------------------------------------------------------------------
# Arrow closures
# ---------------------------------------------------------------------------


class _Closures:
    """Composite arrows reachable by post-composing moves, memoized per start arrow"""

    def __init__(self, system, budget, cap=None):
        self.system = system
        self.budget = budget
        self.cap = cap or system.node_cap
        self._moves = {}
        self._memo = {}

    def moves(self, obj):
        if obj.payload not in self._moves:
            truncated = self.system.enumerate_transitions(obj, self.budget).truncated
            self._moves[obj.payload] = (path_moves(self.system, obj, self.budget), truncated)
        return self._moves[obj.payload]

    def closure(self, start, depth) -> Tuple[Dict, bool]:
        """{a;c: path c} over move sequences c with at most `depth` nontrivial arrows, plus a saturation flag"""
        memo_key = (start, depth)
        if memo_key in self._memo:
            return self._memo[memo_key]
        system = self.system
        found = {start: Path.identity(start.cod)}
        queue = deque([(start, Path.identity(start.cod))])
        saturated = True
        while queue:
            arrow, path = queue.popleft()
            moves, truncated = self.moves(arrow.cod)
            saturated = saturated and not truncated
            for move in moves:
                if path.length + move.length > depth:
                    saturated = False
                    continue
                extended = system.compose(arrow, move.composite(system))
                if extended in found:
                    continue
                found[extended] = compose(path, move)
                queue.append((extended, found[extended]))
                if len(found) > self.cap:
                    raise BudgetExceeded("arrow_closure", self.cap)
        self._memo[memo_key] = (found, saturated)
        return found, saturated


def _closing_pair(system, ext_a, ext_b, mode):
    """Paths (c, d) with a;c == b;d given the two closures, or None"""
    by_canon = {}
    for y in ext_b:
        by_canon.setdefault(y.cod.canon, []).append(y)
    for x, x_path in ext_a.items():
        if x in ext_b:
            return x_path, ext_b[x]
        for y in by_canon.get(x.cod.canon, []):
            if mode is EqualityMode.STRICT:
                h = system.closing_iso(x, y)
                if h is not None:
                    return x_path.then_iso(system, h), ext_b[y]
            elif system.arrows_equal(x, y, mode):
                return x_path, ext_b[y]
    return None


def _square_family(system, closures, obj, pairs_from, depth, mode, objects_checked):
    """Shared loop of the confluence checkers; returns a CheckResult"""
    incomplete = 0
    sources = pairs_from(obj)
    items = list(sources.items())
    for i, (a, a_path) in enumerate(items):
        for b, b_path in items[i + 1:]:
            ext_a, sat_a = closures.closure(a, depth)
            ext_b, sat_b = closures.closure(b, depth)
            if _closing_pair(system, ext_a, ext_b, mode) is not None:
                continue
            witness = {
                "object": encode_obj(system, obj),
                "f": encode_path(system, a_path),
                "g": encode_path(system, b_path),
                "pair": [a_path.label(), b_path.label()],
            }
            if sat_a and sat_b:
                logger.info(f"{system.name}: {a_path.label()} and {b_path.label()} never close")
                return CheckResult(Verdict.FALSE, witness=witness, details={"objects_checked": objects_checked})
            incomplete += 1
            if incomplete == 1:
                first_open = witness
    if incomplete:
        return CheckResult(
            Verdict.UNKNOWN,
            witness=first_open,
            exhausted={"name": "depth", "limit": depth},
            details={"objects_checked": objects_checked, "open_pairs": incomplete},
        )
    return None


def _confluence_family(system, frag, depth, budget, pairs_from, mode):
    closures = _Closures(system, budget)
    open_result = None
    try:
        for count, obj in enumerate(frag.objects, 1):
            result = _square_family(system, closures, obj, lambda o: pairs_from(closures, o), depth, mode, count)
            if result is None:
                continue
            if result.verdict is Verdict.FALSE:
                return result
            open_result = open_result or result
    except BudgetExceeded as e:
        return CheckResult.unknown(e)
    if open_result is not None:
        return open_result
    if frag.truncated:
        return CheckResult(Verdict.UNKNOWN, exhausted={"name": "transition_budget", "limit": budget})
    return CheckResult(Verdict.TRUE, details={"objects_checked": len(frag.objects), "depth": depth})


def _single_transitions(system, budget):
    def pairs_from(closures, obj):
        arrows = list(system.transitions(obj, budget))
        arrows += [v for v in system.iso_variants(obj) if v not in arrows]
        return {arrow: Path.of([arrow]) for arrow in arrows}

    return pairs_from


def _bounded_paths(max_path_len):
    def pairs_from(closures, obj):
        found, _ = closures.closure(closures.system.identity(obj), max_path_len)
        return found

    return pairs_from


def is_locally_confluent(system, frag, depth, budget=16, mode=EqualityMode.STRICT) -> CheckResult:
    """Every pair of transitions out of a fragment object closes with paths of length <= depth"""
    return _confluence_family(system, frag, depth, budget, _single_transitions(system, budget), mode)


def is_confluent(system, frag, max_path_len, depth, budget=16, mode=EqualityMode.STRICT) -> CheckResult:
    """Every pair of paths (length <= max_path_len) out of a fragment object closes"""
    result = _confluence_family(system, frag, depth, budget, _bounded_paths(max_path_len), mode)
    result.details["max_path_len"] = max_path_len
    return result


# ---------------------------------------------------------------------------
# Regularity and determination
# ---------------------------------------------------------------------------


def is_regular(system, frag, budget=16) -> CheckResult:
    """t precomposed with any isomorphism into dom(t) stays a transition"""
    try:
        for obj in frag.objects:
            isos_in = list(system.automorphisms(obj))
            for variant in system.iso_variants(obj):
                if variant != system.identity(obj):
                    isos_in.append(system.invert(variant))
            for t in system.transitions(obj, budget):
                if t.is_iso:
                    continue
                for h in isos_in:
                    if not system.is_transition(system.compose(h, t)):
                        logger.info(f"{system.name} is not regular: {t.describe()} after {h.describe()}")
                        return CheckResult(
                            Verdict.FALSE,
                            witness={"t": encode_arrow(system, t), "h": encode_arrow(system, h)},
                        )
    except BudgetExceeded as e:
        return CheckResult.unknown(e)
    return CheckResult(Verdict.TRUE, details={"objects_checked": len(frag.objects)})


def _nontrivial_types(system, obj, budget):
    return [arrow for arrow in system.transition_types(obj, budget) if not arrow.is_iso]


def _determined_over(system, objects, budget):
    try:
        for obj in objects:
            types = _nontrivial_types(system, obj, budget)
            if len(types) > 1:
                return CheckResult(
                    Verdict.FALSE,
                    witness={
                        "object": encode_obj(system, obj),
                        "transitions": [encode_arrow(system, t) for t in types[:2]],
                    },
                )
    except BudgetExceeded as e:
        return CheckResult.unknown(e)
    return CheckResult(Verdict.TRUE, details={"objects_checked": len(objects)})


def is_determined(system, frag, budget=16) -> CheckResult:
    """At most one nontrivial transition per object, up to isomorphism"""
    return _determined_over(system, frag.objects, budget)


def eventually_determined(system, frag, horizon, budget=16) -> CheckResult:
    """Determined at every fragment object of size >= horizon"""
    result = _determined_over(system, [o for o in frag.objects if (o.size_hint or 0) >= horizon], budget)
    if result.verdict is Verdict.TRUE and not frag.closed:
        return CheckResult(Verdict.UNKNOWN, exhausted={"name": "max_size", "limit": frag.max_size})
    result.details["horizon"] = horizon
    return result


@dataclass
class OrderWitness:
    """X < Y when Y has a nontrivial transition to X and another, non-isomorphic one"""

    relation: List[Tuple[str, str]]
    layers: Optional[List[List[str]]]

    @property
    def well_founded(self):
        return self.layers is not None


def order_witness(system, frag, budget=16) -> OrderWitness:
    graph = nx.DiGraph()
    for obj in frag.objects:
        types = _nontrivial_types(system, obj, budget)
        graph.add_node(obj.key_hex)
        if len(types) < 2:
            continue
        for t in types:
            graph.add_edge(obj.key_hex, t.cod.key_hex)
    relation = sorted((target, source) for source, target in graph.edges)
    try:
        layers = [sorted(layer) for layer in nx.topological_generations(graph)]
    except nx.NetworkXUnfeasible:
        layers = None
    return OrderWitness(relation, layers)


# ---------------------------------------------------------------------------
# Termination and normal forms
# ---------------------------------------------------------------------------


def is_terminating(system, frag, bound) -> CheckResult:
    """
    False on a cycle of nontrivial transitions, or on a path longer than
    `bound` in an open fragment. True only for closed acyclic fragments.
    """
    graph = frag.graph()
    try:
        cycle = nx.find_cycle(graph)
        moves = [graph[u][v]["move"] for u, v in cycle]
        return CheckResult(
            Verdict.FALSE,
            witness={"cycle": [encode_path(system, m) for m in moves]},
            details={"reason": "cycle"},
        )
    except nx.NetworkXNoCycle:
        pass
    longest = nx.dag_longest_path(graph)
    if frag.closed:
        return CheckResult(Verdict.TRUE, details={"longest_path": len(longest) - 1, **frag.summary()})
    if len(longest) - 1 > bound:
        moves = [graph[u][v]["move"] for u, v in zip(longest, longest[1:])]
        return CheckResult(
            Verdict.FALSE,
            witness={"path": [m.label() for m in moves], "length": len(moves)},
            details={"reason": "longer than bound", "bound": bound},
        )
    return CheckResult(Verdict.UNKNOWN, exhausted={"name": "max_size", "limit": frag.max_size})


def find_normalized(system, frag, budget=16) -> List[Obj]:
    """Fragment objects with no nontrivial move, counting moves through iso variants"""
    return [
        obj
        for obj in frag.objects
        if not any(move.length > 0 for move in path_moves(system, obj, budget))
    ]


def verify_normalized_theorem(system, frag, depth, budget=16) -> CheckResult:
    """On a confluent terminating fragment: a unique normalized N, reached from everywhere, homogeneous"""
    confluent = is_confluent(system, frag, depth, depth, budget)
    terminating = is_terminating(system, frag, depth)
    details = {"confluent": confluent.verdict.value, "terminating": terminating.verdict.value}
    if confluent.verdict is not Verdict.TRUE or terminating.verdict is not Verdict.TRUE:
        return CheckResult(Verdict.UNKNOWN, details={**details, "reason": "hypotheses not established"})
    normalized = find_normalized(system, frag, budget)
    if not normalized:
        raise NoNormalizedObject("Fragment has no normalized object")
    details["uniqueness"] = Verdict.of(len(normalized) == 1).value
    target = normalized[0]
    try:
        cofinal = all(target.canon in reachable_keys(system, obj, depth, budget)[0] for obj in frag.objects)
        details["cofinality"] = Verdict.of(cofinal).value
        details["homogeneity"] = _homogeneous_into(system, frag, target, depth, budget).value
    except BudgetExceeded as e:
        return CheckResult.unknown(e, **details)
    verdict = Verdict.all_of(Verdict(details[k]) for k in ("uniqueness", "cofinality", "homogeneity"))
    return CheckResult(verdict, witness={"normalized": encode_obj(system, target)}, details=details)


def _homogeneous_into(system, frag, target, depth, budget):
    closures = _Closures(system, budget)
    for obj in frag.objects:
        found, _ = closures.closure(system.identity(obj), depth)
        into = [arrow for arrow in found if arrow.cod.canon == target.canon]
        for first in into:
            for other in into:
                if system.closing_iso(first, other) is None:
                    return Verdict.FALSE
    return Verdict.TRUE


# ---------------------------------------------------------------------------
# Directedness
# ---------------------------------------------------------------------------


def _siblings_meet(system, left, right, depth, budget):
    left_keys, left_saturated = reachable_keys(system, left, depth, budget)
    right_keys, right_saturated = reachable_keys(system, right, depth, budget)
    if left_keys & right_keys:
        return Verdict.TRUE
    return Verdict.FALSE if left_saturated and right_saturated else Verdict.UNKNOWN


def _directed_family(system, frag, depth, budget, pairs_from):
    closures = _Closures(system, budget)
    open_witness = None
    try:
        for obj in frag.objects:
            items = list(pairs_from(closures, obj).items())
            for i, (a, a_path) in enumerate(items):
                for b, b_path in items[i + 1:]:
                    verdict = _siblings_meet(system, a.cod, b.cod, depth, budget)
                    if verdict is Verdict.TRUE:
                        continue
                    witness = {"object": encode_obj(system, obj), "pair": [a_path.label(), b_path.label()]}
                    if verdict is Verdict.FALSE:
                        return CheckResult(Verdict.FALSE, witness=witness)
                    open_witness = open_witness or witness
    except BudgetExceeded as e:
        return CheckResult.unknown(e)
    if open_witness is not None:
        return CheckResult(Verdict.UNKNOWN, witness=open_witness, exhausted={"name": "depth", "limit": depth})
    return CheckResult(Verdict.TRUE, details={"objects_checked": len(frag.objects)})


def is_locally_directed(system, frag, depth, budget=16) -> CheckResult:
    """Codomains of any two transitions from one object reach a common object"""
    return _directed_family(system, frag, depth, budget, _single_transitions(system, budget))


def is_directed(system, frag, depth, budget=16) -> CheckResult:
    """Codomains of any two paths (length <= depth) from one object reach a common object"""
    return _directed_family(system, frag, depth, budget, _bounded_paths(depth))


# ---------------------------------------------------------------------------
# Newman-style implications
# ---------------------------------------------------------------------------


def _implication(name, hypotheses: Dict[str, Verdict], conclusion: Verdict, system):
    details = {key: value.value for key, value in hypotheses.items()}
    details["conclusion"] = conclusion.value
    hold = Verdict.all_of(hypotheses.values())
    details["hypotheses_hold"] = hold.value
    details["confirmed"] = hold is Verdict.TRUE and conclusion is Verdict.TRUE
    if hold is Verdict.TRUE and conclusion is Verdict.FALSE:
        logger.error(f"{name} violated on {system.name}: hypotheses hold, conclusion fails")
        return CheckResult(Verdict.FALSE, details={**details, "soundness_violation": True})
    if hold is Verdict.FALSE or conclusion is Verdict.TRUE:
        return CheckResult(Verdict.TRUE, details=details)
    return CheckResult(Verdict.UNKNOWN, details=details)


def verify_newman(system, frag, depth, budget=16, horizon=None) -> CheckResult:
    """
    Regular + locally confluent + (eventually determined or terminating)
    implies confluent, checked on the fragment.
    """
    regular = is_regular(system, frag, budget).verdict
    local = is_locally_confluent(system, frag, depth, budget).verdict
    terminating = is_terminating(system, frag, depth).verdict
    determined = eventually_determined(system, frag, horizon if horizon is not None else 0, budget).verdict
    progress = Verdict.TRUE if Verdict.TRUE in (terminating, determined) else Verdict.all_of([terminating, determined])
    confluent = is_confluent(system, frag, depth, depth, budget)
    result = _implication(
        "Newman",
        {"regular": regular, "locally_confluent": local, "terminating_or_eventually_determined": progress},
        confluent.verdict,
        system,
    )
    result.details["terminating"] = terminating.value
    result.details["eventually_determined"] = determined.value
    if confluent.verdict is Verdict.FALSE:
        result.witness = confluent.witness
    return result


def verify_directed_newman(system, frag, depth, budget=16) -> CheckResult:
    """Regular + terminating + locally directed implies directed; also reports uniqueness of the normal form"""
    regular = is_regular(system, frag, budget).verdict
    terminating = is_terminating(system, frag, depth).verdict
    local = is_locally_directed(system, frag, depth, budget).verdict
    directed = is_directed(system, frag, depth, budget).verdict
    result = _implication(
        "Directed Newman",
        {"regular": regular, "terminating": terminating, "locally_directed": local},
        directed,
        system,
    )
    if terminating is Verdict.TRUE and directed is Verdict.TRUE:
        classes = find_normalized(system, frag, budget)
        result.details["unique_normal_form"] = len(classes) == 1
        result.details["normal_forms"] = [obj.key_hex for obj in classes]
    return result


def verify_newman_random(seed, count, max_objects=8, depth=None, budget=16) -> Dict:
    """Run verify_newman over seeded random regular systems and tally the outcomes"""
    from random_systems import generate_systems

    tally = {"systems": 0, "hypotheses_hold": 0, "confirmed": 0, "unknown": 0, "violations": []}
    for system_seed, system in generate_systems(seed, count, regular=True, max_objects=max_objects):
        size = depth or len(system.sizes)
        frag = explore(system, size, budget)
        result = verify_newman(system, frag, size, budget)
        tally["systems"] += 1
        if result.details["hypotheses_hold"] == "true":
            tally["hypotheses_hold"] += 1
        if result.details["confirmed"]:
            tally["confirmed"] += 1
        if result.verdict is Verdict.UNKNOWN:
            tally["unknown"] += 1
        if result.verdict is Verdict.FALSE:
            tally["violations"].append({"seed": system_seed, "category": system.to_json()})
    logger.info(f"Newman sweep from seed {seed}: {tally['confirmed']} confirmed of {tally['systems']}")
    return tally


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------


def min_cost_normalization(system, frag, budget=16) -> Tuple[int, Path]:
    """Least-cost path from the origin to a normalized object; isomorphisms cost nothing"""
    normalized = {obj.canon for obj in find_normalized(system, frag, budget)}
    if not normalized:
        raise NoNormalizedObject("Fragment has no normalized object", objects=len(frag.objects))
    graph = frag.graph()
    origin = frag.objects[0].canon
    distances, routes = nx.single_source_dijkstra(graph, origin, weight="cost")
    reachable = [key for key in normalized if key in distances]
    if not reachable:
        raise NoNormalizedObject("No normalized object is reachable from the origin")
    best = min(reachable, key=lambda key: (distances[key], key))
    route = routes[best]
    path = Path.identity(frag.objects[0])
    for u, v in zip(route, route[1:]):
        move = graph[u][v]["move"]
        if path.end != move.start:
            path = path.then_iso(system, system.find_iso(path.end, move.start))
        path = compose(path, move)
    return distances[best], path
