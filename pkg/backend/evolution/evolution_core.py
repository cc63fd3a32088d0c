"""
Core vocabulary of evolution systems: objects, arrows, paths, evolutions,
verdicts, and the EvolutionSystem contract every instance implements.

Arrows are composed in diagrammatic order: ``system.compose(f, g)`` is
"f, then g" (g ∘ f in the usual notation).
"""
import itertools
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Tuple

from evolution_errors import EXIT_FALSE, EXIT_TRUE, EXIT_UNKNOWN, BudgetExceeded, NonComposable

logger = logging.getLogger(__name__)


class ArrowKind(Enum):
    ISO = "iso"
    TRANSITION = "transition"
    # composites of several transitions; not necessarily transitions themselves
    COMPOSITE = "composite"


class EqualityMode(Enum):
    STRICT = "strict"
    RELAXED = "relaxed"


class Verdict(Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    @property
    def exit_code(self):
        return {Verdict.TRUE: EXIT_TRUE, Verdict.FALSE: EXIT_FALSE, Verdict.UNKNOWN: EXIT_UNKNOWN}[self]

    @classmethod
    def of(cls, value: bool):
        return cls.TRUE if value else cls.FALSE

    @classmethod
    def all_of(cls, verdicts):
        verdicts = list(verdicts)
        if cls.FALSE in verdicts:
            return cls.FALSE
        if cls.UNKNOWN in verdicts:
            return cls.UNKNOWN
        return cls.TRUE


@dataclass
class CheckResult:
    """Tri-state outcome of a checker plus its witness or exhausted budget"""

    verdict: Verdict
    witness: Optional[Dict[str, Any]] = None
    exhausted: Optional[Dict[str, Any]] = None
    details: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def unknown(cls, error: BudgetExceeded, **details):
        return cls(Verdict.UNKNOWN, exhausted={"name": error.budget_name, "limit": error.limit}, details=details)

    def as_dict(self):
        return {
            "verdict": self.verdict.value,
            "witness": self.witness,
            "exhausted": self.exhausted,
            "details": self.details,
        }


@dataclass(frozen=True)
class Obj:
    """A finite object; identity is the payload, `canon` identifies its iso class"""

    payload: Any
    canon: bytes = field(compare=False, repr=False)
    size_hint: Optional[int] = field(default=None, compare=False)

    @property
    def key_hex(self):
        return self.canon.hex()

    def with_size(self, size):
        return replace(self, size_hint=size)


@dataclass(frozen=True)
class Arrow:
    """A morphism record; equality is (dom, cod, map_data)"""

    dom: Obj
    cod: Obj
    map_data: Any
    kind: ArrowKind = field(default=ArrowKind.TRANSITION, compare=False)
    label: str = field(default="", compare=False)
    cost: int = field(default=0, compare=False)

    @property
    def is_iso(self):
        return self.kind is ArrowKind.ISO

    def describe(self):
        return self.label or self.kind.value


@dataclass(frozen=True)
class Path:
    start: Obj
    arrows: Tuple[Arrow, ...] = ()

    def __post_init__(self):
        here = self.start
        for index, arrow in enumerate(self.arrows):
            if arrow.dom != here:
                raise NonComposable(f"Arrow {index} does not start where the path is", index=index)
            here = arrow.cod

    @classmethod
    def of(cls, arrows):
        arrows = tuple(arrows)
        if not arrows:
            raise NonComposable("Path.of needs at least one arrow; use Path.identity")
        return cls(arrows[0].dom, arrows)

    @classmethod
    def identity(cls, obj):
        return cls(obj, ())

    @property
    def end(self):
        return self.arrows[-1].cod if self.arrows else self.start

    @property
    def length(self):
        """Number of nontrivial arrows"""
        return sum(1 for arrow in self.arrows if not arrow.is_iso)

    @property
    def cost(self):
        return sum(arrow.cost for arrow in self.arrows)

    def label(self):
        if not self.arrows:
            return "id"
        return "∘".join(arrow.describe() for arrow in reversed(self.arrows))

    def composite(self, system):
        result = system.identity(self.start)
        for arrow in self.arrows:
            result = system.compose(result, arrow)
        return result

    def normalized(self, system):
        """Fuse runs of adjacent isos into one arrow; the length is unchanged"""
        fused = []
        for arrow in self.arrows:
            if fused and arrow.is_iso and fused[-1].is_iso:
                fused[-1] = system.compose(fused[-1], arrow)
            else:
                fused.append(arrow)
        fused = [arrow for arrow in fused if not (arrow.is_iso and arrow == system.identity(arrow.dom))]
        return Path(self.start, tuple(fused))

    def then_iso(self, system, iso):
        """Post-compose an iso, fusing it into the last arrow when there is one"""
        if iso == system.identity(iso.dom):
            return self
        if not self.arrows:
            return Path(self.start, (iso,))
        return Path(self.start, self.arrows[:-1] + (system.compose(self.arrows[-1], iso),))


def compose(p: Path, q: Path) -> Path:
    """Concatenate two paths; p's end must be q's start"""
    if p.end != q.start:
        raise NonComposable("Paths do not meet", left_end=repr(p.end.payload), right_start=repr(q.start.payload))
    return Path(p.start, p.arrows + q.arrows)


@dataclass(frozen=True)
class Evolution:
    stages: Tuple[Obj, ...]
    steps: Tuple[Arrow, ...] = ()
    audit: Tuple[Dict[str, Any], ...] = ()

    def __post_init__(self):
        if len(self.stages) != len(self.steps) + 1:
            raise NonComposable("An evolution has one more stage than steps")
        for n, step in enumerate(self.steps):
            if step.dom != self.stages[n] or step.cod != self.stages[n + 1]:
                raise NonComposable(f"Step {n} does not connect stages {n} and {n + 1}", step=n)

    @classmethod
    def start(cls, origin):
        return cls((origin,))

    @property
    def length(self):
        return len(self.steps)

    @property
    def current(self):
        return self.stages[-1]

    def extended(self, arrows, audit_entry=None):
        arrows = tuple(arrows)
        stages = self.stages + tuple(arrow.cod for arrow in arrows)
        audit = self.audit + ((audit_entry,) if audit_entry is not None else ())
        return Evolution(stages, self.steps + arrows, audit)

    def composed(self, n, m):
        """The path u_n^m from stage n to stage m"""
        if not 0 <= n <= m <= self.length:
            raise NonComposable(f"No composed path from stage {n} to stage {m}", n=n, m=m, length=self.length)
        return Path(self.stages[n], self.steps[n:m])

    def truncated(self, length):
        length = min(length, self.length)
        return Evolution(self.stages[: length + 1], self.steps[:length], self.audit)


@dataclass(frozen=True)
class TransitionBatch:
    arrows: Tuple[Arrow, ...]
    truncated: bool


class EvolutionSystem:
    """
    The contract an evolution system satisfies.

    Subclasses provide `origin`, `canonical_key`, the arrow algebra
    (`identity`, `compose`, `invert`, `is_transition`), candidate transitions
    and isomorphism search. Everything else has a generic implementation that
    instances may override with something faster.
    """

    name = "abstract"
    # True when `_candidate_transitions` never yields two iso-equivalent arrows
    candidates_distinct = False

    def __init__(self, node_cap=200000):
        self.node_cap = node_cap

    # -- objects --------------------------------------------------------------

    def origin(self) -> Obj:
        raise NotImplementedError

    def canonical_key(self, payload) -> bytes:
        raise NotImplementedError

    def make(self, payload) -> Obj:
        return Obj(payload, self.canonical_key(payload))

    def carrier(self, obj) -> Optional[Tuple]:
        """Elements of a concrete object, or None for abstract categories"""
        return None

    def is_iso_map(self, source, target, mapping) -> bool:
        return False

    # -- arrow algebra --------------------------------------------------------

    def identity(self, obj) -> Arrow:
        raise NotImplementedError

    def compose(self, f: Arrow, g: Arrow) -> Arrow:
        raise NotImplementedError

    def invert(self, iso: Arrow) -> Arrow:
        raise NotImplementedError

    def is_transition(self, f: Arrow) -> bool:
        raise NotImplementedError

    def cost(self, arrow: Arrow) -> int:
        return arrow.cost

    def arrow_from_map(self, dom, cod, mapping, kind=ArrowKind.ISO, label="") -> Arrow:
        raise NotImplementedError

    # -- enumeration ----------------------------------------------------------

    def _candidate_transitions(self, obj) -> Iterator[Arrow]:
        """Nontrivial transitions from obj in a fixed deterministic order"""
        raise NotImplementedError

    def enumerate_transitions(self, obj, budget) -> TransitionBatch:
        """Identity first, then one representative per post-iso class, at most `budget` arrows"""
        reps = [self.identity(obj)]
        truncated = False
        for candidate in self._candidate_transitions(obj):
            if not self.candidates_distinct and any(
                rep.cod.canon == candidate.cod.canon and self.closing_iso(rep, candidate) is not None for rep in reps
            ):
                continue
            if len(reps) >= budget:
                truncated = True
                break
            reps.append(candidate)
        return TransitionBatch(tuple(reps), truncated)

    def transitions(self, obj, budget) -> List[Arrow]:
        return list(self.enumerate_transitions(obj, budget).arrows)

    def transition_types(self, obj, budget) -> List[Arrow]:
        """Representatives up to isomorphism on both ends"""
        reps = []
        for arrow in self.transitions(obj, budget):
            if not any(self.arrows_equal(rep, arrow, EqualityMode.RELAXED) for rep in reps):
                reps.append(arrow)
        return reps

    def iso_variants(self, obj) -> List[Arrow]:
        """Isos to the concrete copies of obj whose transitions differ; identity first"""
        return [self.identity(obj)]

    def iter_isos(self, source, target, pinned=None) -> Iterator[Arrow]:
        if source == target and not pinned:
            yield self.identity(source)

    def find_iso(self, source, target) -> Optional[Arrow]:
        if source.canon != target.canon:
            return None
        return next(self.iter_isos(source, target), None)

    def automorphisms(self, obj, limit=None) -> List[Arrow]:
        limit = limit or self.node_cap
        autos = []
        for auto in self.iter_isos(obj, obj):
            if len(autos) >= limit:
                raise BudgetExceeded("automorphisms", limit)
            autos.append(auto)
        return autos

    def closing_iso(self, a: Arrow, b: Arrow) -> Optional[Arrow]:
        """An iso h: cod(a) -> cod(b) with a followed by h equal to b"""
        if a.dom != b.dom or a.cod.canon != b.cod.canon:
            return None
        for h in self.iter_isos(a.cod, b.cod):
            if self.compose(a, h) == b:
                return h
        return None

    def arrows_equal(self, a: Arrow, b: Arrow, mode=EqualityMode.STRICT) -> bool:
        """Strict: equal records. Relaxed: equal up to relabelling both ends"""
        if mode is EqualityMode.STRICT or a == b:
            return a == b
        if a.dom != b.dom or a.cod.canon != b.cod.canon:
            return False
        for auto in self.automorphisms(a.dom):
            if self.closing_iso(self.compose(auto, a), b) is not None:
                return True
        return False

    # -- amalgamation and factoring ------------------------------------------

    def amalgamate(self, f: Arrow, g: Arrow) -> Optional[Tuple[Arrow, Arrow]]:
        """Native square closure; None means "use the generic search" """
        return None

    def factor_through(self, a: Arrow, b: Arrow, max_len, budget) -> Optional[Path]:
        """A path g from cod(a) with a followed by g equal to b"""
        if a.dom != b.dom:
            return None
        for path in enumerate_paths(self, a.cod, max_len, budget):
            if path.end.canon != b.cod.canon:
                continue
            h = self.closing_iso(self.compose(a, path.composite(self)), b)
            if h is not None:
                return path.then_iso(self, h)
        return None

    # -- serialization --------------------------------------------------------

    def encode_payload(self, payload):
        raise NotImplementedError

    def decode_payload(self, data):
        raise NotImplementedError

    def encode_map(self, map_data):
        return map_data

    def decode_map(self, data):
        return data

    def describe(self) -> Dict[str, Any]:
        return {"system": self.name}


class CarrierMapsMixin:
    """
    Arrow algebra for concrete objects whose arrows are (partial) maps between
    carriers. map_data is a sorted tuple of (source, image) pairs.
    """

    def identity(self, obj):
        return Arrow(obj, obj, tuple((x, x) for x in self.carrier(obj)), ArrowKind.ISO, "id")

    def arrow_from_map(self, dom, cod, mapping, kind=ArrowKind.ISO, label="", cost=0):
        return Arrow(dom, cod, tuple(sorted(mapping.items())), kind, label, cost)

    @staticmethod
    def as_map(arrow) -> Dict:
        return dict(arrow.map_data)

    def compose(self, f, g):
        if f.cod != g.dom:
            raise NonComposable("Arrows do not meet", left=f.describe(), right=g.describe())
        first, second = dict(f.map_data), dict(g.map_data)
        mapping = {x: second[y] for x, y in first.items() if y in second}
        if f.is_iso and g.is_iso:
            kind = ArrowKind.ISO
        elif f.is_iso or g.is_iso:
            kind = f.kind if g.is_iso else g.kind
        else:
            kind = ArrowKind.COMPOSITE
        label = _join_labels(f, g)
        return Arrow(f.dom, g.cod, tuple(sorted(mapping.items())), kind, label, f.cost + g.cost)

    def invert(self, iso):
        return Arrow(iso.cod, iso.dom, tuple(sorted((y, x) for x, y in iso.map_data)), ArrowKind.ISO, "iso")

    def iter_isos(self, source, target, pinned=None):
        for mapping in self.iter_iso_maps(source, target, pinned):
            yield self.arrow_from_map(source, target, mapping, ArrowKind.ISO, "iso")

    def iter_iso_maps(self, source, target, pinned=None):
        raise NotImplementedError

    def closing_iso(self, a, b):
        if a.dom != b.dom or a.cod.canon != b.cod.canon:
            return None
        first, second = dict(a.map_data), dict(b.map_data)
        if set(first) != set(second):
            return None
        pinned = {}
        for x, y in first.items():
            if pinned.setdefault(y, second[x]) != second[x]:
                return None
        for h in self.iter_isos(a.cod, b.cod, pinned):
            if self.compose(a, h) == b:
                return h
        return None


class ThinCategoryMixin:
    """Arrow algebra for preorders: at most one arrow between two objects, only identity isos"""

    def identity(self, obj):
        return Arrow(obj, obj, None, ArrowKind.ISO, "id")

    def arrow_from_map(self, dom, cod, mapping=None, kind=ArrowKind.TRANSITION, label="", cost=0):
        return Arrow(dom, cod, None, kind, label, cost)

    def compose(self, f, g):
        if f.cod != g.dom:
            raise NonComposable("Arrows do not meet", left=f.describe(), right=g.describe())
        if f.is_iso and g.is_iso:
            kind = ArrowKind.ISO
        elif f.is_iso or g.is_iso:
            kind = f.kind if g.is_iso else g.kind
        else:
            kind = ArrowKind.COMPOSITE
        return Arrow(f.dom, g.cod, None, kind, _join_labels(f, g), f.cost + g.cost)

    def invert(self, iso):
        if iso.dom != iso.cod:
            raise NonComposable("Only identities are invertible in a preorder")
        return iso


def _join_labels(f, g):
    labels = [arrow.label for arrow in (g, f) if arrow.label and arrow.label != "id"]
    return "∘".join(labels) if labels else "id"


def canonical_key(system: EvolutionSystem, obj: Obj) -> bytes:
    return system.canonical_key(obj.payload)


def find_iso_bruteforce(system: EvolutionSystem, source: Obj, target: Obj, node_cap=None) -> Optional[Arrow]:
    """Try every bijection between carriers; raises BudgetExceeded past node_cap"""
    node_cap = node_cap or system.node_cap
    source_carrier, target_carrier = system.carrier(source), system.carrier(target)
    if source_carrier is None or target_carrier is None:
        return system.find_iso(source, target)
    if len(source_carrier) != len(target_carrier):
        return None
    for count, image in enumerate(itertools.permutations(target_carrier)):
        if count >= node_cap:
            raise BudgetExceeded("iso_search_nodes", node_cap)
        mapping = dict(zip(source_carrier, image))
        if system.is_iso_map(source, target, mapping):
            return system.arrow_from_map(source, target, mapping, ArrowKind.ISO, "iso")
    return None


def path_moves(system: EvolutionSystem, obj: Obj, budget) -> List[Path]:
    """Single moves out of obj: a nontrivial transition, optionally after a variant iso"""
    moves = []
    for variant in system.iso_variants(obj):
        is_identity = variant == system.identity(obj)
        if not is_identity:
            moves.append(Path.of([variant]))
        for arrow in system.transitions(variant.cod, budget):
            if arrow.is_iso:
                continue
            moves.append(Path.of([arrow] if is_identity else [variant, arrow]))
    return moves


def enumerate_paths(system: EvolutionSystem, obj: Obj, max_len, budget, cap=None) -> List[Path]:
    """All move sequences from obj with at most max_len nontrivial arrows, shortest first"""
    cap = cap or system.node_cap
    paths = [Path.identity(obj)]
    frontier = [Path.identity(obj)]
    moves_from = {}
    for level in range(max_len):
        next_frontier = []
        for path in frontier:
            if path.end.payload not in moves_from:
                moves_from[path.end.payload] = path_moves(system, path.end, budget)
            for move in moves_from[path.end.payload]:
                if level > 0 and move.length == 0:
                    continue
                extended = compose(path, move)
                if extended.length == 0:
                    paths.append(extended)
                    continue
                next_frontier.append(extended)
                if len(paths) + len(next_frontier) > cap:
                    raise BudgetExceeded("path_enumeration", cap)
        paths.extend(next_frontier)
        frontier = next_frontier
    return paths


def reachable_keys(system: EvolutionSystem, obj: Obj, depth, budget) -> Tuple[frozenset, bool]:
    """Canonical keys reachable from obj within depth moves; flag says the search saturated"""
    seen = {obj.canon}
    frontier = [obj]
    for _ in range(depth):
        next_frontier = []
        for here in frontier:
            for move in path_moves(system, here, budget):
                if move.end.canon not in seen:
                    seen.add(move.end.canon)
                    next_frontier.append(move.end)
        if not next_frontier:
            return frozenset(seen), True
        frontier = next_frontier
    return frozenset(seen), False


def close_square(system: EvolutionSystem, s: Arrow, t: Arrow, budget, mode=EqualityMode.STRICT):
    """
    Search single transitions s', t' with s;s' == t;t'. Returns (witness, exhaustive);
    witness is None when no square closed, and exhaustive tells whether that is final.
    """
    if s.dom != t.dom:
        raise NonComposable("Square sides must share a domain")
    native = system.amalgamate(s, t)
    if native is not None:
        s_prime, t_prime = native
        if system.arrows_equal(system.compose(s, s_prime), system.compose(t, t_prime), mode):
            return (s_prime, t_prime), True
        logger.warning(f"Native amalgam for {system.name} failed re-verification; falling back to search")

    left_batch = system.enumerate_transitions(s.cod, budget)
    right_batch = system.enumerate_transitions(t.cod, budget)
    pairs = sorted(
        itertools.product(enumerate(left_batch.arrows), enumerate(right_batch.arrows)),
        key=lambda pair: (int(not pair[0][1].is_iso) + int(not pair[1][1].is_iso), pair[0][0], pair[1][0]),
    )
    for (_, x), (_, y) in pairs:
        if x.cod.canon != y.cod.canon:
            continue
        left, right = system.compose(s, x), system.compose(t, y)
        if mode is EqualityMode.STRICT:
            h = system.closing_iso(left, right)
            if h is not None:
                return (_fuse(system, x, h), y), True
        elif system.arrows_equal(left, right, mode):
            return (x, y), True
    return None, not (left_batch.truncated or right_batch.truncated)


def _fuse(system, arrow, iso):
    if iso == system.identity(iso.dom):
        return arrow
    return system.compose(arrow, iso)


def close_paths(system: EvolutionSystem, p: Path, q: Path, depth, budget, mode=EqualityMode.STRICT):
    """Search paths p', q' (at most `depth` nontrivial arrows each) with p;p' == q;q'"""
    if p.start != q.start:
        raise NonComposable("Paths must share a start")
    left_paths = enumerate_paths(system, p.end, depth, budget)
    right_paths = enumerate_paths(system, q.end, depth, budget)
    right_by_key = {}
    for right in right_paths:
        right_by_key.setdefault(right.end.canon, []).append(right)
    p_arrow, q_arrow = p.composite(system), q.composite(system)
    candidates = [
        (left.length + right.length, i, j, left, right)
        for i, left in enumerate(left_paths)
        for j, right in enumerate(right_by_key.get(left.end.canon, []))
    ]
    candidates.sort(key=lambda c: c[:3])
    for _, _, _, left, right in candidates:
        left_arrow = system.compose(p_arrow, left.composite(system))
        right_arrow = system.compose(q_arrow, right.composite(system))
        if mode is EqualityMode.STRICT:
            h = system.closing_iso(left_arrow, right_arrow)
            if h is not None:
                return (left.then_iso(system, h), right)
        elif system.arrows_equal(left_arrow, right_arrow, mode):
            return (left, right)
    return None
