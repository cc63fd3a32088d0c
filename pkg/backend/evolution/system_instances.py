"""
Concrete evolution systems: graphs and linear orders under one-point
extensions, posets under covers, the prime monoid, the two-transition
counterexample over finite sets, matrix-chain products, and substructures of a
fixed finite graph.
"""
import itertools
import logging
from typing import Dict, Iterator, List, Optional, Tuple

import networkx as nx

import graph_structures as gs
from evolution_core import (
    Arrow,
    ArrowKind,
    CarrierMapsMixin,
    EvolutionSystem,
    Path,
    ThinCategoryMixin,
)
from evolution_errors import ConfigError, CostOverflow, NonComposable
from graph_structures import Graph

logger = logging.getLogger(__name__)

# Objects up to this many vertices get their transitions sorted by codomain key in one block;
# larger ones are sorted one neighbourhood size at a time
SORTED_ENUMERATION_LIMIT = 4
COUNTEREXAMPLE_UNIVERSE = 10
MAX_COST = 2**63 - 1


def iter_primes() -> Iterator[int]:
    """Incremental sieve"""
    composites: Dict[int, List[int]] = {}
    candidate = 2
    while True:
        if candidate not in composites:
            yield candidate
            composites[candidate * candidate] = [candidate]
        else:
            for prime in composites.pop(candidate):
                composites.setdefault(candidate + prime, []).append(prime)
        candidate += 1


def is_prime(value):
    if value < 2:
        return False
    return all(value % d for d in range(2, int(value**0.5) + 1))


class EmbeddingFactorMixin:
    """
    Factoring for systems whose arrows are embeddings and whose transitions are
    one-point extensions: any embedding splits into a path of one-point steps.
    """

    def _find_embedding(self, source, target, pinned) -> Optional[Dict]:
        raise NotImplementedError

    def _substructure(self, payload, keep):
        raise NotImplementedError

    def factor_through(self, a, b, max_len, budget):
        if a.dom != b.dom:
            return None
        b_map = dict(b.map_data)
        try:
            pinned = {y: b_map[x] for x, y in a.map_data}
        except KeyError:
            return None
        embedding = self._find_embedding(a.cod, b.cod, pinned)
        if embedding is None:
            return None
        return self.embedding_path(a.cod, b.cod, embedding, max_len)

    def embedding_path(self, source, target, embedding, max_len=None) -> Optional[Path]:
        """Split an embedding source -> target into one-point extensions"""
        image = set(embedding.values())
        missing = [v for v in self.carrier(target) if v not in image]
        if max_len is not None and len(missing) > max_len:
            return None
        if not missing:
            iso = self.arrow_from_map(source, target, embedding, ArrowKind.ISO, "iso")
            return Path.identity(source) if iso == self.identity(source) else Path.of([iso])
        arrows = []
        here, mapping, keep = source, dict(embedding), set(image)
        for vertex in missing:
            keep.add(vertex)
            if len(keep) == len(self.carrier(target)):
                nxt = target
            else:
                nxt = self.make(self._substructure(target.payload, keep))
            arrows.append(self.arrow_from_map(here, nxt, mapping, ArrowKind.TRANSITION, f"ext{vertex}"))
            mapping = {v: v for v in self.carrier(nxt)}
            here = nxt
        return Path(source, tuple(arrows))


# ---------------------------------------------------------------------------
# Graphs
# ---------------------------------------------------------------------------


class GraphSystem(EmbeddingFactorMixin, CarrierMapsMixin, EvolutionSystem):
    """Simple graphs with induced embeddings; transitions are one-point extensions and isos"""

    name = "graph"
    candidates_distinct = True

    def __init__(self, directed=True, origin_graph: Optional[Graph] = None, node_cap=200000):
        super().__init__(node_cap)
        self.directed = directed
        self.origin_graph = origin_graph if origin_graph is not None else Graph(directed=directed)
        if self.origin_graph.directed != directed:
            raise ConfigError("Origin graph mode does not match the system mode")

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

    def _admits(self, graph) -> bool:
        return True

    def _relations(self):
        return ("out", "in", "both") if self.directed else ("adj",)

    def _neighborhoods(self, graph, size):
        for chosen in itertools.combinations(graph.vertices, size):
            for kinds in itertools.product(self._relations(), repeat=size):
                out = [w for w, k in zip(chosen, kinds) if k in ("out", "both", "adj")]
                inward = [w for w, k in zip(chosen, kinds) if k in ("in", "both")]
                yield out, inward

    def _extension(self, obj, new, out, inward):
        graph = obj.payload.with_vertex(new, out, inward)
        if not self._admits(graph):
            return None
        label = f"ext{new}[{','.join(map(str, out))}|{','.join(map(str, inward))}]"
        inclusion = {v: v for v in obj.payload.vertices}
        return self.arrow_from_map(obj, self.make(graph), inclusion, ArrowKind.TRANSITION, label)

    def _candidate_transitions(self, obj):
        graph = obj.payload
        new = graph.fresh_vertex(0)
        sizes = range(graph.order + 1)
        blocks = [sizes] if graph.order <= SORTED_ENUMERATION_LIMIT else [[size] for size in sizes]
        for block in blocks:
            arrows = [
                arrow
                for size in block
                for out, inward in self._neighborhoods(graph, size)
                if (arrow := self._extension(obj, new, out, inward)) is not None
            ]
            arrows.sort(key=lambda a: (a.cod.canon, a.cod.payload.edges))
            yield from arrows

    def transition_types(self, obj, budget):
        reps, seen = [self.identity(obj)], set()
        for arrow in self._candidate_transitions(obj):
            new = _new_points(arrow)[0]
            key = gs.canonical_key(arrow.cod.payload, marks={new: 1}, node_cap=self.node_cap)
            if key in seen:
                continue
            if len(reps) >= budget:
                break
            seen.add(key)
            reps.append(arrow)
        return reps

    def is_transition(self, f):
        mapping = dict(f.map_data)
        if not gs.is_induced_embedding(f.dom.payload, f.cod.payload, mapping):
            return False
        return f.cod.payload.order - f.dom.payload.order in (0, 1) and self._admits(f.cod.payload)

    def amalgamate(self, s, t):
        if s.is_iso:
            return self.compose(self.invert(s), t), self.identity(t.cod)
        if t.is_iso:
            return self.identity(s.cod), self.compose(self.invert(t), s)
        h = self.closing_iso(s, t)
        if h is not None:
            return h, self.identity(t.cod)
        s_new, t_new = _new_points(s), _new_points(t)
        if len(s_new) != 1 or len(t_new) != 1:
            return None
        # free amalgam: glue cod(s) onto cod(t) along the common domain
        s_map, t_map = dict(s.map_data), dict(t.map_data)
        across = {s_map[x]: t_map[x] for x in s_map}
        b, c_graph = s_new[0], t.cod.payload
        d = c_graph.fresh_vertex(0)
        across[b] = d
        source = s.cod.payload
        out = [across[w] for w in source.out_neighbors[b]]
        inward = [across[w] for w in source.in_neighbors[b]] if self.directed else []
        amalgam = c_graph.with_vertex(d, out, inward)
        if not self._admits(amalgam):
            return None
        apex = self.make(amalgam)
        s_prime = self.arrow_from_map(s.cod, apex, across, ArrowKind.TRANSITION, t.label)
        t_prime = self.arrow_from_map(t.cod, apex, {v: v for v in c_graph.vertices}, ArrowKind.TRANSITION, s.label)
        return s_prime, t_prime

    def _find_embedding(self, source, target, pinned):
        return next(gs.iter_embeddings(source.payload, target.payload, pinned), None)

    def _substructure(self, payload, keep):
        return payload.induced(keep)

    def encode_payload(self, payload):
        return payload.to_json()

    def decode_payload(self, data):
        return Graph.from_json(data, "directed" if self.directed else "undirected")

    def encode_map(self, map_data):
        return [list(pair) for pair in map_data]

    def decode_map(self, data):
        return tuple(sorted((int(x), int(y)) for x, y in data))

    def describe(self):
        return {"system": self.name, "mode": "directed" if self.directed else "undirected", "origin": self.origin_graph.to_json()}


class SubstructureSystem(GraphSystem):
    """Graphs that embed into a fixed finite ambient graph"""

    name = "substructures"

    def __init__(self, ambient: Optional[Graph] = None, node_cap=200000):
        ambient = ambient if ambient is not None else Graph.make([0, 1, 2], [(0, 1), (1, 2), (2, 0)])
        super().__init__(directed=ambient.directed, origin_graph=Graph(directed=ambient.directed), node_cap=node_cap)
        self.ambient = ambient
        self._admissible_cache: Dict[Graph, bool] = {}

    def _admits(self, graph):
        if graph not in self._admissible_cache:
            self._admissible_cache[graph] = next(gs.iter_embeddings(graph, self.ambient), None) is not None
        return self._admissible_cache[graph]

    def describe(self):
        return {"system": self.name, "ambient": self.ambient.to_json()}


def _new_points(arrow) -> List:
    image = set(y for _, y in arrow.map_data)
    return [v for v in arrow.cod.payload.vertices if v not in image]


# ---------------------------------------------------------------------------
# Linear orders
# ---------------------------------------------------------------------------


class LinOrderSystem(EmbeddingFactorMixin, CarrierMapsMixin, EvolutionSystem):
    """Finite linear orders (payload: points in increasing order) with order embeddings"""

    name = "linorder"
    candidates_distinct = True

    def origin(self):
        return self.make(())

    def canonical_key(self, payload):
        return b"L" + len(payload).to_bytes(4, "big")

    def carrier(self, obj):
        return obj.payload

    def is_iso_map(self, source, target, mapping):
        return len(source.payload) == len(target.payload) and [mapping.get(p) for p in source.payload] == list(
            target.payload
        )

    def iter_iso_maps(self, source, target, pinned=None):
        if len(source.payload) != len(target.payload):
            return
        mapping = dict(zip(source.payload, target.payload))
        if all(mapping.get(x) == y for x, y in (pinned or {}).items()):
            yield mapping

    def _candidate_transitions(self, obj):
        points = obj.payload
        cod = self.make(tuple(range(len(points) + 1)))
        arrows = []
        for gap in range(len(points) + 1):
            mapping = {p: (i if i < gap else i + 1) for i, p in enumerate(points)}
            arrows.append(self.arrow_from_map(obj, cod, mapping, ArrowKind.TRANSITION, f"ins{gap}"))
        arrows.sort(key=lambda a: a.map_data)
        yield from arrows

    def is_transition(self, f):
        mapping = dict(f.map_data)
        dom, cod = f.dom.payload, f.cod.payload
        if set(mapping) != set(dom) or len(cod) - len(dom) not in (0, 1):
            return False
        positions = [cod.index(mapping[p]) if mapping[p] in cod else -1 for p in dom]
        return -1 not in positions and positions == sorted(set(positions))

    @staticmethod
    def new_position(arrow):
        image = set(y for _, y in arrow.map_data)
        return next(j for j, p in enumerate(arrow.cod.payload) if p not in image)

    def amalgamate(self, s, t):
        if s == t:
            return self.identity(s.cod), self.identity(t.cod)
        if s.is_iso:
            return self.compose(self.invert(s), t), self.identity(t.cod)
        if t.is_iso:
            return self.identity(s.cod), self.compose(self.invert(t), s)
        n = len(s.dom.payload)
        if len(s.cod.payload) != n + 1 or len(t.cod.payload) != n + 1:
            return None
        p, q = self.new_position(s), self.new_position(t)
        if p == q:
            return self.closing_iso(s, t), self.identity(t.cod)
        apex = self.make(tuple(range(n + 2)))

        def old_position(i):
            return i + (1 if i >= p else 0) + (1 if i >= q else 0)

        def side_map(cod_points, own_new, own_pos):
            mapping = {}
            for j, point in enumerate(cod_points):
                if j == own_new:
                    mapping[point] = own_pos
                else:
                    mapping[point] = old_position(j if j < own_new else j - 1)
            return mapping

        s_pos, t_pos = p + (1 if p > q else 0), q + (1 if q > p else 0)
        s_prime = self.arrow_from_map(s.cod, apex, side_map(s.cod.payload, p, s_pos), ArrowKind.TRANSITION, t.label)
        t_prime = self.arrow_from_map(t.cod, apex, side_map(t.cod.payload, q, t_pos), ArrowKind.TRANSITION, s.label)
        return s_prime, t_prime

    def _find_embedding(self, source, target, pinned):
        small, big = source.payload, target.payload
        index = {p: i for i, p in enumerate(big)}
        mapping, cursor = {}, 0
        for position, point in enumerate(small):
            if point in pinned:
                slot = index.get(pinned[point])
                if slot is None or slot < cursor:
                    return None
            else:
                # leftmost free slot that leaves room before the next pinned point
                limit = next(
                    (index.get(pinned[q], -1) for q in small[position + 1:] if q in pinned),
                    len(big),
                )
                slot = cursor
                if slot >= limit:
                    return None
            mapping[point] = big[slot]
            cursor = slot + 1
        return mapping

    def _substructure(self, payload, keep):
        return tuple(p for p in payload if p in keep)

    def encode_payload(self, payload):
        return {"points": list(payload)}

    def decode_payload(self, data):
        return tuple(int(p) for p in data["points"])

    def encode_map(self, map_data):
        return [list(pair) for pair in map_data]

    def decode_map(self, data):
        return tuple(sorted((int(x), int(y)) for x, y in data))


# ---------------------------------------------------------------------------
# Posets
# ---------------------------------------------------------------------------


class PosetSystem(ThinCategoryMixin, EvolutionSystem):
    """A finite poset as a thin category; transitions are covers and identities"""

    name = "poset"
    candidates_distinct = True

    def __init__(self, points=(0, 1, 2, 3), covers=((0, 1), (0, 2), (1, 3), (2, 3)), bottom=0, node_cap=200000):
        super().__init__(node_cap)
        self.hasse = nx.DiGraph()
        self.hasse.add_nodes_from(int(p) for p in points)
        self.hasse.add_edges_from((int(x), int(y)) for x, y in covers)
        if not nx.is_directed_acyclic_graph(self.hasse):
            raise ConfigError("Poset covers contain a cycle")
        if bottom not in self.hasse or self.hasse.in_degree(bottom) != 0:
            raise ConfigError("Bottom must be a minimal point of the poset", bottom=bottom)
        self.bottom = int(bottom)
        self.covers = frozenset(
            (x, y)
            for x, y in self.hasse.edges
            if not any(nx.has_path(self.hasse, z, y) for z in self.hasse.successors(x) if z != y)
        )

    def origin(self):
        return self.make(self.bottom)

    def canonical_key(self, payload):
        return b"P" + str(payload).encode()

    def leq(self, x, y):
        return x == y or nx.has_path(self.hasse, x, y)

    def _candidate_transitions(self, obj):
        for y in sorted(y for x, y in self.covers if x == obj.payload):
            yield Arrow(obj, self.make(y), None, ArrowKind.TRANSITION, f"{obj.payload}<{y}")

    def is_transition(self, f):
        x, y = f.dom.payload, f.cod.payload
        return x == y or (x, y) in self.covers

    def factor_through(self, a, b, max_len, budget):
        if a.dom != b.dom or not self.leq(a.cod.payload, b.cod.payload):
            return None
        cover_graph = nx.DiGraph(list(self.covers))
        cover_graph.add_nodes_from(self.hasse.nodes)
        chain = nx.shortest_path(cover_graph, a.cod.payload, b.cod.payload)
        if len(chain) - 1 > max_len:
            return None
        arrows = tuple(
            Arrow(self.make(x), self.make(y), None, ArrowKind.TRANSITION, f"{x}<{y}") for x, y in zip(chain, chain[1:])
        )
        return Path(a.cod, arrows)

    def encode_payload(self, payload):
        return payload

    def decode_payload(self, data):
        return int(data)

    def describe(self):
        return {
            "system": self.name,
            "points": sorted(self.hasse.nodes),
            "covers": sorted([list(c) for c in self.covers]),
            "bottom": self.bottom,
        }


# ---------------------------------------------------------------------------
# The prime monoid
# ---------------------------------------------------------------------------


class MonoidSystem(EvolutionSystem):
    """
    The multiplicative monoid of nonzero integers as a one-object category.
    Transitions are the units and multiplication by an allowed prime; map_data
    is the signed product carried by the arrow.
    """

    name = "monoid"
    candidates_distinct = True
    POINT = "*"

    def __init__(self, primes: Optional[Tuple[int, ...]] = None, node_cap=200000):
        super().__init__(node_cap)
        if primes is not None:
            primes = tuple(int(p) for p in primes)
            bad = [p for p in primes if not is_prime(p)]
            if bad:
                raise ConfigError(f"Not prime: {bad}", values=bad)
        self.primes = primes

    def origin(self):
        return self.make(self.POINT)

    def canonical_key(self, payload):
        return b"M"

    def _prime_stream(self):
        return iter(self.primes) if self.primes is not None else iter_primes()

    def identity(self, obj):
        return Arrow(obj, obj, 1, ArrowKind.ISO, "id")

    def arrow_from_map(self, dom, cod, mapping, kind=ArrowKind.ISO, label=""):
        return Arrow(dom, cod, int(mapping), kind, label)

    def compose(self, f, g):
        product = f.map_data * g.map_data
        if abs(product) == 1:
            kind = ArrowKind.ISO
        elif f.is_iso or g.is_iso:
            kind = f.kind if g.is_iso else g.kind
        else:
            kind = ArrowKind.COMPOSITE
        labels = [a.label for a in (g, f) if a.label and a.label != "id"]
        return Arrow(f.dom, g.cod, product, kind, "∘".join(labels) or "id")

    def invert(self, iso):
        if abs(iso.map_data) != 1:
            raise NonComposable("Only units are invertible")
        return iso

    def iter_isos(self, source, target, pinned=None):
        yield self.identity(source)
        yield Arrow(source, target, -1, ArrowKind.ISO, "neg")

    def _candidate_transitions(self, obj):
        for prime in self._prime_stream():
            yield Arrow(obj, obj, prime, ArrowKind.TRANSITION, f"x{prime}")

    def is_transition(self, f):
        value = abs(f.map_data)
        if value == 1:
            return True
        if self.primes is not None:
            return value in self.primes
        return is_prime(value)

    def amalgamate(self, s, t):
        if s.map_data == t.map_data:
            return self.identity(s.cod), self.identity(t.cod)
        if s.is_iso:
            return self.compose(self.invert(s), t), self.identity(t.cod)
        if t.is_iso:
            return self.identity(s.cod), self.compose(self.invert(t), s)
        return t, s

    def factor_through(self, a, b, max_len, budget):
        if b.map_data % a.map_data:
            return None
        quotient = b.map_data // a.map_data
        here = a.cod
        arrows = []
        if quotient < 0:
            arrows.append(Arrow(here, here, -1, ArrowKind.ISO, "neg"))
        for prime, exponent in sorted(self.prime_trace(Arrow(here, here, quotient)).items()):
            if not self.is_transition(Arrow(here, here, prime)):
                return None
            arrows.extend(Arrow(here, here, prime, ArrowKind.TRANSITION, f"x{prime}") for _ in range(exponent))
        path = Path(here, tuple(arrows))
        return path if path.length <= max_len else None

    @staticmethod
    def prime_trace(arrow) -> Dict[int, int]:
        """Exponents of the primes in the arrow's product"""
        remaining, trace = abs(arrow.map_data), {}
        for prime in iter_primes():
            if remaining == 1:
                break
            while remaining % prime == 0:
                trace[prime] = trace.get(prime, 0) + 1
                remaining //= prime
        return trace

    def encode_payload(self, payload):
        return payload

    def decode_payload(self, data):
        return str(data)

    def describe(self):
        return {"system": self.name, "primes": list(self.primes) if self.primes is not None else None}


# ---------------------------------------------------------------------------
# The two-transition counterexample over finite sets
# ---------------------------------------------------------------------------


class SetCounterexampleSystem(CarrierMapsMixin, EvolutionSystem):
    """
    Finite subsets of {0..9} with all bijections plus t: {0}->{0,1} (0->0) and
    s: {1}->{0,1,2} (1->1), each closed under post-composition with bijections.
    Not regular: t precomposed with the bijection {1}->{0} is not a transition.
    """

    name = "counterexample"
    candidates_distinct = True
    T_DOM, T_COD = frozenset({0}), frozenset({0, 1})
    S_DOM, S_COD = frozenset({1}), frozenset({0, 1, 2})

    def origin(self):
        return self.make(self.T_DOM)

    def make(self, payload):
        payload = frozenset(payload)
        if not payload <= set(range(COUNTEREXAMPLE_UNIVERSE)):
            raise ConfigError(f"Sets must lie inside 0..{COUNTEREXAMPLE_UNIVERSE - 1}", payload=sorted(payload))
        return super().make(payload)

    def canonical_key(self, payload):
        return b"S" + len(payload).to_bytes(2, "big")

    def carrier(self, obj):
        return tuple(sorted(obj.payload))

    def is_iso_map(self, source, target, mapping):
        return set(mapping) == set(source.payload) and sorted(mapping.values()) == sorted(target.payload)

    def iter_iso_maps(self, source, target, pinned=None):
        if len(source.payload) != len(target.payload):
            return
        pinned = dict(pinned or {})
        free_sources = [x for x in sorted(source.payload) if x not in pinned]
        free_targets = [y for y in sorted(target.payload) if y not in set(pinned.values())]
        if len(free_sources) != len(free_targets):
            return
        for image in itertools.permutations(free_targets):
            mapping = dict(pinned)
            mapping.update(zip(free_sources, image))
            yield mapping

    def t_arrow(self):
        return self.arrow_from_map(self.make(self.T_DOM), self.make(self.T_COD), {0: 0}, ArrowKind.TRANSITION, "t")

    def s_arrow(self):
        return self.arrow_from_map(self.make(self.S_DOM), self.make(self.S_COD), {1: 1}, ArrowKind.TRANSITION, "s")

    def _candidate_transitions(self, obj):
        if obj.payload == self.T_DOM:
            yield self.t_arrow()
        if obj.payload == self.S_DOM:
            yield self.s_arrow()

    def iso_variants(self, obj):
        variants = [self.identity(obj)]
        if len(obj.payload) == 1:
            for copy in (self.T_DOM, self.S_DOM):
                if obj.payload != copy:
                    (point,) = obj.payload
                    (image,) = copy
                    variants.append(self.arrow_from_map(obj, self.make(copy), {point: image}, ArrowKind.ISO, "h"))
        return variants

    def is_transition(self, f):
        mapping = dict(f.map_data)
        if set(mapping) != set(f.dom.payload) or len(set(mapping.values())) != len(mapping):
            return False
        if not set(mapping.values()) <= f.cod.payload:
            return False
        if len(f.dom.payload) == len(f.cod.payload):
            return True
        if f.dom.payload == self.T_DOM and len(f.cod.payload) == len(self.T_COD):
            return True
        return f.dom.payload == self.S_DOM and len(f.cod.payload) == len(self.S_COD)

    def encode_payload(self, payload):
        return sorted(payload)

    def decode_payload(self, data):
        return frozenset(int(x) for x in data)

    def encode_map(self, map_data):
        return [list(pair) for pair in map_data]

    def decode_map(self, data):
        return tuple(sorted((int(x), int(y)) for x, y in data))


# ---------------------------------------------------------------------------
# Matrix-chain products
# ---------------------------------------------------------------------------


class MatrixChainSystem(ThinCategoryMixin, EvolutionSystem):
    """
    States of evaluating A_1 ... A_n: a tuple of blocks, each block the tuple
    of matrix indices it multiplies, in product order. A transition multiplies
    two blocks; its cost is rows * inner * cols.
    """

    name = "chain"
    candidates_distinct = True

    def __init__(self, dims=(10, 30, 5, 60), non_adjacent=False, node_cap=200000):
        super().__init__(node_cap)
        dims = tuple(int(d) for d in dims)
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise ConfigError("dims needs at least two positive integers", dims=list(dims))
        self.dims = dims
        self.non_adjacent = non_adjacent

    @property
    def matrix_count(self):
        return len(self.dims) - 1

    def origin(self):
        return self.make(tuple((i,) for i in range(self.matrix_count)))

    def canonical_key(self, payload):
        return repr(payload).encode()

    def rows(self, block):
        return self.dims[block[0]]

    def cols(self, block):
        return self.dims[block[-1] + 1]

    def merge_cost(self, left, right):
        cost = self.rows(left) * self.cols(left) * self.cols(right)
        if cost > MAX_COST:
            raise CostOverflow("Merge cost exceeds 64 bits", cost=str(cost))
        return cost

    def _merges(self, state):
        if not self.non_adjacent:
            for i in range(len(state) - 1):
                yield i, i + 1
            return
        for i, j in itertools.permutations(range(len(state)), 2):
            if self.cols(state[i]) == self.rows(state[j]):
                yield i, j

    def _merge(self, state, i, j):
        merged = state[i] + state[j]
        rest = [block for k, block in enumerate(state) if k not in (i, j)]
        return tuple(sorted(rest + [merged]))

    def _candidate_transitions(self, obj):
        state = obj.payload
        for i, j in self._merges(state):
            cost = self.merge_cost(state[i], state[j])
            label = f"merge{i}.{j}"
            yield Arrow(obj, self.make(self._merge(state, i, j)), None, ArrowKind.TRANSITION, label, cost)

    def is_transition(self, f):
        if f.dom == f.cod:
            return True
        state = f.dom.payload
        return any(self._merge(state, i, j) == f.cod.payload for i, j in self._merges(state))

    def compose(self, f, g):
        result = super().compose(f, g)
        if result.cost > MAX_COST:
            raise CostOverflow("Path cost exceeds 64 bits", cost=str(result.cost))
        return result

    def encode_payload(self, payload):
        return {"blocks": [list(block) for block in payload]}

    def decode_payload(self, data):
        return tuple(tuple(int(i) for i in block) for block in data["blocks"])

    def describe(self):
        return {"system": self.name, "dims": list(self.dims), "non_adjacent": self.non_adjacent}


def matrix_chain_order(dims) -> Tuple[int, str]:
    """Classical O(n^3) dynamic program; returns (minimal cost, parenthesization)"""
    n = len(dims) - 1
    m = [[0] * n for _ in range(n)]
    s = [[0] * n for _ in range(n)]
    for length in range(2, n + 1):
        for i in range(n - length + 1):
            j = i + length - 1
            m[i][j] = None
            for k in range(i, j):
                q = m[i][k] + m[k + 1][j] + dims[i] * dims[k + 1] * dims[j + 1]
                if m[i][j] is None or q < m[i][j]:
                    m[i][j] = q
                    s[i][j] = k
    return (m[0][n - 1] if n else 0), _parens(s, 0, n - 1) if n else ""


def _parens(s, i, j):
    if i == j:
        return f"A{i + 1}"
    return f"({_parens(s, i, s[i][j])}·{_parens(s, s[i][j] + 1, j)})"


# ---------------------------------------------------------------------------
# Transition enumerations named after the instances
# ---------------------------------------------------------------------------


def _as_obj(system, obj_or_payload):
    return obj_or_payload if hasattr(obj_or_payload, "canon") else system.make(obj_or_payload)


def graph_transitions(system: GraphSystem, graph, budget) -> List[Arrow]:
    """Identity plus one extension per class of new-vertex neighborhoods modulo Aut(G)"""
    return system.transition_types(_as_obj(system, graph), budget)


def linorder_transitions(system: LinOrderSystem, order, budget) -> List[Arrow]:
    return system.transitions(_as_obj(system, order), budget)


def counterexample_transitions(system: SetCounterexampleSystem, subset, budget) -> List[Arrow]:
    return system.transitions(_as_obj(system, subset), budget)


def chain_transitions(system: MatrixChainSystem, state, budget) -> List[Arrow]:
    return system.transitions(_as_obj(system, state), budget)


def build_system(name, params=None, node_cap=200000) -> EvolutionSystem:
    """Instantiate a system from its CLI name and JSON-style parameters"""
    params = dict(params or {})
    if name == "graph":
        mode = params.get("mode", "directed")
        origin = params.get("origin")
        origin_graph = Graph.from_json(origin, mode) if origin else None
        return GraphSystem(mode == "directed", origin_graph, node_cap)
    if name == "substructures":
        ambient = params.get("ambient")
        return SubstructureSystem(Graph.from_json(ambient) if ambient else None, node_cap)
    if name == "linorder":
        return LinOrderSystem(node_cap)
    if name == "poset":
        if "points" in params:
            return PosetSystem(params["points"], [tuple(c) for c in params.get("covers", [])], params.get("bottom", 0), node_cap)
        return PosetSystem(node_cap=node_cap)
    if name == "monoid":
        primes = params.get("primes")
        return MonoidSystem(tuple(primes) if primes else None, node_cap)
    if name == "counterexample":
        return SetCounterexampleSystem(node_cap)
    if name == "chain":
        return MatrixChainSystem(params.get("dims", (10, 30, 5, 60)), bool(params.get("non_adjacent", False)), node_cap)
    if name == "random":
        import random_systems

        if "category" in params:
            return random_systems.FiniteCategorySystem.from_json(params["category"], node_cap)
        return random_systems.generate_system(int(params.get("seed", 0)), regular=params.get("regular", True))
    if name == "dpo":
        import dpo_engine

        return dpo_engine.system_from_params(params, node_cap)
    raise ConfigError(f"Unknown system: {str(name)[:40]}", system=str(name)[:40])
