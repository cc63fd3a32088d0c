"""
Finite simple graphs used as object payloads.

A Graph is an immutable, hashable record: sorted vertex tuple plus sorted edge
tuple. Undirected edges are stored once as (min, max). Loops are rejected.

Canonical keys come from color refinement followed by either exhaustive
labeling inside the refined cells (small graphs) or an
individualization-refinement search (larger graphs). Isomorphism and embedding
search is delegated to networkx's VF2 matchers.
"""
import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple

import networkx as nx
from networkx.algorithms import isomorphism

from evolution_errors import BudgetExceeded, ConfigError

logger = logging.getLogger(__name__)

EMPTY_GRAPH_KEY = b"\x00"
EXHAUSTIVE_LABELING_LIMIT = 8


@dataclass(frozen=True)
class Graph:
    vertices: Tuple[int, ...] = ()
    edges: Tuple[Tuple[int, int], ...] = ()
    directed: bool = True

    @classmethod
    def make(cls, vertices: Iterable[int], edges: Iterable[Tuple[int, int]] = (), directed=True):
        """Build a normalized graph; edge endpoints are added as vertices"""
        vertex_set = set(int(v) for v in vertices)
        edge_set = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ConfigError(f"Loop at vertex {u} in a simple graph", vertex=u)
            vertex_set.update((u, v))
            edge_set.add((u, v) if directed else (min(u, v), max(u, v)))
        return cls(tuple(sorted(vertex_set)), tuple(sorted(edge_set)), directed)

    @property
    def order(self):
        return len(self.vertices)

    @property
    def mode(self):
        return "directed" if self.directed else "undirected"

    @cached_property
    def _edge_set(self):
        return frozenset(self.edges)

    @cached_property
    def out_neighbors(self) -> Dict[int, frozenset]:
        adjacency = {v: set() for v in self.vertices}
        for u, v in self.edges:
            adjacency[u].add(v)
            if not self.directed:
                adjacency[v].add(u)
        return {v: frozenset(nbrs) for v, nbrs in adjacency.items()}

    @cached_property
    def in_neighbors(self) -> Dict[int, frozenset]:
        if not self.directed:
            return self.out_neighbors
        adjacency = {v: set() for v in self.vertices}
        for u, v in self.edges:
            adjacency[v].add(u)
        return {v: frozenset(nbrs) for v, nbrs in adjacency.items()}

    def has_edge(self, u, v):
        if self.directed:
            return (u, v) in self._edge_set
        return (min(u, v), max(u, v)) in self._edge_set

    def fresh_vertex(self, floor=0):
        """Smallest natural number >= floor not used as a vertex"""
        used = set(self.vertices)
        candidate = floor
        while candidate in used:
            candidate += 1
        return candidate

    def induced(self, keep: Iterable[int]):
        keep = set(keep)
        return Graph.make(keep, [(u, v) for u, v in self.edges if u in keep and v in keep], self.directed)

    def relabel(self, mapping: Mapping[int, int]):
        return Graph.make((mapping[v] for v in self.vertices), ((mapping[u], mapping[v]) for u, v in self.edges), self.directed)

    def with_vertex(self, new, out_nbrs=(), in_nbrs=()):
        """Add vertex `new` with edges new->out_nbrs and in_nbrs->new"""
        if new in self.vertices:
            raise ConfigError(f"Vertex {new} already present", vertex=new)
        extra = [(new, w) for w in out_nbrs] + [(w, new) for w in in_nbrs]
        return Graph.make(self.vertices + (new,), self.edges + tuple(extra), self.directed)

    def to_json(self):
        return {"mode": self.mode, "vertices": list(self.vertices), "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, data, default_mode="directed"):
        if not isinstance(data, dict):
            raise ConfigError("Graph JSON must be an object")
        mode = data.get("mode", default_mode)
        if mode not in ("directed", "undirected"):
            raise ConfigError(f"Unknown graph mode: {mode}", mode=str(mode)[:20])
        edges = data.get("edges", [])
        if any(len(e) != 2 for e in edges):
            raise ConfigError("Graph edges must be pairs")
        return cls.make(data.get("vertices", []), (tuple(e) for e in edges), mode == "directed")

    def to_networkx(self, pins: Optional[Mapping[int, int]] = None):
        nx_graph = nx.DiGraph() if self.directed else nx.Graph()
        pins = pins or {}
        for v in self.vertices:
            nx_graph.add_node(v, pin=pins.get(v))
        nx_graph.add_edges_from(self.edges)
        return nx_graph

    def to_dot(self, name="G"):
        arrow = "->" if self.directed else "--"
        keyword = "digraph" if self.directed else "graph"
        lines = [f"{keyword} {name} {{"]
        lines.extend(f"  {v};" for v in self.vertices)
        lines.extend(f"  {u} {arrow} {v};" for u, v in self.edges)
        lines.append("}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Canonical labeling
# ---------------------------------------------------------------------------


def refine_colors(graph: Graph, colors: Mapping[int, int]) -> Dict[int, int]:
    """Color refinement until the partition is stable; colors are ranks of signatures"""
    current = dict(colors)
    while True:
        signatures = {
            v: (
                current[v],
                tuple(sorted(current[w] for w in graph.out_neighbors[v])),
                tuple(sorted(current[w] for w in graph.in_neighbors[v])) if graph.directed else (),
            )
            for v in graph.vertices
        }
        ranks = {sig: rank for rank, sig in enumerate(sorted(set(signatures.values())))}
        refined = {v: ranks[signatures[v]] for v in graph.vertices}
        if len(set(refined.values())) == len(set(current.values())):
            return refined
        current = refined


def _initial_colors(graph: Graph, marks: Optional[Mapping[int, int]]):
    marks = marks or {}
    distinct = sorted(set(marks.get(v, 0) for v in graph.vertices))
    ranks = {m: i for i, m in enumerate(distinct)}
    return {v: ranks[marks.get(v, 0)] for v in graph.vertices}


def _encode(graph: Graph, order, marks: Mapping[int, int]) -> bytes:
    n = len(order)
    header = bytes([1 if graph.directed else 0]) + n.to_bytes(2, "big")
    mark_bytes = bytes(marks.get(v, 0) % 256 for v in order)
    if graph.directed:
        bits = [graph.has_edge(order[i], order[j]) for i in range(n) for j in range(n)]
    else:
        bits = [graph.has_edge(order[i], order[j]) for i in range(n) for j in range(i + 1, n)]
    packed = 0
    for bit in bits:
        packed = (packed << 1) | int(bit)
    return header + mark_bytes + packed.to_bytes((len(bits) + 7) // 8, "big")


def _cells(colors: Mapping[int, int]):
    by_color = {}
    for v, c in colors.items():
        by_color.setdefault(c, []).append(v)
    return [sorted(by_color[c]) for c in sorted(by_color)]


def canonical_labeling(graph: Graph, marks=None, node_cap=200000) -> Tuple[bytes, Tuple[int, ...]]:
    """Return (key, vertex order) such that isomorphic marked graphs get equal keys"""
    marks = dict(marks or {})
    if graph.order == 0:
        return EMPTY_GRAPH_KEY, ()
    colors = refine_colors(graph, _initial_colors(graph, marks))
    if graph.order <= EXHAUSTIVE_LABELING_LIMIT:
        return _exhaustive_labeling(graph, colors, marks, node_cap)
    return _search_labeling(graph, colors, marks, node_cap)


def _exhaustive_labeling(graph, colors, marks, node_cap):
    best = None
    cells = _cells(colors)
    for count, choice in enumerate(itertools.product(*(itertools.permutations(cell) for cell in cells))):
        if count >= node_cap:
            raise BudgetExceeded("labeling_nodes", node_cap)
        order = tuple(v for block in choice for v in block)
        code = _encode(graph, order, marks)
        if best is None or code < best[0]:
            best = (code, order)
    return best


def _search_labeling(graph, colors, marks, node_cap):
    best = [None]
    visited = [0]

    def descend(current):
        visited[0] += 1
        if visited[0] > node_cap:
            raise BudgetExceeded("labeling_nodes", node_cap)
        cells = _cells(current)
        target = next((cell for cell in cells if len(cell) > 1), None)
        if target is None:
            order = tuple(cell[0] for cell in cells)
            code = _encode(graph, order, marks)
            if best[0] is None or code < best[0][0]:
                best[0] = (code, order)
            return
        for v in _twin_representatives(graph, target):
            individualized = {u: 2 * c + (0 if u == v else 1) for u, c in current.items()}
            descend(refine_colors(graph, individualized))

    descend(colors)
    return best[0]


def _twin_representatives(graph, cell):
    """
    One vertex per twin class of the cell. Twins are swapped by a transposition
    that fixes every other vertex, so their search subtrees give the same code.
    """
    representatives = []
    for v in cell:
        if not any(_are_twins(graph, u, v) for u in representatives):
            representatives.append(v)
    return representatives


def _are_twins(graph, u, v):
    if graph.has_edge(u, v) != graph.has_edge(v, u):
        return False
    if graph.out_neighbors[u] - {v} != graph.out_neighbors[v] - {u}:
        return False
    return graph.in_neighbors[u] - {v} == graph.in_neighbors[v] - {u}


def canonical_key(graph: Graph, marks=None, node_cap=200000) -> bytes:
    return canonical_labeling(graph, marks, node_cap)[0]


def canonical_form(graph: Graph, node_cap=200000) -> Graph:
    """Relabel the graph onto 0..n-1 in canonical order"""
    _, order = canonical_labeling(graph, node_cap=node_cap)
    return graph.relabel({v: i for i, v in enumerate(order)})


# ---------------------------------------------------------------------------
# Isomorphism and embedding search
# ---------------------------------------------------------------------------


def _matcher(big: Graph, small: Graph, pinned: Optional[Mapping[int, int]]):
    pinned = dict(pinned or {})
    big_nx = big.to_networkx({target: target for target in pinned.values()})
    small_nx = small.to_networkx(pinned)
    node_match = isomorphism.categorical_node_match("pin", None)
    if big.directed:
        return isomorphism.DiGraphMatcher(big_nx, small_nx, node_match=node_match)
    return isomorphism.GraphMatcher(big_nx, small_nx, node_match=node_match)


def iter_isomorphisms(source: Graph, target: Graph, pinned=None) -> Iterator[Dict[int, int]]:
    """Yield vertex bijections source -> target preserving edges, agreeing with `pinned`"""
    if source.order != target.order or len(source.edges) != len(target.edges) or source.directed != target.directed:
        return
    matcher = _matcher(target, source, pinned)
    for target_to_source in matcher.isomorphisms_iter():
        yield {s: t for t, s in target_to_source.items()}


def iter_embeddings(small: Graph, big: Graph, pinned=None) -> Iterator[Dict[int, int]]:
    """Yield induced embeddings small -> big agreeing with `pinned`"""
    if small.order > big.order or small.directed != big.directed:
        return
    matcher = _matcher(big, small, pinned)
    for big_to_small in matcher.subgraph_isomorphisms_iter():
        yield {s: b for b, s in big_to_small.items()}


def iter_monomorphisms(pattern: Graph, host: Graph) -> Iterator[Dict[int, int]]:
    """Yield injective edge-preserving maps pattern -> host (not necessarily induced)"""
    if pattern.order > host.order:
        return
    host_nx, pattern_nx = host.to_networkx(), pattern.to_networkx()
    if host.directed:
        matcher = isomorphism.DiGraphMatcher(host_nx, pattern_nx)
    else:
        matcher = isomorphism.GraphMatcher(host_nx, pattern_nx)
    for host_to_pattern in matcher.subgraph_monomorphisms_iter():
        yield {p: h for h, p in host_to_pattern.items()}


def is_isomorphism(source: Graph, target: Graph, mapping: Mapping[int, int]) -> bool:
    """Check that `mapping` is a bijection source -> target carrying edges onto edges"""
    if set(mapping) != set(source.vertices) or sorted(mapping.values()) != list(target.vertices):
        return False
    if len(source.edges) != len(target.edges):
        return False
    return all(target.has_edge(mapping[u], mapping[v]) for u, v in source.edges)


def is_induced_embedding(source: Graph, target: Graph, mapping: Mapping[int, int]) -> bool:
    if set(mapping) != set(source.vertices) or len(set(mapping.values())) != len(mapping):
        return False
    if not set(mapping.values()) <= set(target.vertices):
        return False
    return all(
        source.has_edge(u, v) == target.has_edge(mapping[u], mapping[v])
        for u in source.vertices
        for v in source.vertices
        if u != v
    )
