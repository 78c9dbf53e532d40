"""
Metric Graph Model
Compact metric graphs (multigraphs with loops) and the topological
predicates the threshold results depend on
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx

from graphnls.errors import GraphError

logger = logging.getLogger(__name__)

# Critical masses for p = 6: half-line and real line
MU_HALF_LINE = math.pi * math.sqrt(3) / 4
MU_LINE = math.pi * math.sqrt(3) / 2


@dataclass(frozen=True)
class Edge:
    """A metric edge [0, length] from vertex a to vertex b"""
    id: int
    a: int
    b: int
    length: float

    @property
    def is_loop(self) -> bool:
        return self.a == self.b


@dataclass(frozen=True)
class MetricGraph:
    """Immutable connected compact metric graph"""
    vertices: Tuple[int, ...]
    edges: Tuple[Edge, ...]
    name: str = "graph"
    labels: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.edges:
            raise GraphError(f"{self.name}: a compact graph needs at least one edge")
        if tuple(sorted(self.vertices)) != tuple(range(len(self.vertices))):
            raise GraphError(f"{self.name}: vertex ids must be 0..{len(self.vertices) - 1}")

        seen = set()
        for e in self.edges:
            if e.id in seen:
                raise GraphError(f"{self.name}: duplicate edge id {e.id}")
            seen.add(e.id)
            if not (math.isfinite(e.length) and e.length > 0):
                raise GraphError(f"{self.name}: edge {e.id} has length {e.length}, expected a positive finite value")
            if e.a not in self.vertices or e.b not in self.vertices:
                raise GraphError(f"{self.name}: edge {e.id} references an unknown vertex")

        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=lambda e: e.id)))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(v) for v in self.vertices))

        if not nx.is_connected(self.to_networkx()):
            raise GraphError(f"{self.name}: graph is not connected")

    @classmethod
    def from_edges(cls, edges: Sequence[Tuple[object, object, float]], name: str = "graph",
                   edge_ids: Optional[Sequence[int]] = None) -> "MetricGraph":
        """Build a graph from (vertex_a, vertex_b, length) triples.

        Vertex labels may be any hashable; they are numbered in order of first
        appearance so the numbering is reproducible.
        """
        index: Dict[object, int] = {}
        for a, b, _ in edges:
            for v in (a, b):
                if v not in index:
                    index[v] = len(index)
        ids = list(edge_ids) if edge_ids is not None else list(range(len(edges)))
        built = tuple(
            Edge(id=int(i), a=index[a], b=index[b], length=float(length))
            for i, (a, b, length) in zip(ids, edges)
        )
        return cls(
            vertices=tuple(range(len(index))),
            edges=built,
            name=name,
            labels=tuple(str(v) for v in index),
        )

    def to_networkx(self) -> nx.MultiGraph:
        G = nx.MultiGraph()
        G.add_nodes_from(self.vertices)
        for e in self.edges:
            G.add_edge(e.a, e.b, key=e.id, length=e.length)
        return G

    def edge(self, edge_id: int) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise GraphError(f"{self.name}: no edge with id {edge_id}")

    def degree(self, v: int) -> int:
        """Number of edge ends at v (a loop counts twice)"""
        return sum((e.a == v) + (e.b == v) for e in self.edges)

    def incident(self, v: int) -> List[Edge]:
        return [e for e in self.edges if e.a == v or e.b == v]

    @property
    def min_edge_length(self) -> float:
        return min(e.length for e in self.edges)

    def scaled(self, t: float) -> "MetricGraph":
        """Uniform metric dilation by t > 0"""
        if not t > 0:
            raise GraphError(f"scaling factor must be positive, got {t}")
        return MetricGraph(
            vertices=self.vertices,
            edges=tuple(Edge(e.id, e.a, e.b, e.length * t) for e in self.edges),
            name=f"{self.name}x{t:g}",
            labels=self.labels,
        )

    def to_payload(self) -> dict:
        """Structured-object form of the graph description"""
        return {
            "name": self.name,
            "edges": [
                {"id": e.id, "a": self.labels[e.a], "b": self.labels[e.b], "length": e.length}
                for e in self.edges
            ],
        }


def total_length(g: MetricGraph) -> float:
    return math.fsum(e.length for e in g.edges)


def terminal_edges(g: MetricGraph) -> List[int]:
    """Edges with an endpoint of degree 1"""
    degree = {v: g.degree(v) for v in g.vertices}
    return [e.id for e in g.edges if not e.is_loop and (degree[e.a] == 1 or degree[e.b] == 1)]


def bridges(g: MetricGraph) -> List[int]:
    """Edges whose removal disconnects the graph.

    Lowpoint DFS keyed on edge ids rather than parent vertices, so a parallel
    edge closes a cycle with its twin. Self-loops never are bridges.
    """
    adjacency: Dict[int, List[Tuple[int, int]]] = {v: [] for v in g.vertices}
    for e in g.edges:
        if e.is_loop:
            continue
        adjacency[e.a].append((e.b, e.id))
        adjacency[e.b].append((e.a, e.id))

    order: Dict[int, int] = {}
    low: Dict[int, int] = {}
    found = []
    counter = 0

    for root in g.vertices:
        if root in order:
            continue
        order[root] = low[root] = counter
        counter += 1
        # (vertex, edge id used to enter it, neighbour cursor)
        stack = [(root, -1, iter(adjacency[root]))]
        while stack:
            v, via, it = stack[-1]
            advanced = False
            for w, eid in it:
                if eid == via:
                    continue
                if w in order:
                    low[v] = min(low[v], order[w])
                else:
                    order[w] = low[w] = counter
                    counter += 1
                    stack.append((w, eid, iter(adjacency[w])))
                    advanced = True
                    break
            if advanced:
                continue
            stack.pop()
            if stack:
                parent = stack[-1][0]
                low[parent] = min(low[parent], low[v])
                if low[v] > order[parent]:
                    found.append(via)

    return sorted(found)


def has_cycle_covering(g: MetricGraph) -> bool:
    """Every edge lies on a cycle, i.e. the graph is bridgeless"""
    return not bridges(g)


def critical_mass(g: MetricGraph) -> float:
    """Critical mass for p = 6: mu_R+ with a terminal edge, mu_R otherwise"""
    return MU_HALF_LINE if terminal_edges(g) else MU_LINE


def make_bridged_family(g1: MetricGraph, g2: MetricGraph, attach_1: int, attach_2: int,
                        ell: float) -> MetricGraph:
    """Join g1 and g2 by a new bridging edge of length ell between the attach points"""
    if attach_1 not in g1.vertices:
        raise GraphError(f"attach vertex {attach_1} is not a vertex of {g1.name}")
    if attach_2 not in g2.vertices:
        raise GraphError(f"attach vertex {attach_2} is not a vertex of {g2.name}")
    for g in (g1, g2):
        if terminal_edges(g):
            raise GraphError(f"{g.name} has a terminal edge; bridged families need graphs without one")

    shift_v = len(g1.vertices)
    shift_e = max(e.id for e in g1.edges) + 1
    edges = list(g1.edges)
    edges.extend(Edge(e.id + shift_e, e.a + shift_v, e.b + shift_v, e.length) for e in g2.edges)
    bridge_id = max(e.id for e in edges) + 1
    edges.append(Edge(bridge_id, attach_1, attach_2 + shift_v, float(ell)))

    return MetricGraph(
        vertices=tuple(range(shift_v + len(g2.vertices))),
        edges=tuple(edges),
        name=f"{g1.name}-{g2.name}[{ell:g}]",
        labels=tuple(f"L{l}" for l in g1.labels) + tuple(f"R{l}" for l in g2.labels),
    )
