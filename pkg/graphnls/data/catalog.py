"""
Graph Catalog
Named compact graphs used by the CLI, the web API and the tests
"""

import math
from typing import Callable, Dict, Sequence

import numpy as np

from graphnls.data.metric_graph import MetricGraph, make_bridged_family
from graphnls.errors import GraphError


def interval(length: float = 1.0) -> MetricGraph:
    return MetricGraph.from_edges([("a", "b", length)], name="interval")


def loop(length: float = 1.0) -> MetricGraph:
    return MetricGraph.from_edges([("o", "o", length)], name="loop")


def star(lengths: Sequence[float] = (1.0, 1.0, 1.0)) -> MetricGraph:
    return MetricGraph.from_edges([("c", f"t{i}", l) for i, l in enumerate(lengths)],
                                  name=f"star{len(lengths)}")


def cycle(lengths: Sequence[float] = (1.0, 1.0, 1.0)) -> MetricGraph:
    n = len(lengths)
    return MetricGraph.from_edges([(f"v{i}", f"v{(i + 1) % n}", l) for i, l in enumerate(lengths)],
                                  name=f"cycle{n}")


def flower(lengths: Sequence[float] = (1.0, 1.0, 1.0)) -> MetricGraph:
    """Loops glued at one vertex"""
    return MetricGraph.from_edges([("o", "o", l) for l in lengths], name=f"flower{len(lengths)}")


def figure_eight(l1: float = 1.0, l2: float = 1.0) -> MetricGraph:
    g = flower((l1, l2))
    return MetricGraph(g.vertices, g.edges, name="figure_eight", labels=g.labels)


def tadpole(loop_length: float = 1.0, tail: float = 1.0) -> MetricGraph:
    """Cycle with a pendant (terminal) edge"""
    return MetricGraph.from_edges([("o", "o", loop_length), ("o", "t", tail)], name="tadpole")


def theta(lengths: Sequence[float] = (1.0, 1.0, 1.0)) -> MetricGraph:
    """Parallel edges between two vertices"""
    return MetricGraph.from_edges([("a", "b", l) for l in lengths], name=f"theta{len(lengths)}")


def dumbbell(loop_1: float = 1.0, bridge: float = 1.0, loop_2: float = 1.0) -> MetricGraph:
    g = make_bridged_family(loop(loop_1), loop(loop_2), 0, 0, bridge)
    return MetricGraph(g.vertices, g.edges, name="dumbbell", labels=g.labels)


def two_triangles() -> MetricGraph:
    """Two triangles sharing a vertex"""
    return MetricGraph.from_edges(
        [("c", "a1", 1.0), ("a1", "b1", 1.0), ("b1", "c", 1.0),
         ("c", "a2", 1.0), ("a2", "b2", 1.0), ("b2", "c", 1.0)],
        name="two_triangles",
    )


def random_graph(n_edges: int, seed: int = 0, min_length: float = 0.3,
                 max_length: float = 2.0) -> MetricGraph:
    """Connected random multigraph: a random tree plus random extra edges (loops allowed)"""
    if n_edges < 1:
        raise GraphError("random graphs need at least one edge")
    rng = np.random.default_rng(seed)
    n_vertices = int(rng.integers(2, n_edges + 2)) if n_edges > 1 else 2
    n_vertices = min(n_vertices, n_edges + 1)
    edges = []
    for v in range(1, n_vertices):
        edges.append((int(rng.integers(0, v)), v))
    while len(edges) < n_edges:
        edges.append((int(rng.integers(0, n_vertices)), int(rng.integers(0, n_vertices))))
    lengths = rng.uniform(min_length, max_length, size=len(edges))
    g = MetricGraph.from_edges([(a, b, float(l)) for (a, b), l in zip(edges, lengths)],
                               name=f"random{n_edges}s{seed}")
    return g


CATALOG: Dict[str, Callable[[], MetricGraph]] = {
    "interval": interval,
    "loop": loop,
    "star3": star,
    "cycle3": cycle,
    "figure_eight": figure_eight,
    "flower3": flower,
    "tadpole": tadpole,
    "theta3": theta,
    "dumbbell": dumbbell,
    "two_triangles": two_triangles,
    "loop_2pi": lambda: loop(2 * math.pi),
}


def named_graph(name: str) -> MetricGraph:
    try:
        return CATALOG[name]()
    except KeyError:
        raise GraphError(f"unknown catalog graph {name!r}; choose one of {sorted(CATALOG)}")
