import math
from itertools import combinations_with_replacement, product

import networkx as nx
import pytest

from graphnls.data import catalog
from graphnls.data.metric_graph import (
    MU_HALF_LINE,
    MU_LINE,
    Edge,
    MetricGraph,
    bridges,
    critical_mass,
    has_cycle_covering,
    make_bridged_family,
    terminal_edges,
    total_length,
)
from graphnls.errors import GraphError


def test_total_length_examples(interval, dumbbell):
    assert total_length(interval) == 1.0
    assert total_length(catalog.loop(2 * math.pi)) == pytest.approx(2 * math.pi)
    assert total_length(dumbbell) == pytest.approx(5.0)


def test_terminal_edges(interval, unit_loop, tadpole):
    assert terminal_edges(interval) == [0]
    assert terminal_edges(unit_loop) == []
    assert terminal_edges(tadpole) == [1]


def test_bridges(interval, unit_loop, dumbbell):
    assert bridges(interval) == [0]
    assert bridges(unit_loop) == []
    assert bridges(dumbbell) == [2]


def test_cycle_covering(unit_loop, dumbbell):
    assert has_cycle_covering(unit_loop)
    assert not has_cycle_covering(dumbbell)
    assert has_cycle_covering(catalog.two_triangles())
    assert has_cycle_covering(catalog.theta())


def test_parallel_edges_are_not_bridges():
    g = MetricGraph.from_edges([("a", "b", 1.0), ("a", "b", 2.0), ("b", "c", 1.0)])
    assert bridges(g) == [2]


def _brute_force_bridges(g):
    found = []
    for e in g.edges:
        G = g.to_networkx()
        G.remove_edge(e.a, e.b, key=e.id)
        if not nx.is_connected(G):
            found.append(e.id)
    return found


def _small_graphs():
    """Every connected multigraph on up to 3 vertices with at most 4 edges, plus random ones up to 6 edges"""
    pairs = [(0, 0), (0, 1), (1, 1), (1, 2), (0, 2), (2, 2)]
    for n_edges in range(1, 5):
        for chosen in combinations_with_replacement(pairs, n_edges):
            try:
                yield MetricGraph.from_edges([(a, b, 1.0) for a, b in chosen])
            except GraphError:
                continue
    for n, seed in product(range(1, 7), range(6)):
        yield catalog.random_graph(n, seed=seed)


def test_bridges_match_edge_removal_connectivity():
    checked = 0
    for g in _small_graphs():
        expected = _brute_force_bridges(g)
        assert bridges(g) == expected, g.to_payload()
        assert has_cycle_covering(g) == (not expected)
        checked += 1
    assert checked > 50


def test_critical_mass(interval, unit_loop, dumbbell):
    assert critical_mass(interval) == pytest.approx(1.36035, abs=1e-5)
    assert critical_mass(interval) == MU_HALF_LINE
    assert critical_mass(unit_loop) == pytest.approx(2.72070, abs=1e-5)
    assert critical_mass(dumbbell) == MU_LINE


def test_make_bridged_family_two_loops():
    g = make_bridged_family(catalog.loop(), catalog.loop(), 0, 0, 3.0)
    assert total_length(g) == pytest.approx(5.0)
    assert bridges(g) == [2]
    assert g.edge(2).length == 3.0


def test_make_bridged_family_figure_eights():
    f8 = catalog.figure_eight()
    g = make_bridged_family(f8, f8, 0, 0, 0.1)
    new_edge = max(e.id for e in g.edges)
    assert new_edge in bridges(g)
    assert total_length(g) == pytest.approx(total_length(f8) * 2 + 0.1)


def test_make_bridged_family_rejects_bad_inputs(interval, unit_loop):
    with pytest.raises(GraphError):
        make_bridged_family(unit_loop, unit_loop, 5, 0, 1.0)
    with pytest.raises(GraphError):
        make_bridged_family(interval, unit_loop, 0, 0, 1.0)


def test_invalid_graphs_are_rejected():
    with pytest.raises(GraphError):
        MetricGraph.from_edges([("a", "b", 0.0)])
    with pytest.raises(GraphError):
        MetricGraph.from_edges([("a", "b", float("inf"))])
    with pytest.raises(GraphError):
        MetricGraph.from_edges([("a", "b", 1.0), ("c", "d", 1.0)])
    with pytest.raises(GraphError):
        MetricGraph(vertices=(0, 1), edges=(Edge(0, 0, 1, 1.0), Edge(0, 1, 0, 1.0)))


def test_degree_counts_loops_twice(tadpole):
    assert tadpole.degree(0) == 3
    assert tadpole.degree(1) == 1


def test_scaled_graph():
    g = catalog.star().scaled(2.0)
    assert total_length(g) == pytest.approx(6.0)
    with pytest.raises(GraphError):
        g.scaled(0.0)


def test_catalog_lookup():
    assert catalog.named_graph("loop_2pi").edges[0].length == pytest.approx(2 * math.pi)
    with pytest.raises(GraphError):
        catalog.named_graph("nope")


def test_random_graphs_are_reproducible():
    a = catalog.random_graph(6, seed=3)
    b = catalog.random_graph(6, seed=3)
    assert a.to_payload() == b.to_payload()
    assert len(a.edges) == 6
