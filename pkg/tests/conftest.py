import math

import pytest

from graphnls.data import catalog
from graphnls.data.metric_graph import MetricGraph


@pytest.fixture
def interval():
    return catalog.interval()


@pytest.fixture
def unit_loop():
    return catalog.loop()


@pytest.fixture
def dumbbell():
    return catalog.dumbbell(1.0, 3.0, 1.0)


@pytest.fixture
def tadpole():
    return catalog.tadpole()


@pytest.fixture
def star3():
    return catalog.star()


def graph_corpus():
    """Stars, dumbbells, figure-eights, cycles and random graphs with at most 8 edges"""
    graphs = [
        catalog.interval(),
        catalog.interval(2.5),
        catalog.loop(),
        catalog.loop(2 * math.pi),
        catalog.star(),
        catalog.star((0.5, 1.0, 2.0)),
        catalog.star((1.0, 1.0, 1.0, 1.0, 1.0)),
        catalog.cycle(),
        catalog.figure_eight(),
        catalog.figure_eight(1.0, 3.0),
        catalog.flower(),
        catalog.tadpole(),
        catalog.theta(),
        catalog.dumbbell(),
        catalog.dumbbell(1.0, 0.2, 2.0),
        catalog.two_triangles(),
    ]
    graphs.extend(catalog.random_graph(n, seed=s) for n, s in ((3, 1), (4, 2), (5, 3), (6, 4), (7, 5), (8, 6)))
    return graphs


@pytest.fixture(scope="session")
def corpus():
    graphs = graph_corpus()
    assert len(graphs) >= 20
    assert all(isinstance(g, MetricGraph) for g in graphs)
    return graphs
