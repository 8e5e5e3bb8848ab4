import itertools

import numpy as np
import pytest

from views import GraphView, ViewLaplacian, laplacian_from_adjacency


def graph(n, edges, weights=None) -> GraphView:
    return GraphView.from_edges(n, edges, weights)


def clique_edges(nodes):
    return list(itertools.combinations(nodes, 2))


def as_view(g: GraphView, index: int = 0) -> ViewLaplacian:
    return ViewLaplacian(laplacian_from_adjacency(g.adjacency), ("graph", index), g.adjacency)


def random_connected_graph(rng, n, density, weighted=False) -> GraphView:
    """Random spanning path plus independent extra edges."""
    order = rng.permutation(n)
    edges = {(min(a, b), max(a, b)) for a, b in zip(order[:-1], order[1:])}
    rows, cols = np.triu_indices(n, k=1)
    hit = rng.random(len(rows)) < density
    edges |= {(int(a), int(b)) for a, b in zip(rows[hit], cols[hit])}
    edges = sorted(edges)
    weights = rng.uniform(0.5, 2.0, len(edges)) if weighted else None
    return graph(n, edges, weights)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def triangles():
    """Two disjoint triangles on 6 nodes."""
    return graph(6, clique_edges([0, 1, 2]) + clique_edges([3, 4, 5]))


@pytest.fixture
def k4():
    return graph(4, clique_edges(range(4)))


@pytest.fixture
def single_edge():
    return graph(2, [(0, 1)])

