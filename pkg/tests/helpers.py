"""Shared builders for tests."""

import numpy as np

from nextgraph.graphs import Graph


def graph_from_edges(n, edges, node_ids=None):
    adjacency = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        adjacency[i, j] = adjacency[j, i] = True
    if node_ids is None:
        node_ids = list(range(n))
    return Graph(node_ids, adjacency)


def random_graph(rng, n, p=0.3, node_ids=None):
    upper = rng.random((n, n)) < p
    adjacency = np.triu(upper, k=1)
    adjacency = adjacency | adjacency.T
    if node_ids is None:
        node_ids = list(range(n))
    return Graph(node_ids, adjacency)


def path_graph(n):
    return graph_from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    edges = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
    return graph_from_edges(n, edges)


def star_graph(n_leaves):
    return graph_from_edges(n_leaves + 1, [(0, i) for i in range(1, n_leaves + 1)])


def permute_graph(graph, perm):
    """Relabel nodes by perm, keeping attributes attached to their nodes/edges."""
    perm = list(perm)
    adjacency = graph.adjacency[np.ix_(perm, perm)]
    node_attrs = graph.node_attrs[perm]
    inv = {old: new for new, old in enumerate(perm)}
    pairs = [tuple(sorted((inv[i], inv[j]))) for i, j in graph.edges]
    order = sorted(range(len(pairs)), key=pairs.__getitem__)
    edge_attrs = graph.edge_attrs[order] if graph.num_edges else graph.edge_attrs
    return Graph(list(range(graph.num_nodes)), adjacency, node_attrs, edge_attrs)
