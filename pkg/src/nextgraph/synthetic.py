"""Deterministic generators for evolving path, cycle, and ladder graphs.

Every generator starts from the smallest seed graph of its family and applies
one growth step per time index, so the snapshot at step t is a fixed,
seed-free function of t. Node ids are assigned in creation order, which makes
the registry ordering identical to creation order.
"""

import numpy as np

from .errors import ConfigError, GenerationError
from .graphs import Graph, GraphSequence, assign_degree_attributes

GROW = "grow"
GROW_WITH_REMOVAL = "grow_with_removal"
_MODES = (GROW, GROW_WITH_REMOVAL)


def _check_args(steps, mode):
    if steps < 1:
        raise ConfigError("steps must be >= 1, got %r" % (steps,))
    if mode not in _MODES:
        raise ConfigError("mode must be one of %s, got %r" % (list(_MODES), mode))


def _snapshot(node_ids, id_edges):
    index = {node_id: k for k, node_id in enumerate(node_ids)}
    n = len(node_ids)
    adjacency = np.zeros((n, n), dtype=bool)
    for u, v in id_edges:
        i, j = index[u], index[v]
        adjacency[i, j] = adjacency[j, i] = True
    return assign_degree_attributes(Graph(list(node_ids), adjacency))


def _edge_key(u, v):
    return (u, v) if u < v else (v, u)


def gen_path_sequence(steps, mode=GROW, window_size=10):
    """Evolving path: P3, then one node appended to the tail per step.

    In removal mode, every third step removes the head node and its edge
    instead of growing the tail.
    """
    _check_args(steps, mode)
    nodes = [0, 1, 2]
    edges = {(0, 1), (1, 2)}
    next_id = 3
    snaps = [_snapshot(nodes, edges)]
    for t in range(1, steps):
        if mode == GROW_WITH_REMOVAL and t % 3 == 0:
            if len(nodes) <= 2:
                raise GenerationError("removal would leave fewer than 2 nodes")
            head = nodes.pop(0)
            edges = {e for e in edges if head not in e}
        else:
            edges.add(_edge_key(nodes[-1], next_id))
            nodes.append(next_id)
            next_id += 1
        snaps.append(_snapshot(nodes, edges))
    return GraphSequence(snaps, window_size)


def gen_cycle_sequence(steps, mode=GROW, window_size=10):
    """Evolving cycle: C3, then one node spliced in per step.

    The new node is bridged to the first and last nodes of the ordering and
    the edge between those two is dropped, so each snapshot is a single cycle.
    In removal mode every third step additionally removes the first node and
    closes the cycle again with an edge between the second and last nodes.
    """
    _check_args(steps, mode)
    nodes = [0, 1, 2]
    edges = {(0, 1), (1, 2), (0, 2)}
    next_id = 3
    snaps = [_snapshot(nodes, edges)]
    for t in range(1, steps):
        first, last = nodes[0], nodes[-1]
        edges.discard(_edge_key(first, last))
        edges.add(_edge_key(first, next_id))
        edges.add(_edge_key(last, next_id))
        nodes.append(next_id)
        next_id += 1
        if mode == GROW_WITH_REMOVAL and t % 3 == 0:
            if len(nodes) <= 3:
                raise GenerationError("removal would break the cycle")
            first, second, last = nodes[0], nodes[1], nodes[-1]
            nodes.pop(0)
            edges = {e for e in edges if first not in e}
            edges.add(_edge_key(second, last))
        snaps.append(_snapshot(nodes, edges))
    return GraphSequence(snaps, window_size)


def gen_ladder_sequence(steps, window_size=10):
    """Evolving ladder: L2, then one rung attached to the tail per step.

    The rung's two nodes are joined to each other and to the two most recent
    nodes, giving 2k vertices and 3k-2 edges at ladder size k.
    """
    if steps < 1:
        raise ConfigError("steps must be >= 1, got %r" % (steps,))
    nodes = [0, 1, 2, 3]
    edges = {(0, 1), (2, 3), (0, 2), (1, 3)}
    next_id = 4
    snaps = [_snapshot(nodes, edges)]
    for _ in range(1, steps):
        a, b = nodes[-2], nodes[-1]
        u, v = next_id, next_id + 1
        edges |= {(u, v), (a, u), (b, v)}
        nodes += [u, v]
        next_id += 2
        snaps.append(_snapshot(nodes, edges))
    return GraphSequence(snaps, window_size)


def generate_scenario(family, mode, steps, window_size=10):
    """Dispatch on scenario family; ladder rejects removal mode."""
    if family == "path":
        return gen_path_sequence(steps, mode, window_size)
    if family == "cycle":
        return gen_cycle_sequence(steps, mode, window_size)
    if family == "ladder":
        if mode != GROW:
            raise ConfigError("ladder supports only grow mode")
        return gen_ladder_sequence(steps, window_size)
    raise ConfigError("unknown scenario family %r" % (family,))
