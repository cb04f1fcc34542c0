"""Graph snapshots, the node-ordering registry, and adjacency-vector conversions.

A graph is the triplet (adjacency, node attributes, edge attributes) over an
ordered list of stable node ids. Sequences of snapshots share one global
registry that fixes a node ordering across time: nodes keep their position for
as long as they exist, and nodes appearing later always sort after nodes that
appeared earlier.
"""

import json

import numpy as np

from .errors import DataError, OrderingError


def _canonical_edges(adjacency):
    """Upper-triangle edge index pairs (i, j), i < j, in lexicographic order."""
    iu, ju = np.triu_indices(adjacency.shape[0], k=1)
    mask = adjacency[iu, ju]
    return list(zip(iu[mask].tolist(), ju[mask].tolist()))


class Graph:
    """Undirected, unweighted graph with real-vector node and edge attributes.

    Row/column i of `adjacency` belongs to `node_ids[i]`. Edge attributes are
    aligned with the canonical edge order: (i, j) pairs with i < j, sorted
    lexicographically. Instances are immutable after construction.
    """

    def __init__(self, node_ids, adjacency, node_attrs=None, edge_attrs=None):
        node_ids = list(node_ids)
        if len(set(node_ids)) != len(node_ids):
            raise DataError("duplicate node ids")
        n = len(node_ids)

        adjacency = np.asarray(adjacency, dtype=bool).copy()
        if adjacency.shape != (n, n):
            raise DataError(
                "adjacency shape %s does not match %d nodes" % (adjacency.shape, n)
            )
        if n and adjacency.diagonal().any():
            raise DataError("self loops are not allowed")
        if not np.array_equal(adjacency, adjacency.T):
            raise DataError("adjacency must be symmetric")

        m = int(np.triu(adjacency, k=1).sum())

        if node_attrs is None:
            node_attrs = np.zeros((n, 0))
        node_attrs = np.asarray(node_attrs, dtype=np.float64).copy()
        if node_attrs.ndim == 1:
            node_attrs = node_attrs[:, None]
        if node_attrs.shape[0] != n:
            raise DataError("need one attribute row per node")

        if edge_attrs is None:
            edge_attrs = np.zeros((m, 0))
        edge_attrs = np.asarray(edge_attrs, dtype=np.float64).copy()
        if edge_attrs.ndim == 1:
            edge_attrs = edge_attrs[:, None]
        if edge_attrs.shape[0] != m:
            raise DataError(
                "expected %d edge attribute rows, got %d" % (m, edge_attrs.shape[0])
            )

        for arr in (adjacency, node_attrs, edge_attrs):
            arr.setflags(write=False)

        self.node_ids = node_ids
        self.adjacency = adjacency
        self.node_attrs = node_attrs
        self.edge_attrs = edge_attrs
        self.num_nodes = n
        self.num_edges = m

    @property
    def edges(self):
        """Edge list as index pairs (i, j), i < j, lexicographic order."""
        return _canonical_edges(self.adjacency)

    @property
    def degrees(self):
        return self.adjacency.sum(axis=1).astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.node_ids == other.node_ids
            and np.array_equal(self.adjacency, other.adjacency)
            and np.array_equal(self.node_attrs, other.node_attrs)
            and np.array_equal(self.edge_attrs, other.edge_attrs)
        )

    __hash__ = None

    def __repr__(self):
        return "Graph(n=%d, m=%d)" % (self.num_nodes, self.num_edges)

    def to_json_obj(self):
        return {
            "nodes": list(self.node_ids),
            "edges": [[i, j] for i, j in self.edges],
            "node_attrs": self.node_attrs.tolist(),
            "edge_attrs": self.edge_attrs.tolist(),
        }

    @classmethod
    def from_json_obj(cls, obj, line=None):
        try:
            nodes = obj["nodes"]
            edges = obj["edges"]
        except (TypeError, KeyError) as exc:
            raise DataError("missing graph field %s" % exc, line=line)
        n = len(nodes)
        adjacency = np.zeros((n, n), dtype=bool)
        seen = set()
        for pair in edges:
            if len(pair) != 2:
                raise DataError("edge %r is not a pair" % (pair,), line=line)
            i, j = int(pair[0]), int(pair[1])
            if not (0 <= i < n and 0 <= j < n):
                raise DataError("edge (%d, %d) out of range" % (i, j), line=line)
            if i == j:
                raise DataError("self loop at node index %d" % i, line=line)
            key = (min(i, j), max(i, j))
            if key in seen:
                raise DataError("duplicate edge (%d, %d)" % key, line=line)
            seen.add(key)
            adjacency[i, j] = adjacency[j, i] = True

        node_attrs = obj.get("node_attrs")
        edge_attrs = obj.get("edge_attrs")
        if edge_attrs is not None and len(edge_attrs) == len(edges):
            # Stored attribute rows follow the stored edge order; realign them
            # to the canonical order used internally.
            order = sorted(range(len(edges)), key=lambda k: (min(edges[k]), max(edges[k])))
            edge_attrs = [edge_attrs[k] for k in order]
        try:
            return cls(nodes, adjacency, node_attrs, edge_attrs)
        except DataError as exc:
            raise DataError(str(exc), line=line)


def graph_to_json(graph):
    return json.dumps(graph.to_json_obj(), sort_keys=True)


def graph_from_json(text, line=None):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError("invalid JSON: %s" % exc, line=line)
    return Graph.from_json_obj(obj, line=line)


def save_jsonl(graphs, path):
    with open(path, "w") as fh:
        for g in graphs:
            fh.write(graph_to_json(g) + "\n")


def load_jsonl(path):
    graphs = []
    try:
        fh = open(path)
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc))
    with fh:
        for lineno, text in enumerate(fh, start=1):
            if text.strip():
                graphs.append(graph_from_json(text, line=lineno))
    return graphs


def build_registry(sequence):
    """Global node ordering over a snapshot sequence, by first appearance.

    Nodes of the first snapshot keep their input order; every node seen later
    is appended at the moment it first appears. Removed nodes keep their
    positions, so the ordering is prefix-stable: extending the sequence never
    moves an existing node.
    """
    registry = {}
    for g in sequence:
        for node_id in g.node_ids:
            if node_id not in registry:
                registry[node_id] = len(registry)
    return registry


def restrict_registry(registry, node_ids):
    """Positions of `node_ids` under the registry, compacted to 0..n-1."""
    for node_id in node_ids:
        if node_id not in registry:
            raise OrderingError("node id %r not in registry" % (node_id,))
    order = sorted(node_ids, key=registry.__getitem__)
    return {node_id: k for k, node_id in enumerate(order)}


def reorder_to_registry(graph, registry):
    """Return `graph` with rows/columns permuted into registry order."""
    local = restrict_registry(registry, graph.node_ids)
    perm = sorted(range(graph.num_nodes), key=lambda k: local[graph.node_ids[k]])
    if perm == list(range(graph.num_nodes)):
        return graph
    adjacency = graph.adjacency[np.ix_(perm, perm)]
    node_attrs = graph.node_attrs[perm]
    old_edges = graph.edges
    inv = {old: new for new, old in enumerate(perm)}
    remapped = [tuple(sorted((inv[i], inv[j]))) for i, j in old_edges]
    order = sorted(range(len(remapped)), key=remapped.__getitem__)
    edge_attrs = graph.edge_attrs[order] if graph.edge_attrs.size else None
    return Graph(
        [graph.node_ids[k] for k in perm], adjacency, node_attrs, edge_attrs
    )


def to_adjacency_sequence(graph, ordering):
    """Encode a graph as the list of adjacency vectors under `ordering`.

    Vector k (0-based) holds the edges between the node at local position k
    and all nodes at positions below k, so vector 0 is empty and vector k has
    length k. The local positions are the registry order restricted to the
    nodes present in the graph.
    """
    local = restrict_registry(ordering, graph.node_ids)
    perm = sorted(range(graph.num_nodes), key=lambda k: local[graph.node_ids[k]])
    adj = graph.adjacency[np.ix_(perm, perm)]
    return [adj[k, :k].astype(np.int8) for k in range(graph.num_nodes)]


def validate_adjacency_vectors(vectors):
    for k, vec in enumerate(vectors):
        vec = np.asarray(vec)
        if vec.shape != (k,):
            raise DataError("adjacency vector %d must have length %d" % (k, k))
        if vec.size and not np.isin(vec, (0, 1)).all():
            raise DataError("adjacency vector entries must be 0 or 1")


def from_adjacency_sequence(seq, node_ids):
    """Inverse of to_adjacency_sequence for the given node ids."""
    validate_adjacency_vectors(seq)
    n = len(seq)
    if len(node_ids) != n:
        raise DataError("%d adjacency vectors but %d node ids" % (n, len(node_ids)))
    adjacency = np.zeros((n, n), dtype=bool)
    for k, vec in enumerate(seq):
        row = np.asarray(vec, dtype=bool)
        adjacency[k, :k] = row
        adjacency[:k, k] = row
    return Graph(node_ids, adjacency)


def assign_degree_attributes(graph):
    """Set each node's attribute to its degree and every edge's to 1."""
    node_attrs = graph.degrees.astype(np.float64)[:, None]
    edge_attrs = np.ones((graph.num_edges, 1))
    return Graph(graph.node_ids, graph.adjacency, node_attrs, edge_attrs)


class GraphSequence:
    """Time-ordered snapshots sharing one node-ordering registry.

    Each snapshot must list its nodes in registry order (the restriction of
    the global ordering to the nodes present at that time).
    """

    def __init__(self, graphs, window_size, registry=None):
        if window_size < 1:
            raise DataError("window size must be positive")
        graphs = list(graphs)
        if registry is None:
            registry = build_registry(graphs)
        for t, g in enumerate(graphs):
            positions = []
            for node_id in g.node_ids:
                if node_id not in registry:
                    raise OrderingError(
                        "snapshot %d: node id %r not in registry" % (t, node_id)
                    )
                positions.append(registry[node_id])
            if positions != sorted(positions):
                raise OrderingError(
                    "snapshot %d: node ids not in registry order" % t
                )
        self.graphs = graphs
        self.registry = registry
        self.window_size = window_size

    def __len__(self):
        return len(self.graphs)

    def __getitem__(self, idx):
        return self.graphs[idx]

    def __iter__(self):
        return iter(self.graphs)
