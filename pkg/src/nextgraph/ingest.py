"""Parse timestamped interaction logs and cut them into snapshot sequences.

Input files are headerless CSV, one interaction per row, either
src,dst,rating,unix_ts (rated) or src,dst,unix_ts (plain). Snapshots are
taken at uniform timestamp quantiles; in cumulative mode snapshot k holds the
simple undirected graph of every interaction up to the k-th quantile, with
repeated interactions collapsed to one edge keeping the latest weight.
"""

import logging
from collections import namedtuple
from math import ceil

import numpy as np

from .errors import ConfigError, DataError
from .graphs import (
    Graph,
    GraphSequence,
    assign_degree_attributes,
    build_registry,
    reorder_to_registry,
)

logger = logging.getLogger(__name__)

TimestampedEdge = namedtuple("TimestampedEdge", ["src", "dst", "weight", "timestamp"])

FORMATS = {"csv_src_dst_rating_ts": 4, "csv_src_dst_ts": 3}
ATTRIBUTE_RULES = ("degree", "avg_rating")
MODES = ("cumulative", "sliding")


def parse_edge_stream(path, format):
    """Read a CSV interaction log into time-sorted edges.

    Self-loops are dropped (their count is logged); duplicate pairs are kept
    as repeated interactions. Ties in timestamp preserve file order.
    """
    if format not in FORMATS:
        raise ConfigError("format must be one of %s, got %r" % (list(FORMATS), format))
    n_fields = FORMATS[format]
    edges = []
    dropped = 0
    try:
        fh = open(path)
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc))
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != n_fields:
                raise DataError(
                    "expected %d fields, got %d" % (n_fields, len(fields)), line=lineno
                )
            try:
                src, dst = int(fields[0]), int(fields[1])
                weight = float(fields[2]) if n_fields == 4 else None
                timestamp = int(float(fields[-1]))
            except ValueError as exc:
                raise DataError("unparseable row: %s" % exc, line=lineno)
            if timestamp < 0:
                raise DataError("negative timestamp %d" % timestamp, line=lineno)
            if src == dst:
                dropped += 1
                continue
            edges.append(TimestampedEdge(src, dst, weight, timestamp))
    if dropped:
        logger.info("dropped %d self-loop rows from %s", dropped, path)
    if not edges:
        raise DataError("no edges parsed from %s" % path)
    edges.sort(key=lambda e: e.timestamp)
    return edges


class SnapshotSpec:
    """How to decompose an edge stream into snapshots."""

    def __init__(self, count, mode="cumulative", attribute_rule="degree"):
        if count < 2:
            raise ConfigError("snapshot count must be >= 2, got %r" % (count,))
        if mode not in MODES:
            raise ConfigError("mode must be one of %s, got %r" % (list(MODES), mode))
        if attribute_rule not in ATTRIBUTE_RULES:
            raise ConfigError(
                "attribute_rule must be one of %s, got %r"
                % (list(ATTRIBUTE_RULES), attribute_rule)
            )
        self.count = int(count)
        self.mode = mode
        self.attribute_rule = attribute_rule


def _quantile_boundaries(timestamps, count):
    """Nearest-rank quantile timestamps; the last one is the maximum."""
    n = len(timestamps)
    return [timestamps[ceil((k + 1) * n / count) - 1] for k in range(count)]


def _build_graph(node_order, pair_weights, attribute_rule):
    ids = list(node_order)
    index = {node_id: k for k, node_id in enumerate(ids)}
    n = len(ids)
    adjacency = np.zeros((n, n), dtype=bool)
    weighted = []
    for (u, v), w in pair_weights.items():
        i, j = index[u], index[v]
        adjacency[i, j] = adjacency[j, i] = True
        weighted.append(((min(i, j), max(i, j)), w))
    has_weights = any(w is not None for _, w in weighted)
    edge_attrs = None
    if has_weights:
        weighted.sort(key=lambda item: item[0])
        edge_attrs = np.array([[w] for _, w in weighted])
    g = Graph(ids, adjacency, edge_attrs=edge_attrs)
    if attribute_rule == "avg_rating":
        return assign_rating_attributes(g)
    g = assign_degree_attributes(g)
    if has_weights:
        # keep ratings on the edges even when nodes carry degree attributes
        g = Graph(g.node_ids, g.adjacency, g.node_attrs, edge_attrs)
    return g


def snapshot_sequence(edges, spec, window_size=10):
    """Cut a time-sorted edge stream into a GraphSequence."""
    edges = list(edges)
    if not edges:
        raise DataError("edge stream is empty")
    timestamps = [e.timestamp for e in edges]
    if any(a > b for a, b in zip(timestamps, timestamps[1:])):
        raise DataError("edge stream is not sorted by timestamp")
    if spec.count > len(set(timestamps)):
        raise DataError(
            "%d snapshots requested but only %d distinct timestamps"
            % (spec.count, len(set(timestamps)))
        )
    has_weights = edges[0].weight is not None
    if any((e.weight is not None) != has_weights for e in edges):
        raise DataError("mixed weighted and unweighted edges")
    if spec.attribute_rule == "avg_rating" and not has_weights:
        raise DataError("avg_rating attributes need a rated edge stream")

    boundaries = _quantile_boundaries(timestamps, spec.count)
    snaps = []
    node_order = {}  # insertion-ordered: first appearance in the stream
    pair_weights = {}
    cursor = 0
    for boundary in boundaries:
        if spec.mode == "sliding":
            node_order, pair_weights = {}, {}
        while cursor < len(edges) and edges[cursor].timestamp <= boundary:
            e = edges[cursor]
            for node_id in (e.src, e.dst):
                if node_id not in node_order:
                    node_order[node_id] = None
            key = (e.src, e.dst) if e.src < e.dst else (e.dst, e.src)
            pair_weights[key] = e.weight
            cursor += 1
        snaps.append(_build_graph(node_order, pair_weights, spec.attribute_rule))
    if spec.mode == "sliding":
        # Per-bucket appearance order can disagree with the global ordering,
        # so realign every snapshot to the shared registry.
        registry = build_registry(snaps)
        snaps = [reorder_to_registry(g, registry) for g in snaps]
        return GraphSequence(snaps, window_size, registry)
    return GraphSequence(snaps, window_size)


def assign_rating_attributes(graph):
    """Node attribute = mean rating over incident edges; edges keep ratings."""
    if graph.edge_attrs.shape[1] != 1:
        raise DataError("rating attributes need 1-dimensional edge weights")
    n = graph.num_nodes
    sums = np.zeros(n)
    counts = np.zeros(n)
    for (i, j), w in zip(graph.edges, graph.edge_attrs[:, 0]):
        sums[i] += w
        sums[j] += w
        counts[i] += 1
        counts[j] += 1
    attrs = np.divide(sums, counts, out=np.zeros(n), where=counts > 0)
    return Graph(graph.node_ids, graph.adjacency, attrs[:, None], graph.edge_attrs)


def dataset_stats(edges):
    """Summary of an edge stream: node count, record count, sign, timespan.

    The edge count is the number of interaction records, not the number of
    distinct node pairs.
    """
    edges = list(edges)
    nodes = set()
    for e in edges:
        nodes.add(e.src)
        nodes.add(e.dst)
    stats = {
        "nodes": len(nodes),
        "edges": len(edges),
        "first_timestamp": edges[0].timestamp if edges else None,
        "last_timestamp": edges[-1].timestamp if edges else None,
    }
    weights = [e.weight for e in edges if e.weight is not None]
    if weights:
        stats["positive_pct"] = 100.0 * sum(1 for w in weights if w > 0) / len(weights)
    return stats
