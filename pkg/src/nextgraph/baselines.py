"""Classical random-graph baselines fitted from the observed history.

Each baseline targets the same predicted node and edge counts as the learned
pipeline (via a small MLP over the window's size history) and fills in the
topology with its own generative rule: uniform edges, a two-block stochastic
block model, preferential attachment with or without triad closure, or a
stochastic Kronecker graph.
"""

import logging
import math

import numpy as np
import torch

from .errors import ConfigError, DataError, GenerationError
from .graphs import Graph, assign_degree_attributes
from .predictor import SizeHead
from .utils import init_parameters

logger = logging.getLogger(__name__)

KINDS = ("er", "sbm", "ba", "power", "kron_rand", "kron_fix")
KRONECKER_FIXED = np.array([[0.9, 0.5], [0.5, 0.1]])
TRIAD_CLOSURE_PROB = 0.1


def estimate_targets(history, seed=0):
    """Predict the next (node count, edge count) from w observed pairs.

    A small feed-forward net is fit on the window's consecutive one-step
    deltas and applied to the last pair. Outputs are clamped to at least one
    node, a nonnegative edge count, and the simple-graph maximum.
    """
    history = [(int(n), int(m)) for n, m in history]
    if len(history) < 2:
        raise DataError("size history needs at least two snapshots")
    net = SizeHead(window_size=1, out_dim=2)
    init_parameters(net, seed)
    scale = max(1.0, float(max(max(n, m) for n, m in history)))
    net.set_scale(scale)
    xs = torch.as_tensor(np.asarray(history[:-1], dtype=np.float64)).unsqueeze(1)
    ys = torch.as_tensor(np.diff(np.asarray(history, dtype=np.float64), axis=0))
    optimizer = torch.optim.Adam(net.parameters(), lr=0.05)
    for _ in range(300):
        pred = torch.stack([net(x) for x in xs])
        loss = ((pred - ys) ** 2).mean()
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
    with torch.no_grad():
        delta = net(torch.as_tensor(np.asarray(history[-1:], dtype=np.float64)))
    n = max(1, int(round(history[-1][0] + float(delta[0]))))
    m = max(0, int(round(history[-1][1] + float(delta[1]))))
    m = min(m, n * (n - 1) // 2)
    return n, m


def _empty_adjacency(n):
    return np.zeros((n, n), dtype=bool)


def _graph_from_adjacency(adjacency):
    n = adjacency.shape[0]
    return assign_degree_attributes(
        Graph(list(range(n)), adjacency, node_attrs=np.zeros((n, 1)))
    )


def _sample_symmetric(prob_upper, rng):
    """Sample an undirected adjacency from upper-triangle probabilities."""
    n = prob_upper.shape[0]
    draws = rng.random((n, n)) < prob_upper
    upper = np.triu(draws, k=1)
    return upper | upper.T


def generate_er(n, m, seed):
    """Uniform random graph whose edge probability matches m edges."""
    if n < 1:
        raise GenerationError("node count must be at least 1")
    cap = n * (n - 1) // 2
    if m < 0 or m > cap:
        raise GenerationError("cannot place %d edges on %d nodes" % (m, n))
    rng = np.random.default_rng(seed)
    p = m / cap if cap else 0.0
    prob = np.full((n, n), p)
    return _graph_from_adjacency(_sample_symmetric(prob, rng))


def fit_blocks(graph):
    """Two-block split of a graph plus the fitted block probabilities.

    The split takes the signs of the eigenvector for the second-smallest
    Laplacian eigenvalue. Returns (labels, probs) where labels is a 0/1
    array over the graph's nodes and probs is the symmetric 2x2 block
    probability matrix, or None if the split degenerates.
    """
    n = graph.num_nodes
    if n < 2:
        return None
    adjacency = graph.adjacency.astype(np.float64)
    laplacian = np.diag(adjacency.sum(axis=1)) - adjacency
    _, vectors = np.linalg.eigh(laplacian)
    # Center before taking signs: with repeated small eigenvalues (e.g. a
    # disconnected graph) the returned basis can mix the constant vector
    # into the split direction.
    labels = None
    for idx in (1, 0):
        v = vectors[:, idx]
        v = v - v.mean()
        if np.abs(v).max() > 1e-9:
            labels = (v >= 0).astype(int)
            break
    if labels is None:
        return None
    sizes = np.bincount(labels, minlength=2)
    if sizes[0] == 0 or sizes[1] == 0:
        return None
    probs = np.zeros((2, 2))
    for a in range(2):
        for b in range(a, 2):
            mask_a = labels == a
            mask_b = labels == b
            edges = adjacency[np.ix_(mask_a, mask_b)].sum()
            if a == b:
                pairs = sizes[a] * (sizes[a] - 1)
                value = edges / pairs if pairs else 0.0
            else:
                value = edges / (sizes[a] * sizes[b])
            probs[a, b] = probs[b, a] = value
    return labels, probs


def generate_sbm(n, history_graph, seed):
    """Two-block model fitted to the last snapshot, sampled at size n.

    Falls back to a density-matched uniform graph when the spectral split
    leaves one block empty.
    """
    if n < 1:
        raise GenerationError("node count must be at least 1")
    if history_graph.num_nodes == 0:
        raise DataError("cannot fit block structure to an empty graph")
    fit = fit_blocks(history_graph)
    if fit is None:
        density = 0.0
        pairs = history_graph.num_nodes * (history_graph.num_nodes - 1) // 2
        if pairs:
            density = history_graph.num_edges / pairs
        m = int(round(density * n * (n - 1) / 2))
        logger.info("degenerate block split; falling back to a uniform graph")
        return generate_er(n, m, seed)
    labels, probs = fit
    share = float((labels == 0).mean())
    n0 = min(max(int(round(share * n)), 1), n - 1) if n >= 2 else n
    new_labels = np.array([0] * n0 + [1] * (n - n0))
    prob = probs[np.ix_(new_labels, new_labels)]
    rng = np.random.default_rng(seed)
    return _graph_from_adjacency(_sample_symmetric(prob, rng))


def generate_ba(n, m_per_node, seed, variant="ba"):
    """Preferential attachment from a triangle seed.

    Each new node attaches to m_per_node distinct existing nodes chosen
    with probability proportional to degree. The "power" variant follows
    every attachment with a chance of closing a triangle through the new
    neighbor.
    """
    if variant not in ("ba", "power"):
        raise ConfigError("variant must be 'ba' or 'power', got %r" % (variant,))
    if n < 3:
        raise GenerationError("preferential attachment needs at least 3 nodes")
    if not 1 <= m_per_node <= 3:
        raise ConfigError("m_per_node must be between 1 and the seed size 3")
    rng = np.random.default_rng(seed)
    adjacency = _empty_adjacency(n)
    adjacency[0, 1] = adjacency[1, 0] = True
    adjacency[0, 2] = adjacency[2, 0] = True
    adjacency[1, 2] = adjacency[2, 1] = True
    degrees = np.zeros(n)
    degrees[:3] = 2
    for new in range(3, n):
        chosen = []
        for _ in range(m_per_node):
            weights = degrees[:new].copy()
            weights[chosen] = 0.0
            weights /= weights.sum()
            pick = int(rng.choice(new, p=weights))
            chosen.append(pick)
            adjacency[new, pick] = adjacency[pick, new] = True
            degrees[new] += 1
            degrees[pick] += 1
            if variant == "power" and rng.random() < TRIAD_CLOSURE_PROB:
                friends = np.flatnonzero(adjacency[pick])
                friends = friends[(friends != new) & ~adjacency[new, friends]]
                if friends.size:
                    other = int(rng.choice(friends))
                    adjacency[new, other] = adjacency[other, new] = True
                    degrees[new] += 1
                    degrees[other] += 1
    return _graph_from_adjacency(adjacency)


def _check_initiator(initiator):
    initiator = np.asarray(initiator, dtype=np.float64)
    if initiator.shape != (2, 2):
        raise ConfigError("initiator must be a 2x2 matrix")
    if not np.isclose(initiator[0, 1], initiator[1, 0]):
        raise ConfigError("initiator must be symmetric")
    if (initiator < 0).any() or (initiator > 1).any():
        raise ConfigError("initiator entries must lie in [0, 1]")
    return initiator


def kronecker_order(n):
    """Number of initiator factors needed to cover n nodes."""
    return max(1, int(math.ceil(math.log2(n))))


def kronecker_probabilities(initiator, k):
    """k-fold Kronecker power of the initiator."""
    prob = np.asarray(initiator, dtype=np.float64)
    for _ in range(k - 1):
        prob = np.kron(prob, initiator)
    return prob


def expected_kronecker_edges(initiator, k):
    """Expected undirected edge count of the full 2^k-node model."""
    total = float(initiator.sum()) ** k
    diagonal = float(np.trace(initiator)) ** k
    return (total - diagonal) / 2.0


def _kronecker_degree_stats(a, b, c, k):
    """Mean and variance of expected degrees over the 2^k nodes."""
    n = 2 ** k
    counts = np.array([math.comb(k, j) for j in range(k + 1)], dtype=np.float64)
    degs = np.array(
        [
            (a + b) ** (k - j) * (b + c) ** j - a ** (k - j) * c ** j
            for j in range(k + 1)
        ]
    )
    mean = float((counts * degs).sum() / n)
    var = float((counts * (degs - mean) ** 2).sum() / n)
    return mean, var


def fit_kronecker_initiator(graph, n_nodes=None, step=0.05):
    """Grid-search a symmetric initiator against a snapshot's statistics.

    Scores each candidate by |expected density - observed density| +
    |expected-degree variance - observed degree variance|, analytically on
    the untruncated model of matching order.
    """
    if graph.num_nodes < 2:
        raise DataError("need at least 2 nodes to fit an initiator")
    if n_nodes is None:
        n_nodes = graph.num_nodes
    k = kronecker_order(n_nodes)
    full = 2 ** k
    density_target = graph.num_edges / (graph.num_nodes * (graph.num_nodes - 1) / 2)
    degvar_target = float(np.var(graph.degrees))
    grid = np.round(np.arange(0.0, 1.0 + 1e-9, step), 10)
    best, best_score = None, None
    for a in grid:
        for b in grid:
            for c in grid[grid <= a]:
                density = expected_kronecker_edges(
                    np.array([[a, b], [b, c]]), k
                ) / (full * (full - 1) / 2)
                _, degvar = _kronecker_degree_stats(a, b, c, k)
                score = abs(density - density_target) + abs(degvar - degvar_target)
                if best_score is None or score < best_score:
                    best, best_score = (a, b, c), score
    a, b, c = best
    return np.array([[a, b], [b, c]])


def generate_kronecker(n, initiator, mode, seed):
    """Stochastic Kronecker graph truncated to n nodes."""
    if n < 2:
        raise GenerationError("Kronecker generation needs at least 2 nodes")
    if mode not in ("rand", "fix"):
        raise ConfigError("mode must be 'rand' or 'fix', got %r" % (mode,))
    if mode == "fix":
        initiator = KRONECKER_FIXED
    initiator = _check_initiator(initiator)
    prob = kronecker_probabilities(initiator, kronecker_order(n))[:n, :n]
    rng = np.random.default_rng(seed)
    return _graph_from_adjacency(_sample_symmetric(prob, rng))


class BaselineSpec:
    """A fitted baseline: generation rule plus its estimated targets."""

    def __init__(self, kind, estimated_nodes, estimated_edges, params=None):
        if kind not in KINDS:
            raise ConfigError("unknown baseline kind %r" % (kind,))
        if estimated_nodes < 1:
            raise ConfigError("estimated_nodes must be at least 1")
        self.kind = kind
        self.estimated_nodes = int(estimated_nodes)
        self.estimated_edges = int(estimated_edges)
        self.params = params or {}

    def generate(self, seed):
        n, m = self.estimated_nodes, self.estimated_edges
        if self.kind == "er":
            return generate_er(n, m, seed)
        if self.kind == "sbm":
            return generate_sbm(n, self.params["history_graph"], seed)
        if self.kind in ("ba", "power"):
            if n < 3:
                return generate_er(n, min(m, n * (n - 1) // 2), seed)
            return generate_ba(n, self.params["m_per_node"], seed, variant=self.kind)
        mode = "fix" if self.kind == "kron_fix" else "rand"
        if n < 2:
            return generate_er(n, 0, seed)
        return generate_kronecker(n, self.params.get("initiator"), mode, seed)


def fit_baseline(kind, window_graphs, targets=None, seed=0):
    """Fit one baseline from a history window.

    `targets` lets several baselines share one (n, m) estimate; when absent
    it is computed here from the window's size history.
    """
    if not window_graphs:
        raise DataError("cannot fit a baseline to an empty window")
    if targets is None:
        history = [(g.num_nodes, g.num_edges) for g in window_graphs]
        targets = estimate_targets(history, seed=seed)
    n, m = targets
    last = window_graphs[-1]
    params = {}
    if kind == "sbm":
        params["history_graph"] = last
    elif kind in ("ba", "power"):
        params["m_per_node"] = int(min(3, max(1, round(m / max(n, 1)))))
    elif kind == "kron_rand":
        params["initiator"] = fit_kronecker_initiator(last, n_nodes=n)
    return BaselineSpec(kind, n, m, params)
