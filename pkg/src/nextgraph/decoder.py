"""Hierarchical autoregressive graph generator seeded by a graph embedding.

A graph-level recurrent cell walks over node slots in the fixed node
ordering; its state starts at the seed embedding and is advanced by the
previous slot's adjacency vector (zero-padded to a fixed width). For each
slot an edge-level recurrent cell, initialized with the graph state, emits
one Bernoulli probability per possible edge to the earlier slots,
conditioning on the previously decided bit (a constant 1 starts each row).

Within a row, both levels scan the bits newest-predecessor-first (slot
r-1 down to slot 0) rather than in slot order. Edge patterns in growing
graphs concentrate around recently added nodes, so this orientation makes
the per-row rule roughly stationary in the row length: the cell does not
have to track how far away the end of the row is, and rules learned on
short rows transfer to longer ones. All inputs and outputs at the module
boundary (adjacency vectors, probability tables, logits) remain in slot
order; the scan order is purely internal.

Training uses teacher forcing with ground-truth bits and runs both levels
batched; sampling is strictly sequential, so it runs on a small numpy mirror
of the recurrent cells instead of per-bit framework calls.
"""

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, DataError, GenerationError
from .graphs import from_adjacency_sequence, validate_adjacency_vectors

SOS_BIT = 1.0


class GraphDecoder(nn.Module):
    """Two-level recurrent decoder with a scalar edge-probability head."""

    def __init__(self, embedding_dim, max_nodes, dtype=torch.float64):
        super().__init__()
        if embedding_dim < 1:
            raise ConfigError("embedding_dim must be >= 1")
        if max_nodes < 2:
            raise ConfigError("max_nodes must be >= 2")
        self.graph_rnn = nn.GRU(max_nodes - 1, embedding_dim, dtype=dtype)
        self.edge_rnn = nn.GRU(1, embedding_dim, dtype=dtype)
        self.head = nn.Linear(embedding_dim, 1, dtype=dtype)
        self.embedding_dim = embedding_dim
        self.max_nodes = max_nodes
        self.dtype = dtype

    @property
    def input_width(self):
        return self.max_nodes - 1

    def _pad_row(self, bits):
        """Reorient a slot-order row for the cells: newest bit first, padded.

        Truncation to the input width therefore drops the oldest slots and
        keeps the most recent predecessors.
        """
        x = torch.zeros(self.input_width, dtype=self.dtype)
        rev = np.asarray(bits, dtype=np.float64)[::-1][: self.input_width]
        if rev.size:
            x[: rev.size] = torch.as_tensor(rev.copy(), dtype=self.dtype)
        return x

    def row_inputs(self, rows):
        """Graph-level input matrix: slot r is fed slot r-1's bits, padded."""
        n = len(rows)
        X = np.zeros((n, self.input_width))
        for r in range(1, n):
            prev = np.asarray(rows[r - 1], dtype=np.float64)[::-1][: self.input_width]
            X[r, : prev.size] = prev
        return torch.as_tensor(X, dtype=self.dtype)

    def graph_states(self, seed, rows):
        """Hidden state per node slot under teacher forcing."""
        X = self.row_inputs(rows)
        h0 = seed.reshape(1, 1, self.embedding_dim)
        out, _ = self.graph_rnn(X.unsqueeze(1), h0)
        return out.squeeze(1)

    def teacher_forced_logits(self, seed, rows):
        """Edge logits and targets for every bit of `rows`, batched.

        Returns (logits, targets) flattened row-major: slot 1's bits first,
        each row ordered by earlier-slot index.
        """
        validate_adjacency_vectors(rows)
        states = self.graph_states(seed, rows)
        n = len(rows)
        if n <= 1:
            empty = torch.zeros(0, dtype=self.dtype)
            return empty, empty
        # One rectangular batch (row r lives at batch index r-1, padded with
        # zeros past its length): far cheaper than a packed sequence here,
        # whose per-step reshuffling dominates the backward pass.
        longest = n - 1
        inputs = np.zeros((longest, n - 1, 1))
        flat_targets = np.empty(n * (n - 1) // 2)
        at = 0
        for r in range(1, n):
            scan = np.asarray(rows[r], dtype=np.float64)[::-1]
            inputs[0, r - 1, 0] = SOS_BIT
            inputs[1:r, r - 1, 0] = scan[:-1]
            flat_targets[at : at + r] = scan[::-1]
            at += r
        h0 = states[1:].unsqueeze(0).contiguous()
        out, _ = self.edge_rnn(torch.as_tensor(inputs, dtype=self.dtype), h0)
        raw = self.head(out).squeeze(-1).transpose(0, 1)
        # Flip the scan outputs back into slot order: row r's scan steps
        # land at times longest-r..longest-1 of the flipped tensor, already
        # ascending by slot, so a shifted mask gathers them row-major.
        flipped = raw.flip(1)
        steps = torch.arange(longest)
        mask = steps.unsqueeze(0) >= (longest - 1) - steps.unsqueeze(1)
        logits = flipped[mask]
        targets = torch.as_tensor(flat_targets, dtype=self.dtype)
        return logits, targets


class EdgeProbabilityTable:
    """Lower-triangular table of edge probabilities, strictly inside (0,1).

    Row k holds the k probabilities for edges between node slot k and slots
    0..k-1 (row 0 is empty), mirroring the adjacency-vector layout.
    """

    def __init__(self, rows):
        rows = [np.asarray(row, dtype=np.float64) for row in rows]
        for k, row in enumerate(rows):
            if row.shape != (k,):
                raise DataError("probability row %d must have length %d" % (k, k))
            if row.size and not ((row > 0.0) & (row < 1.0)).all():
                raise DataError("edge probabilities must lie strictly in (0,1)")
        self.rows = rows

    def __len__(self):
        return len(self.rows)

    @classmethod
    def from_logits(cls, logits, n):
        """Build a table from flat logits (row-major over slots 1..n-1).

        Extreme logits can round the sigmoid to exactly 0 or 1 in floating
        point; those are nudged to the nearest representable interior value
        to keep the open-interval invariant.
        """
        flat = np.asarray(logits, dtype=np.float64).reshape(-1)
        if flat.size != n * (n - 1) // 2:
            raise DataError(
                "expected %d logits for %d nodes, got %d" % (n * (n - 1) // 2, n, flat.size)
            )
        probs = _sigmoid(flat)
        probs = np.clip(probs, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
        rows, at = [], 0
        for k in range(n):
            rows.append(probs[at : at + k])
            at += k
        return cls(rows)


def teacher_forced_probabilities(decoder, seed, rows):
    with torch.no_grad():
        logits, _ = decoder.teacher_forced_logits(seed, rows)
    return EdgeProbabilityTable.from_logits(logits.numpy(), len(rows))


def graph_level_step(h_prev, s_prev, decoder):
    """One graph-level update: consume the previous slot's adjacency bits."""
    h_prev = torch.as_tensor(np.asarray(h_prev, dtype=np.float64), dtype=decoder.dtype)
    if h_prev.shape != (decoder.embedding_dim,):
        raise DataError(
            "graph state must have dimension %d, got %s"
            % (decoder.embedding_dim, tuple(h_prev.shape))
        )
    x = decoder._pad_row(np.asarray(s_prev, dtype=np.float64).reshape(-1))
    _, h = decoder.graph_rnn(x.reshape(1, 1, -1), h_prev.reshape(1, 1, -1))
    return h.reshape(-1)


def edge_level_step(m_prev, a_prev, decoder):
    """One edge-level update and its Bernoulli probability."""
    m_prev = torch.as_tensor(np.asarray(m_prev, dtype=np.float64), dtype=decoder.dtype)
    if m_prev.shape != (decoder.embedding_dim,):
        raise DataError(
            "edge state must have dimension %d, got %s"
            % (decoder.embedding_dim, tuple(m_prev.shape))
        )
    x = torch.tensor([[[float(a_prev)]]], dtype=decoder.dtype)
    _, m = decoder.edge_rnn(x, m_prev.reshape(1, 1, -1))
    m = m.reshape(-1)
    p = torch.sigmoid(decoder.head(m).reshape(()))
    return m, p


class _NumpyGRU:
    """Mirror of the framework GRU cell for fast sequential decoding."""

    def __init__(self, gru):
        self.w_ih = gru.weight_ih_l0.detach().numpy().astype(np.float64)
        self.w_hh = gru.weight_hh_l0.detach().numpy().astype(np.float64)
        self.b_ih = gru.bias_ih_l0.detach().numpy().astype(np.float64)
        self.b_hh = gru.bias_hh_l0.detach().numpy().astype(np.float64)
        self.hidden = gru.hidden_size

    def step(self, x, h):
        gi = self.w_ih @ x + self.b_ih
        gh = self.w_hh @ h + self.b_hh
        E = self.hidden
        r = _sigmoid(gi[:E] + gh[:E])
        z = _sigmoid(gi[E : 2 * E] + gh[E : 2 * E])
        cand = np.tanh(gi[2 * E :] + r * gh[2 * E :])
        return (1.0 - z) * cand + z * h


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _decode_rows(decoder, seed, n_nodes, decide):
    """Run the sequential decode; `decide(p) -> 0/1` picks each bit.

    Rows are scanned newest-predecessor-first and returned in slot order,
    matching the teacher-forced path exactly.
    """
    graph_cell = _NumpyGRU(decoder.graph_rnn)
    edge_cell = _NumpyGRU(decoder.edge_rnn)
    w_head = decoder.head.weight.detach().numpy().astype(np.float64).reshape(-1)
    b_head = float(decoder.head.bias.detach())
    h = np.asarray(seed, dtype=np.float64).reshape(-1)
    if h.shape != (decoder.embedding_dim,):
        raise DataError("seed embedding has wrong dimension")
    M = decoder.input_width
    rows, probs = [], []
    for r in range(n_nodes):
        x = np.zeros(M)
        if r >= 1 and len(rows[r - 1]):
            prev = rows[r - 1][::-1][:M]
            x[: len(prev)] = prev
        h = graph_cell.step(x, h)
        bits = np.zeros(r, dtype=np.int8)
        ps = np.zeros(r)
        if r >= 1:
            m = h.copy()
            a_prev = SOS_BIT
            for j in range(r - 1, -1, -1):
                m = edge_cell.step(np.array([a_prev]), m)
                p = float(_sigmoid(np.array([w_head @ m + b_head]))[0])
                bit = int(decide(p))
                bits[j] = bit
                ps[j] = p
                a_prev = float(bit)
        rows.append(bits)
        probs.append(ps)
    return rows, probs


def sample_graph(decoder, seed, n_nodes, rng=None, deterministic=False, node_ids=None):
    """Generate an n-node graph from the seed embedding.

    Bits are Bernoulli draws from the edge probabilities (pass `rng` as a
    seed or numpy Generator), or thresholded at 0.5 when deterministic=True.
    """
    if n_nodes < 1 or n_nodes > decoder.max_nodes:
        raise GenerationError(
            "n_nodes must be in [1, %d], got %d" % (decoder.max_nodes, n_nodes)
        )
    if deterministic:
        decide = lambda p: p > 0.5
    else:
        if rng is None:
            raise ConfigError("sampling needs an rng (or deterministic=True)")
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        decide = lambda p: rng.random() < p
    with torch.no_grad():
        rows, _ = _decode_rows(decoder, np.asarray(seed, dtype=np.float64), n_nodes, decide)
    if node_ids is None:
        node_ids = list(range(n_nodes))
    return from_adjacency_sequence(rows, node_ids)


def edge_loss(p_table, target, form="bce"):
    """Total loss of a probability table against target adjacency vectors.

    form="bce" is the usual negative log-likelihood of the bits. The
    "literal" form is the plain error expectation sum(a(1-p) + (1-a)p); it
    admits boundary probabilities 0 and 1, while bce requires the open
    interval.
    """
    if form not in ("bce", "literal"):
        raise ConfigError("loss form must be 'bce' or 'literal', got %r" % (form,))
    rows = p_table.rows if isinstance(p_table, EdgeProbabilityTable) else [
        np.asarray(r, dtype=np.float64) for r in p_table
    ]
    validate_adjacency_vectors(target)
    if len(rows) != len(target):
        raise DataError("probability table and target have different sizes")
    total = 0.0
    for k, (p_row, a_row) in enumerate(zip(rows, target)):
        a_row = np.asarray(a_row, dtype=np.float64)
        if p_row.shape != a_row.shape:
            raise DataError("row %d shapes differ" % k)
        if p_row.size == 0:
            continue
        if ((p_row < 0) | (p_row > 1)).any():
            raise DataError("probabilities must lie in [0, 1]")
        if form == "bce":
            if ((p_row <= 0) | (p_row >= 1)).any():
                raise DataError("bce needs probabilities strictly inside (0,1)")
            total += float(-(a_row * np.log(p_row) + (1 - a_row) * np.log1p(-p_row)).sum())
        else:
            total += float((a_row * (1 - p_row) + (1 - a_row) * p_row).sum())
    return total
