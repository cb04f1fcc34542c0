"""Message-passing encoder that turns one graph into one embedding vector.

Each round computes a message per node by summing an MLP of its neighbors'
states (with the incident edge attribute appended to the MLP input), then
updates the node state with a bias-free gated recurrent cell:

    r = sigmoid(W_R m + U_R h)
    z = sigmoid(W_Z m + U_Z h)
    cand = tanh(W m + U (r * h))
    h' = (1 - z) * h + z * cand

After the final round an attention readout with an LSTM controller condenses
the node states into a single vector of twice the hidden width. Node states
are sorted canonically before any order-dependent reduction, so the readout
is bit-identical under node permutations.
"""

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, DataError


def canonical_order(states):
    """Indices that sort state rows lexicographically, first column major."""
    x = states.detach().cpu().numpy()
    keys = x.T[::-1]
    return torch.as_tensor(np.lexsort(keys).copy(), dtype=torch.long)


class GatedUpdate(nn.Module):
    """Bias-free update cell; the gate equations are written out explicitly."""

    def __init__(self, dim, dtype=torch.float64):
        super().__init__()
        shape = (dim, dim)
        self.w_r = nn.Parameter(torch.zeros(shape, dtype=dtype))
        self.u_r = nn.Parameter(torch.zeros(shape, dtype=dtype))
        self.w_z = nn.Parameter(torch.zeros(shape, dtype=dtype))
        self.u_z = nn.Parameter(torch.zeros(shape, dtype=dtype))
        self.w_h = nn.Parameter(torch.zeros(shape, dtype=dtype))
        self.u_h = nn.Parameter(torch.zeros(shape, dtype=dtype))
        self.dim = dim

    def forward(self, h, m):
        if h.shape[-1] != self.dim or m.shape[-1] != self.dim:
            raise DataError(
                "state width %d / message width %d do not match cell width %d"
                % (h.shape[-1], m.shape[-1], self.dim)
            )
        r = torch.sigmoid(m @ self.w_r.T + h @ self.u_r.T)
        z = torch.sigmoid(m @ self.w_z.T + h @ self.u_z.T)
        cand = torch.tanh(m @ self.w_h.T + (r * h) @ self.u_h.T)
        return (1 - z) * h + z * cand


class Set2Set(nn.Module):
    """Attention readout over a set of node states, LSTM-controlled.

    Repeats for a fixed number of processing steps: advance the controller,
    score every node state against the query, read out the attention-weighted
    sum, and feed [query, read] back in. Output width is twice the state
    width. Rows are canonically sorted so the reduction order, and therefore
    the output bits, cannot depend on input order.
    """

    def __init__(self, dim, processing_steps=3, dtype=torch.float64):
        super().__init__()
        if processing_steps < 1:
            raise ConfigError("processing_steps must be >= 1")
        self.lstm = nn.LSTMCell(2 * dim, dim, dtype=dtype)
        self.processing_steps = processing_steps
        self.dim = dim

    def forward(self, states):
        if states.ndim != 2 or states.shape[0] == 0:
            raise DataError("readout needs at least one node state")
        x = states[canonical_order(states)]
        dtype = x.dtype
        q = torch.zeros(1, self.dim, dtype=dtype)
        c = torch.zeros(1, self.dim, dtype=dtype)
        q_star = torch.zeros(1, 2 * self.dim, dtype=dtype)
        for _ in range(self.processing_steps):
            q, c = self.lstm(q_star, (q, c))
            scores = x @ q.T
            alpha = torch.softmax(scores, dim=0)
            read = (alpha * x).sum(dim=0, keepdim=True)
            q_star = torch.cat([q, read], dim=1)
        return q_star.squeeze(0)


class GraphEncoder(nn.Module):
    """K rounds of aggregate+update followed by the attention readout.

    Weights are untied across rounds by default; tie_weights shares one
    parameter set. Initial node states are the attribute vectors zero-padded
    to the hidden width.
    """

    def __init__(
        self,
        hidden_dim=64,
        depth=2,
        edge_attr_dim=1,
        tie_weights=False,
        processing_steps=3,
        dtype=torch.float64,
    ):
        super().__init__()
        if hidden_dim < 1:
            raise ConfigError("hidden_dim must be >= 1")
        if depth < 1:
            raise ConfigError("depth must be >= 1")
        if edge_attr_dim < 0:
            raise ConfigError("edge_attr_dim must be >= 0")
        n_sets = 1 if tie_weights else depth
        in_dim = hidden_dim + edge_attr_dim
        self.mlps = nn.ModuleList(
            nn.Sequential(
                nn.Linear(in_dim, hidden_dim, dtype=dtype),
                nn.Tanh(),
                nn.Linear(hidden_dim, hidden_dim, dtype=dtype),
            )
            for _ in range(n_sets)
        )
        self.grus = nn.ModuleList(GatedUpdate(hidden_dim, dtype) for _ in range(n_sets))
        self.readout = Set2Set(hidden_dim, processing_steps, dtype)
        self.hidden_dim = hidden_dim
        self.depth = depth
        self.edge_attr_dim = edge_attr_dim
        self.tie_weights = tie_weights
        self.dtype = dtype

    @property
    def embedding_dim(self):
        return 2 * self.hidden_dim

    def layer(self, iteration):
        k = 0 if self.tie_weights else iteration
        return self.mlps[k], self.grus[k]

    def initial_states(self, graph):
        attrs = torch.as_tensor(graph.node_attrs.copy(), dtype=self.dtype)
        if attrs.shape[1] > self.hidden_dim:
            raise DataError(
                "attribute dimension %d exceeds hidden width %d"
                % (attrs.shape[1], self.hidden_dim)
            )
        pad = self.hidden_dim - attrs.shape[1]
        if pad:
            attrs = torch.cat(
                [attrs, torch.zeros(attrs.shape[0], pad, dtype=self.dtype)], dim=1
            )
        return attrs

    def _directed_edges(self, graph):
        if graph.edge_attrs.shape[1] != self.edge_attr_dim:
            raise DataError(
                "graph edge attributes have width %d, encoder expects %d"
                % (graph.edge_attrs.shape[1], self.edge_attr_dim)
            )
        pairs = graph.edges
        if not pairs:
            src = torch.zeros(0, dtype=torch.long)
            dst = torch.zeros(0, dtype=torch.long)
            attrs = torch.zeros(0, self.edge_attr_dim, dtype=self.dtype)
            return src, dst, attrs
        iu = [i for i, _ in pairs]
        ju = [j for _, j in pairs]
        src = torch.as_tensor(iu + ju, dtype=torch.long)
        dst = torch.as_tensor(ju + iu, dtype=torch.long)
        attrs = torch.as_tensor(graph.edge_attrs.copy(), dtype=self.dtype)
        attrs = torch.cat([attrs, attrs], dim=0)
        return src, dst, attrs

    def forward(self, graph):
        if graph.num_nodes == 0:
            raise DataError("cannot encode an empty graph")
        h = self.initial_states(graph)
        src, dst, edge_attrs = self._directed_edges(graph)
        n = graph.num_nodes
        for k in range(self.depth):
            mlp, gru = self.layer(k)
            inputs = h[src]
            if self.edge_attr_dim:
                inputs = torch.cat([inputs, edge_attrs], dim=1)
            contributions = mlp(inputs)
            messages = torch.zeros(n, self.hidden_dim, dtype=self.dtype)
            messages = messages.index_add(0, dst, contributions)
            h = gru(h, messages)
        return self.readout(h)


def aggregate(neighbor_states, encoder, iteration=0):
    """Sum of the MLP over neighbor states; empty input gives a zero message.

    Rows are canonically sorted before summation, so any permutation of the
    neighbor multiset produces identical bits.
    """
    mlp, _ = encoder.layer(iteration)
    x = torch.as_tensor(
        np.asarray(neighbor_states, dtype=np.float64), dtype=encoder.dtype
    )
    if x.numel() == 0:
        return torch.zeros(encoder.hidden_dim, dtype=encoder.dtype)
    if x.ndim != 2:
        raise DataError("neighbor states must form a 2-d array")
    return mlp(x[canonical_order(x)]).sum(dim=0)


def gru_update(h, m, encoder, iteration=0):
    _, gru = encoder.layer(iteration)
    h = torch.as_tensor(np.asarray(h, dtype=np.float64), dtype=encoder.dtype)
    m = torch.as_tensor(np.asarray(m, dtype=np.float64), dtype=encoder.dtype)
    return gru(h, m)


def set2set_readout(node_states, encoder):
    states = torch.as_tensor(
        np.asarray(node_states, dtype=np.float64), dtype=encoder.dtype
    )
    return encoder.readout(states)


def encode_graph(graph, encoder):
    return encoder(graph)
