"""Recurrent prediction of the next graph embedding and the next graph size.

A single-layer LSTM with state width equal to the embedding width reads the
window of past embeddings; its final hidden state is mapped linearly to the
predicted next embedding. A small feed-forward head reads the window's
(node count, edge count) pairs and predicts how the node count changes.
"""

import torch
from torch import nn

from .errors import ConfigError, DataError


class EmbeddingPredictor(nn.Module):
    def __init__(self, embedding_dim, window_size=10, dtype=torch.float64):
        super().__init__()
        if embedding_dim < 1:
            raise ConfigError("embedding_dim must be >= 1")
        if window_size < 1:
            raise ConfigError("window_size must be >= 1")
        self.lstm = nn.LSTM(embedding_dim, embedding_dim, num_layers=1, dtype=dtype)
        self.proj = nn.Linear(embedding_dim, embedding_dim, dtype=dtype)
        self.embedding_dim = embedding_dim
        self.window_size = window_size
        self.dtype = dtype

    def _check_input(self, window):
        if window.ndim != 2 or window.shape[1] != self.embedding_dim:
            raise DataError(
                "window must be (w, %d), got %s" % (self.embedding_dim, tuple(window.shape))
            )
        if window.shape[0] != self.window_size:
            raise DataError(
                "window length %d does not match configured size %d"
                % (window.shape[0], self.window_size)
            )

    def forward(self, window):
        """Map a (w, 2d) window of embeddings to the predicted next one."""
        if not torch.is_tensor(window):
            window = torch.as_tensor(window, dtype=self.dtype)
        self._check_input(window)
        _, (h, _) = self.lstm(window.unsqueeze(1))
        return self.proj(h[-1].squeeze(0))

    def init_state(self):
        zero = torch.zeros(1, 1, self.embedding_dim, dtype=self.dtype)
        return (zero, zero.clone())


def recurrent_step(state, x, predictor):
    """One LSTM step: consume embedding x, return the updated (h, c) state."""
    if not torch.is_tensor(x):
        x = torch.as_tensor(x, dtype=predictor.dtype)
    if x.shape != (predictor.embedding_dim,):
        raise DataError(
            "input must have dimension %d, got %s"
            % (predictor.embedding_dim, tuple(x.shape))
        )
    if state is None:
        state = predictor.init_state()
    _, new_state = predictor.lstm(x.view(1, 1, -1), state)
    return new_state


def predict_embedding(window, predictor):
    return predictor(window)


class SizeHead(nn.Module):
    """Feed-forward head over the window's (n, m) pairs.

    Inputs are divided by `scale` (set from the largest count seen during
    training) so the net never sees large raw counts; outputs are raw count
    deltas relative to the last snapshot in the window.
    """

    def __init__(self, window_size=10, hidden=32, out_dim=1, dtype=torch.float64):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(2 * window_size, hidden, dtype=dtype),
            nn.ReLU(),
            nn.Linear(hidden, hidden, dtype=dtype),
            nn.ReLU(),
            nn.Linear(hidden, out_dim, dtype=dtype),
        )
        self.register_buffer("scale", torch.ones((), dtype=dtype))
        self.window_size = window_size
        self.out_dim = out_dim
        self.dtype = dtype

    def set_scale(self, value):
        self.scale.fill_(max(float(value), 1.0))

    def forward(self, history):
        if not torch.is_tensor(history):
            history = torch.as_tensor(history, dtype=self.dtype)
        if history.shape != (self.window_size, 2):
            raise DataError(
                "size history must be (%d, 2), got %s"
                % (self.window_size, tuple(history.shape))
            )
        return self.net((history / self.scale).reshape(-1))


def predict_size(history, head):
    """Next node count: last count plus the predicted delta, floored at 1."""
    history = torch.as_tensor(history, dtype=head.dtype)
    with torch.no_grad():
        delta = head(history)[0]
    n_last = float(history[-1][0])
    return max(1, int(round(n_last + float(delta))))
