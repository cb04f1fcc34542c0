"""Joint training of the encode / predict / size / decode pipeline.

One optimization drives all four parts: each training window is encoded
snapshot by snapshot, the recurrent predictor maps the window to the next
embedding, that embedding seeds the decoder, and the decoder is scored with
teacher forcing against the true next snapshot's adjacency-vector sequence.
A squared-error term on the size head is added so node counts are learned
from the same windows.
"""

import json
import math

import numpy as np
import torch

from .decoder import GraphDecoder, sample_graph
from .encoder import GraphEncoder
from .errors import ConfigError, NumericError
from .graphs import to_adjacency_sequence
from .predictor import EmbeddingPredictor, SizeHead, predict_size
from .utils import apply_state, init_parameters, module_state_json, read_json_file

DEFAULT_CONFIG = {
    "window_size": 10,
    "hidden_dim": 32,
    "depth_K": 2,
    "max_nodes": 64,
    "loss_form": "bce",
    "epochs": 50,
    "step_size": 0.1,
    "seed": 0,
}


def resolve_config(overrides=None):
    """Fill a training config from defaults, rejecting unknown keys."""
    config = dict(DEFAULT_CONFIG)
    if overrides:
        unknown = sorted(set(overrides) - set(DEFAULT_CONFIG))
        if unknown:
            raise ConfigError("unknown config keys: %s" % ", ".join(unknown))
        config.update(overrides)
    if config["window_size"] < 1:
        raise ConfigError("window_size must be >= 1")
    if config["hidden_dim"] < 1:
        raise ConfigError("hidden_dim must be >= 1")
    if config["depth_K"] < 1:
        raise ConfigError("depth_K must be >= 1")
    if config["max_nodes"] < 2:
        raise ConfigError("max_nodes must be >= 2")
    if config["loss_form"] not in ("bce", "literal"):
        raise ConfigError("loss_form must be 'bce' or 'literal'")
    if config["epochs"] < 0:
        raise ConfigError("epochs must be >= 0")
    if config["step_size"] <= 0:
        raise ConfigError("step_size must be positive")
    return config


class GraphSequenceModel(torch.nn.Module):
    """Encoder, window predictor, size head, and decoder under one roof."""

    def __init__(self, config=None):
        super().__init__()
        config = resolve_config(config)
        dim = 2 * config["hidden_dim"]
        self.encoder = GraphEncoder(
            hidden_dim=config["hidden_dim"], depth=config["depth_K"]
        )
        self.predictor = EmbeddingPredictor(dim, window_size=config["window_size"])
        self.size_head = SizeHead(window_size=config["window_size"])
        self.decoder = GraphDecoder(dim, max_nodes=config["max_nodes"])
        self.config = config

    def window_embeddings(self, graphs):
        return torch.stack([self.encoder(g) for g in graphs])

    def predict_next(self, graphs):
        """Window of w graphs -> (next embedding, next node count)."""
        self._check_window(graphs)
        embedding = self.predictor(self.window_embeddings(graphs))
        n_next = predict_size(size_history(graphs), self.size_head)
        return embedding, n_next

    def generate_next(self, graphs, rng=None, deterministic=False):
        """Predict the snapshot after the window as a concrete graph."""
        with torch.no_grad():
            embedding, n_next = self.predict_next(graphs)
        n_next = min(n_next, self.decoder.max_nodes)
        return sample_graph(
            self.decoder,
            embedding.numpy(),
            n_next,
            rng=rng,
            deterministic=deterministic,
        )

    def _check_window(self, graphs):
        if len(graphs) != self.config["window_size"]:
            raise ConfigError(
                "expected a window of %d graphs, got %d"
                % (self.config["window_size"], len(graphs))
            )


def size_history(graphs):
    return np.array([[g.num_nodes, g.num_edges] for g in graphs], dtype=np.float64)


def edge_term(logits, targets, form):
    if form == "literal":
        p = torch.sigmoid(logits)
        return (targets * (1.0 - p) + (1.0 - targets) * p).sum()
    return torch.nn.functional.binary_cross_entropy_with_logits(
        logits, targets, reduction="sum"
    )


def window_loss(model, sequence, target_index, form):
    """Teacher-forced loss for one (window, next snapshot) pair."""
    w = model.config["window_size"]
    window = [sequence[i] for i in range(target_index - w, target_index)]
    target = sequence[target_index]

    embedding = model.predictor(model.window_embeddings(window))
    rows = to_adjacency_sequence(target, sequence.registry)
    logits, targets = model.decoder.teacher_forced_logits(embedding, rows)
    loss = edge_term(logits, targets, form)

    history = torch.as_tensor(size_history(window))
    delta = model.size_head(history)[0]
    true_delta = float(target.num_nodes - window[-1].num_nodes)
    return loss + (delta - true_delta) ** 2


class ModelState:
    """Trained pipeline plus its config and per-epoch loss trace."""

    def __init__(self, model, loss_trace):
        self.model = model
        self.config = model.config
        self.loss_trace = list(loss_trace)

    def to_json(self):
        payload = {
            "config": self.config,
            "loss_trace": self.loss_trace,
            "parameters": json.loads(module_state_json(self.model)),
        }
        return json.dumps(payload, sort_keys=True)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        obj = read_json_file(path)
        model = GraphSequenceModel(obj.get("config"))
        apply_state(model, obj["parameters"])
        return cls(model, obj.get("loss_trace", []))


def training_targets(length, window_size, split_fraction):
    """Target indices for the training region under the temporal split."""
    split = int(math.floor(split_fraction * length))
    return list(range(window_size, split))


def held_out_targets(length, window_size, split_fraction):
    """Target indices reserved for evaluation (history may cross the split)."""
    split = int(math.floor(split_fraction * length))
    return list(range(max(split, window_size), length))


def mean_window_loss(model, sequence, targets, form):
    with torch.no_grad():
        total = sum(
            float(window_loss(model, sequence, t, form)) for t in targets
        )
    return total / len(targets)


def train(sequence, config=None, split_fraction=0.8, log_every=0):
    """Fit the full pipeline on the first `split_fraction` of a sequence.

    Plain stochastic gradient descent over shuffled windows with a fixed
    step size. The returned state carries a loss trace whose first entry is
    the pre-training loss, followed by one mean per-window loss per epoch.
    """
    config = resolve_config(config)
    if not 0.0 < split_fraction < 1.0:
        raise ConfigError("split_fraction must lie in (0, 1)")
    w = config["window_size"]
    if len(sequence) <= w + 1:
        raise ConfigError(
            "sequence of length %d is too short for window size %d"
            % (len(sequence), w)
        )
    targets = training_targets(len(sequence), w, split_fraction)
    if not targets:
        raise ConfigError("no training windows fit before the split point")
    largest = max(g.num_nodes for g in sequence)
    if largest > config["max_nodes"]:
        raise ConfigError(
            "sequence holds a %d-node snapshot; raise max_nodes (now %d)"
            % (largest, config["max_nodes"])
        )

    model = GraphSequenceModel(config)
    init_parameters(model, config["seed"])
    scale = max(
        max(sequence[t].num_nodes, sequence[t].num_edges) for t in targets
    )
    model.size_head.set_scale(scale)

    optimizer = torch.optim.SGD(model.parameters(), lr=config["step_size"])
    rng = np.random.default_rng(config["seed"])
    form = config["loss_form"]
    trace = [mean_window_loss(model, sequence, targets, form)]

    for epoch in range(config["epochs"]):
        total = 0.0
        for t in rng.permutation(targets):
            loss = window_loss(model, sequence, int(t), form)
            value = float(loss.detach())
            if not math.isfinite(value):
                raise NumericError(
                    "non-finite loss %r at epoch %d, target index %d"
                    % (value, epoch, int(t))
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += value
        trace.append(total / len(targets))
        if log_every and (epoch + 1) % log_every == 0:
            print("epoch %d: mean window loss %.6f" % (epoch + 1, trace[-1]))
    return ModelState(model, trace)
