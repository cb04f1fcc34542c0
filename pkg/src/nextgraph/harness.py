"""Experiment orchestration: config files, end-to-end runs, comparison tables.

An experiment is described by a JSON config naming a dataset (synthetic
scenario or timestamped edge file), a train/test split, model settings, and a
list of baseline generators. Running it trains the pipeline on the early part
of the sequence, predicts every held-out snapshot with the model and with each
baseline on identical windows, and writes similarity reports, size curves,
embedding projections, and a checkpoint under one output directory. Every
artifact is reproduced byte for byte when config and seed are unchanged.
"""

import json
import os
import pathlib

import numpy as np
import torch

from .baselines import KINDS, estimate_targets, fit_baseline
from .errors import ConfigError, DataError, NextgraphError
from .evaluation import (
    KernelReport,
    pca_project,
    similarity_report,
    size_curve,
    write_histogram_csv,
    write_pca_csv,
    write_size_curve_csv,
)
from .ingest import MODES, ATTRIBUTE_RULES, FORMATS, SnapshotSpec, parse_edge_stream, snapshot_sequence
from .synthetic import GROW, generate_scenario
from .training import held_out_targets, resolve_config, train
from .utils import read_json_file

OUTPUT_ROOT_ENV = "NEXTGRAPH_OUT_DIR"
MODEL_METHOD = "model"

_TOP_KEYS = {
    "dataset",
    "split_fraction",
    "window_size",
    "model",
    "baselines",
    "seed",
    "output_dir",
}
_MODEL_KEYS = {"hidden_dim", "depth_K", "max_nodes", "loss_form", "epochs", "step_size"}
_SYNTHETIC_KEYS = {"kind", "family", "mode", "steps"}
_FILE_KEYS = {"kind", "path", "format", "snapshots", "mode", "attribute_rule"}


def _reject_unknown(obj, allowed, where):
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError("unknown %s keys: %s" % (where, ", ".join(unknown)))


class ExperimentConfig:
    """Validated experiment description.

    `model` holds the fully resolved training config (window size and seed
    folded in); `dataset` keeps the normalized dataset block.
    """

    def __init__(self, obj):
        if not isinstance(obj, dict):
            raise ConfigError("experiment config must be a JSON object")
        _reject_unknown(obj, _TOP_KEYS, "config")
        if "dataset" not in obj:
            raise ConfigError("config is missing 'dataset'")
        self.dataset = self._check_dataset(obj["dataset"])
        self.split_fraction = float(obj.get("split_fraction", 0.8))
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError("split_fraction must lie in (0, 1)")
        self.window_size = obj.get("window_size", 10)
        self.seed = obj.get("seed", 0)
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        model = obj.get("model", {})
        if not isinstance(model, dict):
            raise ConfigError("'model' must be an object")
        for key in ("window_size", "seed"):
            if key in model:
                raise ConfigError("set %r at the top level, not under 'model'" % key)
        _reject_unknown(model, _MODEL_KEYS, "model")
        merged = dict(model)
        merged["window_size"] = self.window_size
        merged["seed"] = self.seed
        self.model = resolve_config(merged)
        baselines = obj.get("baselines", [])
        if not isinstance(baselines, list):
            raise ConfigError("'baselines' must be a list of generator names")
        for kind in baselines:
            if kind not in KINDS:
                raise ConfigError(
                    "unknown baseline %r; choose from %s" % (kind, list(KINDS))
                )
        if len(set(baselines)) != len(baselines):
            raise ConfigError("duplicate baseline names")
        self.baselines = tuple(baselines)
        output_dir = obj.get("output_dir", "")
        if not output_dir or not isinstance(output_dir, str):
            raise ConfigError("config needs a non-empty 'output_dir'")
        self.output_dir = output_dir

    @staticmethod
    def _check_dataset(block):
        if not isinstance(block, dict) or "kind" not in block:
            raise ConfigError("'dataset' must be an object with a 'kind'")
        kind = block["kind"]
        if kind == "synthetic":
            _reject_unknown(block, _SYNTHETIC_KEYS, "dataset")
            for key in ("family", "steps"):
                if key not in block:
                    raise ConfigError("synthetic dataset needs %r" % key)
            out = dict(block)
            out.setdefault("mode", GROW)
            return out
        if kind == "file":
            _reject_unknown(block, _FILE_KEYS, "dataset")
            for key in ("path", "format", "snapshots"):
                if key not in block:
                    raise ConfigError("file dataset needs %r" % key)
            if block["format"] not in FORMATS:
                raise ConfigError(
                    "unknown edge format %r; choose from %s"
                    % (block["format"], sorted(FORMATS))
                )
            out = dict(block)
            out.setdefault("mode", MODES[0])
            out.setdefault("attribute_rule", ATTRIBUTE_RULES[0])
            return out
        raise ConfigError("dataset kind must be 'synthetic' or 'file', got %r" % kind)


def load_experiment_config(path):
    return ExperimentConfig(read_json_file(path))


def resolve_dataset(config):
    """Materialize the configured dataset as a GraphSequence."""
    block = config.dataset
    if block["kind"] == "synthetic":
        return generate_scenario(
            block["family"], block["mode"], block["steps"], config.window_size
        )
    edges = parse_edge_stream(block["path"], block["format"])
    spec = SnapshotSpec(
        block["snapshots"], mode=block["mode"], attribute_rule=block["attribute_rule"]
    )
    return snapshot_sequence(edges, spec, config.window_size)


def resolve_output_path(path):
    """Resolve an output path under the optional output-root env var."""
    path = pathlib.Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        return pathlib.Path(root) / path
    return path


def generation_seed(base, method_index, step_index):
    """Distinct, reproducible sampling seed per (method, test step)."""
    return (base * 1_000_003 + step_index) * 64 + method_index


def _run_stage(stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except NextgraphError as exc:
        raise type(exc)("stage '%s': %s" % (stage, exc)) from exc
    except OSError as exc:
        raise DataError("stage '%s': %s" % (stage, exc)) from exc


def _model_predictions(state, windows, tests, seed):
    graphs, embeddings = [], []
    for j, window in enumerate(windows):
        with torch.no_grad():
            embedding, _ = state.model.predict_next(window)
        embeddings.append(embedding.numpy())
        graphs.append(
            state.model.generate_next(window, rng=generation_seed(seed, 0, tests[j]))
        )
    return graphs, np.array(embeddings)


def _baseline_predictions(kind, method_index, windows, tests, shared_targets, seed):
    graphs = []
    for j, window in enumerate(windows):
        sample_seed = generation_seed(seed, method_index, tests[j])
        spec = fit_baseline(kind, window, targets=shared_targets[j], seed=seed)
        graphs.append(spec.generate(sample_seed))
    return graphs


def run_experiment(config):
    """Train, predict every held-out snapshot, and write all artifacts.

    Returns a summary dict with the output directory, test indices, and the
    mean/90th-percentile similarity per method.
    """
    out = resolve_output_path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    sequence = _run_stage("dataset", resolve_dataset, config)
    state = _run_stage(
        "train", train, sequence, config.model, config.split_fraction
    )
    _run_stage("checkpoint", state.save, out / "checkpoint.json")
    _write_loss_trace(state.loss_trace, out / "loss_trace.csv")

    w = config.window_size
    tests = held_out_targets(len(sequence), w, config.split_fraction)
    windows = [[sequence[i] for i in range(t - w, t)] for t in tests]
    truth = [sequence[t] for t in tests]

    predicted = {}
    predicted[MODEL_METHOD], embeddings = _run_stage(
        "predict", _model_predictions, state, windows, tests, config.seed
    )
    shared_targets = None
    if config.baselines:
        shared_targets = _run_stage(
            "baseline-targets",
            lambda: [
                estimate_targets(
                    [(g.num_nodes, g.num_edges) for g in window], seed=config.seed
                )
                for window in windows
            ],
        )
    for k, kind in enumerate(config.baselines):
        predicted[kind] = _run_stage(
            "baseline:%s" % kind,
            _baseline_predictions,
            kind,
            k + 1,
            windows,
            tests,
            shared_targets,
            config.seed,
        )

    reports = {}
    for method, graphs in predicted.items():
        report = _run_stage("evaluate", similarity_report, graphs, truth)
        reports[method] = report
        (out / ("report_%s.json" % method)).write_text(report.to_json())
        write_histogram_csv(report, out / ("histogram_%s.csv" % method))
        plot_histogram(report, out / ("histogram_%s.png" % method), title=method)

    pairs = size_curve(predicted[MODEL_METHOD], truth)
    write_size_curve_csv(pairs, out / "size_curve.csv", steps=tests)
    plot_size_curve(pairs, out / "size_curve.png", steps=tests)

    _write_embeddings(embeddings, tests, out / "embeddings.csv")
    if len(tests) >= 2:
        coords, _ = pca_project(embeddings)
        write_pca_csv(coords, out / "pca.csv", labels=tests)
        plot_pca(coords, out / "pca.png")

    rows = compare_report(reports)
    write_comparison_csv(rows, out / "comparison.csv")
    (out / "comparison.txt").write_text(format_comparison(rows) + "\n")

    return {
        "output_dir": str(out),
        "test_indices": tests,
        "methods": {
            method: {"mean": rep.mean, "p90": rep.p90}
            for method, rep in reports.items()
        },
    }


def _write_loss_trace(trace, path):
    with open(path, "w") as fh:
        fh.write("epoch,mean_window_loss\n")
        for epoch, value in enumerate(trace):
            fh.write("%d,%s\n" % (epoch, repr(float(value))))


def _write_embeddings(embeddings, tests, path):
    embeddings = np.asarray(embeddings)
    with open(path, "w") as fh:
        fh.write("step," + ",".join("e%d" % k for k in range(embeddings.shape[1])) + "\n")
        for j, t in enumerate(tests):
            fh.write("%d," % t + ",".join(repr(float(x)) for x in embeddings[j]) + "\n")


def compare_report(reports):
    """Summary rows (method, mean, p90) with the best of each column marked.

    Row order follows the order of `reports`; ties mark every maximum.
    """
    if not reports:
        raise DataError("comparison needs at least one report")
    for method, report in reports.items():
        if not isinstance(report, KernelReport):
            raise DataError("entry %r is not a kernel report" % method)
    best_mean = max(r.mean for r in reports.values())
    best_p90 = max(r.p90 for r in reports.values())
    rows = []
    for method, report in reports.items():
        rows.append(
            {
                "method": method,
                "mean": report.mean,
                "p90": report.p90,
                "best_mean": report.mean == best_mean,
                "best_p90": report.p90 == best_p90,
            }
        )
    return rows


def format_comparison(rows):
    """Plain-text table; the best value per column carries a trailing '*'."""
    width = max([len("method")] + [len(r["method"]) for r in rows])
    lines = ["%-*s  %7s  %7s" % (width, "method", "mean", "90%ile")]
    for r in rows:
        lines.append(
            "%-*s  %7s  %7s"
            % (
                width,
                r["method"],
                "%.2f%s" % (r["mean"], "*" if r["best_mean"] else ""),
                "%.2f%s" % (r["p90"], "*" if r["best_p90"] else ""),
            )
        )
    return "\n".join(lines)


def write_comparison_csv(rows, path):
    with open(path, "w") as fh:
        fh.write("method,mean,p90,best_mean,best_p90\n")
        for r in rows:
            fh.write(
                "%s,%s,%s,%d,%d\n"
                % (r["method"], repr(r["mean"]), repr(r["p90"]),
                   r["best_mean"], r["best_p90"])
            )


def _plt():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def plot_size_curve(pairs, path, steps=None):
    plt = _plt()
    pairs = list(pairs)
    xs = list(steps) if steps is not None else list(range(len(pairs)))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, [t for _, t in pairs], label="true", marker="o", markersize=3)
    ax.plot(xs, [p for p, _ in pairs], label="predicted", marker="x", markersize=4)
    ax.set_xlabel("snapshot index")
    ax.set_ylabel("node count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_histogram(report, path, title=None):
    plt = _plt()
    edges = np.linspace(0.0, 1.0, 21)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(edges[:-1], report.histogram, width=0.05, align="edge")
    ax.set_xlabel("similarity")
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_pca(coords, path, labels=None):
    plt = _plt()
    coords = np.asarray(coords)
    fig, ax = plt.subplots(figsize=(5, 5))
    if labels is None:
        ax.scatter(coords[:, 0], coords[:, 1], s=12)
    else:
        labels = list(labels)
        for value in sorted(set(labels)):
            mask = np.array([lab == value for lab in labels])
            ax.scatter(coords[mask, 0], coords[mask, 1], s=12, label=str(value))
        ax.legend()
    ax.set_xlabel("pc1")
    ax.set_ylabel("pc2")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
