"""Command-line front end.

Subcommands cover the pipeline stage by stage (generate, ingest, train,
predict, evaluate, baseline, report) plus `run`, which executes a full
experiment from a JSON config. Exit codes: 0 success, 2 configuration error,
3 data error, 4 numeric failure.
"""

import argparse
import sys

from .baselines import KINDS, estimate_targets, fit_baseline
from .errors import (
    ConfigError,
    DataError,
    GenerationError,
    NumericError,
    OrderingError,
)
from .evaluation import (
    KernelReport,
    WLConfig,
    similarity_report,
    size_curve,
    write_size_curve_csv,
)
from .graphs import GraphSequence, load_jsonl, save_jsonl
from .harness import (
    OUTPUT_ROOT_ENV,
    compare_report,
    format_comparison,
    generation_seed,
    load_experiment_config,
    resolve_output_path,
    run_experiment,
    write_comparison_csv,
)
from .ingest import (
    ATTRIBUTE_RULES,
    FORMATS,
    MODES,
    SnapshotSpec,
    dataset_stats,
    parse_edge_stream,
    snapshot_sequence,
)
from .synthetic import GROW, GROW_WITH_REMOVAL, generate_scenario
from .training import ModelState, held_out_targets, train

EXIT_CODES = (
    (ConfigError, 2),
    (GenerationError, 2),
    (DataError, 3),
    (OrderingError, 3),
    (NumericError, 4),
)


def _load_sequence(path, window_size):
    return GraphSequence(load_jsonl(path), window_size)


def _save_graphs(graphs, path):
    path = resolve_output_path(path)
    save_jsonl(graphs, path)
    return path


def cmd_generate(args):
    seq = generate_scenario(args.family, args.mode, args.steps, args.window)
    path = _save_graphs(seq, args.out)
    print("wrote %d snapshots to %s" % (len(seq), path))


def cmd_ingest(args):
    edges = parse_edge_stream(args.input, args.format)
    stats = dataset_stats(edges)
    spec = SnapshotSpec(args.snapshots, mode=args.mode, attribute_rule=args.attributes)
    seq = snapshot_sequence(edges, spec, args.window)
    path = _save_graphs(seq, args.out)
    print(
        "%d edges, %d nodes, span %s..%s"
        % (
            stats["edges"],
            stats["nodes"],
            stats["first_timestamp"],
            stats["last_timestamp"],
        )
    )
    print("wrote %d snapshots to %s" % (len(seq), path))


def cmd_train(args):
    seq = _load_sequence(args.data, args.window)
    config = {
        "window_size": args.window,
        "hidden_dim": args.hidden_dim,
        "depth_K": args.depth,
        "max_nodes": args.max_nodes,
        "loss_form": args.loss_form,
        "epochs": args.epochs,
        "step_size": args.step_size,
        "seed": args.seed,
    }
    state = train(seq, config, split_fraction=args.split, log_every=args.log_every)
    path = resolve_output_path(args.out)
    state.save(path)
    print(
        "trained %d epochs; loss %.6f -> %.6f; checkpoint %s"
        % (args.epochs, state.loss_trace[0], state.loss_trace[-1], path)
    )


def cmd_predict(args):
    state = ModelState.load(args.checkpoint)
    w = state.config["window_size"]
    seq = _load_sequence(args.data, w)
    tests = held_out_targets(len(seq), w, args.split)
    if not tests:
        raise DataError("no held-out snapshots under split %r" % args.split)
    graphs = []
    for t in tests:
        window = [seq[i] for i in range(t - w, t)]
        if args.deterministic:
            graphs.append(state.model.generate_next(window, deterministic=True))
        else:
            graphs.append(
                state.model.generate_next(window, rng=generation_seed(args.seed, 0, t))
            )
    path = _save_graphs(graphs, args.out)
    print(
        "wrote %d predictions (indices %d..%d) to %s"
        % (len(graphs), tests[0], tests[-1], path)
    )


def cmd_baseline(args):
    seq = _load_sequence(args.data, args.window)
    tests = held_out_targets(len(seq), args.window, args.split)
    if not tests:
        raise DataError("no held-out snapshots under split %r" % args.split)
    graphs = []
    for t in tests:
        window = [seq[i] for i in range(t - args.window, t)]
        targets = estimate_targets(
            [(g.num_nodes, g.num_edges) for g in window], seed=args.seed
        )
        spec = fit_baseline(args.kind, window, targets=targets, seed=args.seed)
        graphs.append(spec.generate(generation_seed(args.seed, 1, t)))
    path = _save_graphs(graphs, args.out)
    print(
        "wrote %d %s samples (indices %d..%d) to %s"
        % (len(graphs), args.kind, tests[0], tests[-1], path)
    )


def _parse_slice(text):
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError("slice must look like start:stop, got %r" % text)
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError("slice bounds must be integers, got %r" % text)


def cmd_evaluate(args):
    predicted = load_jsonl(args.predicted)
    truth = load_jsonl(args.truth)
    if args.truth_slice:
        lo, hi = _parse_slice(args.truth_slice)
        truth = truth[lo:hi]
    cfg = WLConfig(
        iterations=args.iterations,
        label_rule=args.label_rule,
        bin_width=args.bin_width,
    )
    report = similarity_report(predicted, truth, cfg)
    path = resolve_output_path(args.out)
    with open(path, "w") as fh:
        fh.write(report.to_json())
    if args.size_curve:
        write_size_curve_csv(
            size_curve(predicted, truth), resolve_output_path(args.size_curve)
        )
    print("mean %.4f  90%%ile %.4f  (%d pairs)  -> %s"
          % (report.mean, report.p90, len(report.similarities), path))


def cmd_report(args):
    reports = {}
    for item in args.reports:
        if "=" not in item:
            raise ConfigError("expected NAME=PATH, got %r" % item)
        name, path = item.split("=", 1)
        with open(path) as fh:
            reports[name] = KernelReport.from_json(fh.read())
    rows = compare_report(reports)
    print(format_comparison(rows))
    if args.out:
        write_comparison_csv(rows, resolve_output_path(args.out))


def cmd_run(args):
    config = load_experiment_config(args.config)
    summary = run_experiment(config)
    print("artifacts in %s" % summary["output_dir"])
    for method, stats in summary["methods"].items():
        print("%s: mean %.4f  90%%ile %.4f" % (method, stats["mean"], stats["p90"]))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nextgraph",
        description="Learn from graph snapshot sequences and predict the next "
        "topology. Relative output paths are placed under $%s when it is set."
        % OUTPUT_ROOT_ENV,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic snapshot sequence")
    p.add_argument("--family", required=True, choices=("path", "cycle", "ladder"))
    p.add_argument("--mode", default=GROW, choices=(GROW, GROW_WITH_REMOVAL))
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="cut a timestamped edge file into snapshots")
    p.add_argument("--input", required=True)
    p.add_argument("--format", required=True, choices=sorted(FORMATS))
    p.add_argument("--snapshots", type=int, required=True)
    p.add_argument("--mode", default=MODES[0], choices=MODES)
    p.add_argument("--attributes", default=ATTRIBUTE_RULES[0], choices=ATTRIBUTE_RULES)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="fit the pipeline on a snapshot file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--hidden-dim", type=int, default=32)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--max-nodes", type=int, default=64)
    p.add_argument("--loss-form", default="bce", choices=("bce", "literal"))
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--step-size", type=float, default=0.0001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--log-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="sample the held-out snapshots from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("baseline", help="sample held-out snapshots from a classical generator")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="score predictions against true snapshots")
    p.add_argument("--predicted", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-slice", default="", help="start:stop slice of the truth file")
    p.add_argument("--size-curve", default="", help="also write a size-curve CSV here")
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--label-rule", default="degree", choices=("degree", "binned_attribute"))
    p.add_argument("--bin-width", type=float, default=1.0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="tabulate similarity reports side by side")
    p.add_argument("reports", nargs="+", metavar="NAME=PATH")
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="run a full experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except tuple(cls for cls, _ in EXIT_CODES) as exc:
        print("error: %s" % exc, file=sys.stderr)
        for cls, code in EXIT_CODES:
            if isinstance(exc, cls):
                return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
