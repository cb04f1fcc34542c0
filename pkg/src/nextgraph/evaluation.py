"""Weisfeiler-Lehman subtree kernel scoring, reports, and embedding diagnostics.

The kernel refines discrete node labels for a fixed number of rounds, counts
every label observed in any round, and takes the normalized inner product of
the two count vectors. Normalization puts the value in [0, 1] with 1 for
identical label distributions, so isomorphic graphs always score 1.
"""

import json

import numpy as np

from .errors import ConfigError, DataError

LABEL_RULES = ("degree", "binned_attribute")


class WLConfig:
    """Kernel settings: refinement rounds and the initial-label rule.

    With the binned_attribute rule, each component of the node attribute
    vector is divided by bin_width and rounded to the nearest integer (ties
    to even), which turns continuous attributes into discrete labels.
    """

    def __init__(self, iterations=3, label_rule="degree", bin_width=1.0):
        if iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if label_rule not in LABEL_RULES:
            raise ConfigError(
                "label_rule must be one of %s, got %r" % (list(LABEL_RULES), label_rule)
            )
        if bin_width <= 0:
            raise ConfigError("bin_width must be positive")
        self.iterations = int(iterations)
        self.label_rule = label_rule
        self.bin_width = float(bin_width)


def _initial_labels(graph, cfg):
    if graph.num_nodes == 0:
        raise DataError("cannot compute WL labels of an empty graph")
    if cfg.label_rule == "degree":
        return [("d", int(deg)) for deg in graph.degrees]
    if graph.node_attrs.shape[1] == 0:
        raise DataError("binned_attribute label rule needs node attributes")
    labels = []
    for row in graph.node_attrs:
        labels.append(("a",) + tuple(int(round(x / cfg.bin_width)) for x in row))
    return labels


def _wl_count_vectors(g1, g2, cfg):
    """Label-count dicts for both graphs over rounds 0..h, jointly compressed."""
    table = {}

    def compress(label):
        if label not in table:
            table[label] = len(table)
        return table[label]

    neighbors = [
        [np.flatnonzero(g.adjacency[i]) for i in range(g.num_nodes)] for g in (g1, g2)
    ]
    labels = [
        [compress(lab) for lab in _initial_labels(g, cfg)] for g in (g1, g2)
    ]
    counts = [{}, {}]
    for side in (0, 1):
        for lab in labels[side]:
            counts[side][lab] = counts[side].get(lab, 0) + 1
    for _ in range(cfg.iterations):
        new_labels = []
        for side, g in enumerate((g1, g2)):
            refined = []
            for i in range(g.num_nodes):
                signature = (
                    labels[side][i],
                    tuple(sorted(labels[side][j] for j in neighbors[side][i])),
                )
                lab = compress(signature)
                refined.append(lab)
                counts[side][lab] = counts[side].get(lab, 0) + 1
            new_labels.append(refined)
        labels = new_labels
    return counts


def wl_subtree_kernel(g1, g2, cfg=None):
    """Normalized WL subtree kernel value k(g1,g2)/sqrt(k(g1,g1) k(g2,g2))."""
    cfg = cfg or WLConfig()
    c1, c2 = _wl_count_vectors(g1, g2, cfg)
    k12 = sum(c1[lab] * c2.get(lab, 0) for lab in c1)
    k11 = sum(v * v for v in c1.values())
    k22 = sum(v * v for v in c2.values())
    return float(k12 / np.sqrt(k11 * k22))


class KernelReport:
    """Per-step similarities with summary statistics and a 20-bin histogram."""

    def __init__(self, similarities):
        similarities = [float(s) for s in similarities]
        for s in similarities:
            if not 0.0 <= s <= 1.0:
                raise DataError("similarity %r outside [0, 1]" % (s,))
        self.similarities = similarities
        self.mean = float(np.mean(similarities)) if similarities else 0.0
        if similarities:
            ordered = sorted(similarities)
            rank = int(np.ceil(0.9 * len(ordered)))  # nearest-rank percentile
            self.p90 = ordered[rank - 1]
        else:
            self.p90 = 0.0
        hist, _ = np.histogram(similarities, bins=20, range=(0.0, 1.0))
        self.histogram = [int(c) for c in hist]

    def to_json(self):
        return json.dumps(
            {
                "similarities": self.similarities,
                "mean": self.mean,
                "p90": self.p90,
                "histogram": self.histogram,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError("invalid report JSON: %s" % exc)
        if "similarities" not in obj:
            raise DataError("report JSON missing 'similarities'")
        return cls(obj["similarities"])


def similarity_report(predicted, truth, cfg=None):
    """Score each predicted snapshot against its true counterpart."""
    predicted, truth = list(predicted), list(truth)
    if len(predicted) != len(truth):
        raise DataError(
            "got %d predictions for %d true snapshots" % (len(predicted), len(truth))
        )
    cfg = cfg or WLConfig()
    sims = [wl_subtree_kernel(p, t, cfg) for p, t in zip(predicted, truth)]
    return KernelReport(sims)


def size_curve(predicted, truth):
    """Paired (predicted, true) node counts per step, for plotting."""
    predicted, truth = list(predicted), list(truth)
    if len(predicted) != len(truth):
        raise DataError("size curve needs equal-length sequences")
    return [(p.num_nodes, t.num_nodes) for p, t in zip(predicted, truth)]


def pca_project(embeddings):
    """Project embeddings onto their top-2 principal components.

    Returns (coords, explained) where coords is (N, 2) and explained holds
    the variance fraction of each kept component. Eigenvector signs are fixed
    so repeated runs give identical output.
    """
    X = np.asarray(list(embeddings), dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("PCA needs at least 2 embedding vectors")
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / (X.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    components = []
    for k in range(2):
        if k < eigvecs.shape[1]:
            v = eigvecs[:, k]
            pivot = np.argmax(np.abs(v))
            if v[pivot] < 0:
                v = -v
            components.append(v)
        else:
            components.append(np.zeros(X.shape[1]))
    V = np.stack(components, axis=1)
    coords = Xc @ V
    total = eigvals.sum()
    if total > 0:
        explained = np.array([eigvals[k] / total if k < eigvals.size else 0.0 for k in range(2)])
    else:
        explained = np.zeros(2)
    return coords, explained


def write_size_curve_csv(pairs, path, steps=None):
    """CSV of the curve; `steps` relabels rows with sequence indices."""
    pairs = list(pairs)
    if steps is None:
        steps = range(len(pairs))
    with open(path, "w") as fh:
        fh.write("step,predicted_nodes,true_nodes\n")
        for step, (p, t) in zip(steps, pairs):
            fh.write("%d,%d,%d\n" % (step, p, t))


def write_histogram_csv(report, path):
    edges = np.linspace(0.0, 1.0, 21)
    with open(path, "w") as fh:
        fh.write("bin_lo,bin_hi,count\n")
        for k, count in enumerate(report.histogram):
            fh.write("%s,%s,%d\n" % (repr(round(edges[k], 2)), repr(round(edges[k + 1], 2)), count))


def write_pca_csv(coords, path, labels=None):
    coords = np.asarray(coords)
    with open(path, "w") as fh:
        fh.write("pc1,pc2,label\n")
        for k in range(coords.shape[0]):
            label = "" if labels is None else str(labels[k])
            fh.write("%s,%s,%s\n" % (repr(float(coords[k, 0])), repr(float(coords[k, 1])), label))
