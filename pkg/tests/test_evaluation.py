import json

import numpy as np
import pytest

from helpers import cycle_graph, graph_from_edges, path_graph, random_graph
from oracles import degree_label, wl_oracle
from nextgraph.errors import ConfigError, DataError
from nextgraph.evaluation import (
    KernelReport,
    WLConfig,
    pca_project,
    similarity_report,
    size_curve,
    wl_subtree_kernel,
    write_histogram_csv,
    write_pca_csv,
    write_size_curve_csv,
)
from nextgraph.graphs import Graph
from nextgraph.synthetic import gen_cycle_sequence, gen_path_sequence


def permuted_copy(graph, rng):
    perm = rng.permutation(graph.num_nodes)
    adjacency = graph.adjacency[np.ix_(perm, perm)]
    return Graph(list(range(graph.num_nodes)), adjacency)


class TestKernel:
    def test_self_similarity(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            g = random_graph(rng, int(rng.integers(2, 15)))
            assert wl_subtree_kernel(g, g) == 1.0

    def test_isomorphism_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            g = random_graph(rng, int(rng.integers(2, 12)))
            assert wl_subtree_kernel(g, permuted_copy(g, rng)) == 1.0

    def test_p3_vs_c3_matches_oracle(self):
        cfg = WLConfig(iterations=1, label_rule="degree")
        value = wl_subtree_kernel(path_graph(3), cycle_graph(3), cfg)
        oracle = wl_oracle(path_graph(3), cycle_graph(3), 1, degree_label)
        assert value == oracle
        # 3 matching subtree patterns, norms sqrt(10) and sqrt(18).
        assert value == pytest.approx(0.22360679774997896, abs=1e-12)

    def test_oracle_equivalence_random_pairs(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            n1, n2 = rng.integers(1, 9, size=2)
            g1 = random_graph(rng, int(n1), p=float(rng.random()))
            g2 = random_graph(rng, int(n2), p=float(rng.random()))
            h = int(rng.integers(0, 4))
            cfg = WLConfig(iterations=h)
            assert wl_subtree_kernel(g1, g2, cfg) == wl_oracle(g1, g2, h, degree_label)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            g1 = random_graph(rng, int(rng.integers(2, 10)))
            g2 = random_graph(rng, int(rng.integers(2, 10)))
            assert wl_subtree_kernel(g1, g2) == wl_subtree_kernel(g2, g1)

    def test_range(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            g1 = random_graph(rng, int(rng.integers(1, 12)), p=float(rng.random()))
            g2 = random_graph(rng, int(rng.integers(1, 12)), p=float(rng.random()))
            assert 0.0 <= wl_subtree_kernel(g1, g2) <= 1.0

    def test_gram_positive_semidefinite(self):
        rng = np.random.default_rng(5)
        graphs = [random_graph(rng, int(rng.integers(3, 13))) for _ in range(10)]
        gram = np.array(
            [[wl_subtree_kernel(a, b) for b in graphs] for a in graphs]
        )
        assert np.linalg.eigvalsh(gram).min() >= -1e-8

    def test_h0_equals_cosine_of_label_counts(self):
        rng = np.random.default_rng(6)
        cfg = WLConfig(iterations=0)
        for _ in range(20):
            g1 = random_graph(rng, int(rng.integers(2, 10)))
            g2 = random_graph(rng, int(rng.integers(2, 10)))
            labels = sorted(set(g1.degrees.tolist()) | set(g2.degrees.tolist()))
            v1 = np.array([(g1.degrees == lab).sum() for lab in labels], dtype=float)
            v2 = np.array([(g2.degrees == lab).sum() for lab in labels], dtype=float)
            cosine = v1 @ v2 / (np.linalg.norm(v1) * np.linalg.norm(v2))
            assert wl_subtree_kernel(g1, g2, cfg) == pytest.approx(cosine, abs=1e-12)

    def test_empty_graph_rejected(self):
        empty = Graph([], np.zeros((0, 0), dtype=bool))
        with pytest.raises(DataError):
            wl_subtree_kernel(empty, path_graph(3))

    def test_binned_attribute_rule(self):
        one = lambda attr: Graph([0], np.zeros((1, 1), dtype=bool), np.array([[attr]]))
        cfg = WLConfig(iterations=0, label_rule="binned_attribute", bin_width=1.0)
        assert wl_subtree_kernel(one(0.4), one(0.45), cfg) == 1.0
        assert wl_subtree_kernel(one(0.4), one(0.6), cfg) == 0.0

    def test_binned_attribute_needs_attrs(self):
        cfg = WLConfig(label_rule="binned_attribute")
        with pytest.raises(DataError):
            wl_subtree_kernel(path_graph(3), path_graph(3), cfg)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            WLConfig(iterations=-1)
        with pytest.raises(ConfigError):
            WLConfig(label_rule="colors")
        with pytest.raises(ConfigError):
            WLConfig(bin_width=0.0)


class TestKernelReport:
    def test_mean(self):
        report = KernelReport([0.5, 1.0])
        assert report.mean == 0.75
        assert report.p90 == 1.0

    def test_identical_pairs(self):
        report = KernelReport([1.0] * 7)
        assert report.mean == 1.0
        assert report.p90 == 1.0

    def test_p90_nearest_rank(self):
        sims = [k / 10 for k in range(1, 11)]  # 0.1..1.0
        report = KernelReport(sims)
        assert report.p90 == 0.9  # rank ceil(0.9*10) = 9

    def test_histogram(self):
        report = KernelReport([0.0, 0.04, 0.06, 1.0])
        assert sum(report.histogram) == 4
        assert len(report.histogram) == 20
        assert report.histogram[0] == 2
        assert report.histogram[1] == 1
        assert report.histogram[19] == 1

    def test_rejects_out_of_range(self):
        with pytest.raises(DataError):
            KernelReport([1.2])

    def test_json_round_trip(self):
        report = KernelReport([0.25, 0.5, 1.0])
        text = report.to_json()
        obj = json.loads(text)
        assert set(obj) == {"similarities", "mean", "p90", "histogram"}
        back = KernelReport.from_json(text)
        assert back.similarities == report.similarities
        assert back.to_json() == text

    def test_report_from_sequences(self):
        seq = list(gen_path_sequence(5))
        report = similarity_report(seq, seq)
        assert report.mean == 1.0
        with pytest.raises(DataError):
            similarity_report(seq, seq[:-1])


class TestSizeCurve:
    def test_perfect_predictor(self):
        seq = list(gen_path_sequence(6))
        assert all(p == t for p, t in size_curve(seq, seq))

    def test_path_truth_series(self):
        seq = list(gen_path_sequence(6))
        curve = size_curve(seq, seq)
        assert [t for _, t in curve] == [3 + t for t in range(6)]

    def test_divergence_is_visible(self):
        # Path predictions against cycle-with-removal truth: the curve must
        # show the systematic size mismatch rather than hide it.
        truth = list(gen_cycle_sequence(9, mode="grow_with_removal"))
        predicted = list(gen_path_sequence(9))
        curve = size_curve(predicted, truth)
        assert any(p != t for p, t in curve)
        assert [t for _, t in curve] == [g.num_nodes for g in truth]

    def test_length_mismatch(self):
        seq = list(gen_path_sequence(4))
        with pytest.raises(DataError):
            size_curve(seq, seq[:-1])


class TestPCA:
    def test_line_collapses_to_first_component(self):
        rng = np.random.default_rng(7)
        direction = rng.normal(size=16)
        points = np.outer(np.linspace(-2, 2, 30), direction)
        coords, explained = pca_project(points)
        assert coords[:, 1].var() == pytest.approx(0.0, abs=1e-18)
        assert explained[0] == pytest.approx(1.0, abs=1e-12)

    def test_2d_input_preserves_distances(self):
        rng = np.random.default_rng(8)
        points = rng.normal(size=(25, 2))
        coords, _ = pca_project(points)
        for i in range(5):
            for j in range(5):
                d_in = np.linalg.norm(points[i] - points[j])
                d_out = np.linalg.norm(coords[i] - coords[j])
                assert d_out == pytest.approx(d_in, abs=1e-10)

    def test_reconstruction_error_is_discarded_eigenvalue_mass(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(40, 6))
        Xc = X - X.mean(axis=0)
        cov = Xc.T @ Xc / (X.shape[0] - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1]
        V = eigvecs[:, order[:2]]
        recon = ((Xc - Xc @ V @ V.T) ** 2).sum() / (X.shape[0] - 1)
        discarded = eigvals[order[2:]].sum()
        assert recon == pytest.approx(discarded, rel=1e-10)
        # and the package projection spans the same subspace
        coords, explained = pca_project(X)
        assert coords.shape == (40, 2)
        kept = eigvals[order[:2]].sum()
        assert explained.sum() == pytest.approx(kept / eigvals.sum(), rel=1e-10)

    def test_zero_variance(self):
        points = np.ones((5, 3))
        coords, explained = pca_project(points)
        assert np.allclose(coords, 0.0)
        assert np.allclose(explained, 0.0)

    def test_needs_two_points(self):
        with pytest.raises(DataError):
            pca_project(np.ones((1, 3)))

    def test_deterministic(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(12, 5))
        c1, e1 = pca_project(X)
        c2, e2 = pca_project(X)
        assert np.array_equal(c1, c2) and np.array_equal(e1, e2)


class TestCsvWriters:
    def test_size_curve_csv(self, tmp_path):
        path = tmp_path / "curve.csv"
        write_size_curve_csv([(3, 3), (4, 5)], path)
        lines = path.read_text().splitlines()
        assert lines[0] == "step,predicted_nodes,true_nodes"
        assert lines[1:] == ["0,3,3", "1,4,5"]

    def test_histogram_csv(self, tmp_path):
        path = tmp_path / "hist.csv"
        write_histogram_csv(KernelReport([0.5, 1.0]), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "bin_lo,bin_hi,count"
        assert len(lines) == 21

    def test_pca_csv(self, tmp_path):
        path = tmp_path / "pca.csv"
        write_pca_csv(np.array([[1.0, 2.0], [3.0, 4.0]]), path, labels=["a", "b"])
        lines = path.read_text().splitlines()
        assert lines[0] == "pc1,pc2,label"
        assert lines[1] == "1.0,2.0,a"
