import math

import numpy as np
import pytest
import torch

from helpers import cycle_graph, graph_from_edges, path_graph, permute_graph, random_graph
from nextgraph.errors import ConfigError, DataError
from nextgraph.encoder import (
    GraphEncoder,
    aggregate,
    canonical_order,
    encode_graph,
    gru_update,
    set2set_readout,
)
from nextgraph.graphs import Graph, assign_degree_attributes
from nextgraph.utils import init_parameters, load_checkpoint, module_state_json, save_checkpoint


def make_encoder(hidden_dim=8, depth=2, seed=0, **kwargs):
    enc = GraphEncoder(hidden_dim=hidden_dim, depth=depth, **kwargs)
    init_parameters(enc, seed)
    return enc


def zero_parameters(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()


class TestAggregate:
    def test_empty_neighborhood(self):
        enc = make_encoder()
        msg = aggregate(np.zeros((0, 9)), enc)
        assert torch.equal(msg, torch.zeros(8, dtype=torch.float64))

    def test_repeated_neighbor_doubles(self):
        enc = make_encoder()
        state = np.linspace(-1, 1, 9)
        single = aggregate([state], enc)
        double = aggregate([state, state], enc)
        assert torch.allclose(double, 2 * single, rtol=0, atol=1e-14)

    def test_permutation_invariant_bits(self):
        enc = make_encoder()
        rng = np.random.default_rng(0)
        states = rng.normal(size=(6, 9))
        base = aggregate(states, enc)
        for _ in range(10):
            shuffled = states[rng.permutation(6)]
            assert torch.equal(aggregate(shuffled, enc), base)


class TestGatedUpdate:
    def test_zero_weights(self):
        enc = make_encoder(hidden_dim=2)
        zero_parameters(enc)
        out = gru_update([1.0, 1.0], [3.0, -7.0], enc)
        assert torch.allclose(out, torch.tensor([0.5, 0.5], dtype=torch.float64))

    def test_scalar_reference(self):
        # Independent evaluation of the update equations at d=1 with all six
        # weights equal to 1 and h = m = 0.5.
        sig = lambda x: 1 / (1 + math.exp(-x))
        h = m = 0.5
        r = sig(m + h)
        z = sig(m + h)
        cand = math.tanh(m + r * h)
        expected = (1 - z) * h + z * cand
        assert expected == pytest.approx(0.645550508312283, abs=1e-15)

        enc = make_encoder(hidden_dim=1)
        with torch.no_grad():
            for p in enc.grus[0].parameters():
                p.fill_(1.0)
        out = gru_update([0.5], [0.5], enc)
        assert float(out.detach()) == pytest.approx(expected, abs=1e-15)

    def test_gate_ranges(self):
        enc = make_encoder(hidden_dim=6, seed=3)
        cell = enc.grus[0]
        rng = np.random.default_rng(1)
        for _ in range(20):
            h = torch.as_tensor(rng.normal(size=6) * 5)
            m = torch.as_tensor(rng.normal(size=6) * 5)
            r = torch.sigmoid(m @ cell.w_r.T + h @ cell.u_r.T)
            z = torch.sigmoid(m @ cell.w_z.T + h @ cell.u_z.T)
            cand = torch.tanh(m @ cell.w_h.T + (r * h) @ cell.u_h.T)
            assert ((r > 0) & (r < 1)).all()
            assert ((z > 0) & (z < 1)).all()
            assert ((cand > -1) & (cand < 1)).all()

    def test_dimension_mismatch(self):
        enc = make_encoder(hidden_dim=4)
        with pytest.raises(DataError):
            gru_update([1.0, 2.0], [1.0, 2.0, 3.0, 4.0], enc)

    def test_state_stays_bounded(self):
        enc = make_encoder(hidden_dim=5, seed=7)
        rng = np.random.default_rng(2)
        h = torch.as_tensor(rng.normal(size=(3, 5)) * 4)
        bound = max(float(h.abs().max()), 1.0)
        with torch.no_grad():
            for _ in range(50):
                m = torch.as_tensor(rng.normal(size=(3, 5)) * 10)
                h = enc.grus[1](h, m)
                assert float(h.abs().max()) <= bound + 1e-12


class TestReadout:
    def test_single_node_vs_repeated(self):
        enc = make_encoder()
        state = np.linspace(-0.5, 0.5, 8)
        one = set2set_readout([state], enc)
        two = set2set_readout([state, state], enc)
        assert torch.equal(one, two)

    def test_permutation_bit_identical(self):
        enc = make_encoder()
        rng = np.random.default_rng(3)
        states = rng.normal(size=(7, 8))
        base = set2set_readout(states, enc)
        for _ in range(10):
            assert torch.equal(set2set_readout(states[rng.permutation(7)], enc), base)

    def test_output_dimension(self):
        enc = GraphEncoder(hidden_dim=64)
        init_parameters(enc, 0)
        rng = np.random.default_rng(4)
        out = set2set_readout(rng.normal(size=(5, 64)), enc)
        assert out.shape == (128,)

    def test_empty_set_rejected(self):
        enc = make_encoder()
        with pytest.raises(DataError):
            set2set_readout(np.zeros((0, 8)), enc)


class TestEncodeGraph:
    def test_isomorphic_graphs_match(self):
        enc = make_encoder()
        rng = np.random.default_rng(5)
        g = assign_degree_attributes(random_graph(rng, 12))
        base = encode_graph(g, enc)
        for _ in range(5):
            other = permute_graph(g, rng.permutation(12))
            out = encode_graph(other, enc)
            assert torch.allclose(out, base, rtol=1e-9, atol=1e-12)

    def test_zero_weights_zero_attrs_constant(self):
        enc = make_encoder(hidden_dim=6)
        zero_parameters(enc)
        graphs = [path_graph(5), cycle_graph(5)]
        embeddings = []
        for g in graphs:
            g = Graph(g.node_ids, g.adjacency, np.zeros((5, 1)), np.ones((g.num_edges, 1)))
            embeddings.append(encode_graph(g, enc))
        assert torch.equal(embeddings[0], embeddings[1])
        assert torch.equal(embeddings[0], torch.zeros(12, dtype=torch.float64))

    def test_p3_c3_distinct_regression(self):
        enc = make_encoder(hidden_dim=8, depth=2, seed=0)
        with torch.no_grad():
            e1 = encode_graph(assign_degree_attributes(path_graph(3)), enc)
            e2 = encode_graph(assign_degree_attributes(cycle_graph(3)), enc)
        dist = float(torch.linalg.norm(e1 - e2))
        assert dist > 1e-3
        assert dist == pytest.approx(0.2746524235037304, rel=1e-9)

    def test_attr_dim_exceeds_hidden(self):
        enc = make_encoder(hidden_dim=2)
        g = path_graph(3)
        g = Graph(g.node_ids, g.adjacency, np.zeros((3, 5)), np.ones((2, 1)))
        with pytest.raises(DataError):
            encode_graph(g, enc)

    def test_empty_graph_rejected(self):
        enc = make_encoder()
        with pytest.raises(DataError):
            encode_graph(Graph([], np.zeros((0, 0), dtype=bool)), enc)

    def test_edge_attr_width_mismatch(self):
        enc = make_encoder(edge_attr_dim=2)
        g = assign_degree_attributes(path_graph(4))
        with pytest.raises(DataError):
            encode_graph(g, enc)

    def test_isolated_nodes_get_zero_messages(self):
        enc = make_encoder()
        g = graph_from_edges(4, [(0, 1)])
        g = Graph(g.node_ids, g.adjacency, np.ones((4, 1)), np.ones((1, 1)))
        out = encode_graph(g, enc)
        assert torch.isfinite(out).all()

    def test_permutation_invariance_tolerance(self):
        enc = make_encoder(hidden_dim=8, depth=2, seed=11)
        rng = np.random.default_rng(6)
        with torch.no_grad():
            for _ in range(8):
                n = int(rng.integers(2, 31))
                g = assign_degree_attributes(random_graph(rng, n))
                base = encode_graph(g, enc)
                scale = float(base.abs().max())
                for _ in range(5):
                    out = encode_graph(permute_graph(g, rng.permutation(n)), enc)
                    assert float((out - base).abs().max()) <= 1e-6 * max(scale, 1.0)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            GraphEncoder(hidden_dim=0)
        with pytest.raises(ConfigError):
            GraphEncoder(depth=0)
        with pytest.raises(ConfigError):
            GraphEncoder(processing_steps=0)


class TestEdgeAttributeUse:
    def test_batched_messages_match_per_node_aggregate(self):
        # First-round messages computed by the batched path must match the
        # neighborhood-at-a-time operation, for constant edge attributes.
        enc = make_encoder()
        rng = np.random.default_rng(7)
        g = assign_degree_attributes(random_graph(rng, 9, p=0.5))
        h0 = enc.initial_states(g)
        src, dst, edge_attrs = enc._directed_edges(g)
        inputs = torch.cat([h0[src], edge_attrs], dim=1)
        batched = torch.zeros(9, 8, dtype=torch.float64).index_add(
            0, dst, enc.mlps[0](inputs)
        )
        for v in range(9):
            neigh = np.flatnonzero(g.adjacency[v])
            states = [np.concatenate([h0[u].numpy(), [1.0]]) for u in neigh]
            msg = aggregate(np.array(states).reshape(len(states), -1), enc)
            assert torch.allclose(batched[v], msg, rtol=1e-11, atol=1e-12)

    def test_edge_attr_values_matter(self):
        enc = make_encoder()
        g = assign_degree_attributes(path_graph(4))
        changed = Graph(
            g.node_ids, g.adjacency, g.node_attrs, np.array([[1.0], [5.0], [1.0]])
        )
        a = encode_graph(g, enc)
        b = encode_graph(changed, enc)
        assert not torch.allclose(a, b)


class TestGradients:
    def test_matches_finite_differences(self):
        enc = make_encoder(hidden_dim=4, depth=2, seed=9)
        g = assign_degree_attributes(path_graph(4))

        def loss_value():
            return (encode_graph(g, enc) ** 2).sum()

        loss = loss_value()
        loss.backward()
        autograd = torch.cat([p.grad.reshape(-1) for p in enc.parameters()]).numpy()

        params = [p for p in enc.parameters()]
        fd = np.zeros_like(autograd)
        step = 1e-5
        k = 0
        with torch.no_grad():
            for p in params:
                flat = p.reshape(-1)
                for idx in range(flat.numel()):
                    orig = float(flat[idx])
                    flat[idx] = orig + step
                    up = float(loss_value())
                    flat[idx] = orig - step
                    down = float(loss_value())
                    flat[idx] = orig
                    fd[k] = (up - down) / (2 * step)
                    k += 1
        denom = np.maximum(1.0, np.maximum(np.abs(fd), np.abs(autograd)))
        assert (np.abs(fd - autograd) / denom).max() <= 1e-4


class TestCheckpoint:
    def test_round_trip_bytes(self, tmp_path):
        enc = make_encoder(seed=13)
        path = tmp_path / "enc.json"
        save_checkpoint(enc, path)
        text = path.read_text()
        other = GraphEncoder(hidden_dim=8, depth=2)
        load_checkpoint(other, path)
        assert module_state_json(other) == text

    def test_seeded_init_reproducible(self):
        a = make_encoder(seed=21)
        b = make_encoder(seed=21)
        assert module_state_json(a) == module_state_json(b)
        c = make_encoder(seed=22)
        assert module_state_json(c) != module_state_json(a)

    def test_shape_mismatch_rejected(self, tmp_path):
        enc = make_encoder()
        path = tmp_path / "enc.json"
        save_checkpoint(enc, path)
        other = GraphEncoder(hidden_dim=16, depth=2)
        with pytest.raises(DataError):
            load_checkpoint(other, path)


def test_canonical_order_sorts_rows():
    x = torch.tensor([[2.0, 1.0], [1.0, 5.0], [1.0, 2.0]])
    order = canonical_order(x)
    assert order.tolist() == [2, 1, 0]
