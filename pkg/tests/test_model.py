import numpy as np
import pytest

from tginfluence.errors import ConfigError, ContractError, TrainingError
from tginfluence.metrics import kendall_tau
from tginfluence.model import (
    ARCH_TAG,
    CnnParams,
    TrainConfig,
    backward,
    cnn_forward,
    flat_dim,
    init_params,
    load_params,
    loss,
    lstm_forward,
    predict,
    predict_batch,
    save_params,
    select_s,
    train,
    zero_grads,
)
from tginfluence.sir import InfluenceLabel
from tginfluence.synthetic import generate_synthetic
from tginfluence.temporal_graph import build_snapshots, feature_sequences

from oracles import gradient_check


def zero_params(k, s):
    params = init_params(k, s, seed=0)
    for _, arr in params.tensors():
        arr[...] = 0.0
    return params


class TestCnnForward:
    def test_zero_matrix_zero_params_gives_zero(self):
        params = zero_params(8, 1)
        assert cnn_forward(np.zeros((8, 8)), params.cnn) == 0.0

    def test_zero_matrix_nonzero_biases_not_zero(self):
        params = init_params(8, 1, seed=2)
        assert cnn_forward(np.zeros((8, 8)), params.cnn) != 0.0

    def test_hand_computed_single_path(self):
        """Center-tap filters turn the network into max pooling: conv1
        channel 0 passes the input through, conv2 channel 0 passes pooled
        channel 0 through, and the fc taps that single channel."""
        k = 4
        params = zero_params(k, 1)
        cnn = params.cnn
        cnn.conv1_w[0, 0, 1, 1] = 1.0
        cnn.conv2_w[0, 0, 1, 1] = 1.0
        cnn.fc_w[0] = 1.0       # flat layout is (h2, w2, channel); h2 = w2 = 1
        x = np.arange(16, dtype=float).reshape(4, 4)
        # relu is a no-op on non-negative inputs, two 2x2 pools -> global max
        assert cnn_forward(x, cnn) == x.max()
        assert flat_dim(k) == 32

    def test_shape_contract(self):
        params = init_params(8, 1, seed=0)
        with pytest.raises(ContractError):
            cnn_forward(np.zeros((6, 6)), params.cnn)
        with pytest.raises(ContractError):
            cnn_forward(np.zeros((8, 4)), params.cnn)

    def test_k28_scalar_output(self):
        params = init_params(28, 1, seed=0)
        out = cnn_forward(np.random.default_rng(0).normal(size=(28, 28)),
                          params.cnn)
        assert isinstance(out, float)

    def test_monotone_rescaling_preserves_ranking(self):
        params = init_params(8, 1, seed=5)
        rng = np.random.default_rng(1)
        mats = rng.normal(size=(12, 8, 8))
        embs = np.array([cnn_forward(m, params.cnn) for m in mats])
        warped = 4.0 * embs + 3.0
        assert np.array_equal(np.argsort(embs), np.argsort(warped))


class TestLstmForward:
    def test_zero_params_zero_output(self):
        params = zero_params(8, 3)
        assert lstm_forward([1.0, -2.0, 0.5], params.lstm) == 0.0

    def test_hand_computed_single_step(self):
        """Saturated input/output gates and single-tap cell gates reduce one
        step to score = tanh(tanh(tanh(tanh(x)))), derived by hand from the
        gate equations."""
        params = zero_params(8, 1)
        lstm = params.lstm
        h = 64
        for layer in range(2):
            lstm.b_ih[layer][0:h] = 100.0          # input gate -> 1.0 exactly
            lstm.b_ih[layer][3 * h:4 * h] = 100.0  # output gate -> 1.0
        lstm.w_ih[0][2 * h, 0] = 1.0   # unit-0 cell gate: tanh(x)
        lstm.w_ih[1][2 * h, 0] = 1.0   # unit-0 cell gate: tanh(h1[0])
        lstm.head_w[0] = 1.0
        x = 2.0
        # layer 1: c = tanh(x), h = tanh(c); layer 2 repeats on h1[0]
        expected = np.tanh(np.tanh(np.tanh(np.tanh(x))))
        assert lstm_forward([x], lstm) == pytest.approx(expected, abs=1e-15)

    def test_empty_sequence(self):
        params = init_params(8, 1, seed=0)
        with pytest.raises(ContractError):
            lstm_forward([], params.lstm)

    def test_deterministic(self):
        params = init_params(8, 4, seed=3)
        seq = [0.3, -1.2, 0.0, 2.0]
        assert lstm_forward(seq, params.lstm) == lstm_forward(seq, params.lstm)

    def test_matches_torch_reference(self):
        torch = pytest.importorskip("torch")
        params = init_params(8, 3, seed=7)
        lstm = params.lstm
        ref = torch.nn.LSTM(input_size=1, hidden_size=64, num_layers=2,
                            batch_first=True).double()
        with torch.no_grad():
            for layer in range(2):
                getattr(ref, f"weight_ih_l{layer}").copy_(
                    torch.from_numpy(lstm.w_ih[layer]))
                getattr(ref, f"weight_hh_l{layer}").copy_(
                    torch.from_numpy(lstm.w_hh[layer]))
                getattr(ref, f"bias_ih_l{layer}").copy_(
                    torch.from_numpy(lstm.b_ih[layer]))
                getattr(ref, f"bias_hh_l{layer}").copy_(
                    torch.from_numpy(lstm.b_hh[layer]))
        seq = np.array([0.5, -0.25, 1.5])
        _, (h, _) = ref(torch.from_numpy(seq.reshape(1, 3, 1)))
        expected = float(h[-1, 0].detach().numpy() @ lstm.head_w + lstm.head_b[0])
        assert lstm_forward(seq, lstm) == pytest.approx(expected, abs=1e-9)


class TestPredict:
    def test_zero_params_zero_scores(self):
        params = zero_params(8, 2)
        seq = np.random.default_rng(0).normal(size=(2, 8, 8))
        assert predict(seq, params) == 0.0

    def test_identical_matrices_identical_scores(self):
        params = init_params(8, 2, seed=1)
        seq = np.random.default_rng(0).normal(size=(2, 8, 8))
        assert predict(seq, params) == predict(seq.copy(), params)

    def test_batch_matches_single(self):
        params = init_params(8, 3, seed=2)
        x = np.random.default_rng(1).normal(size=(9, 3, 8, 8))
        batch = predict_batch(x, params)
        singles = np.array([predict(x[i], params) for i in range(9)])
        assert np.allclose(batch, singles, atol=1e-12, rtol=0)

    def test_score_independent_of_other_nodes(self):
        params = init_params(8, 2, seed=3)
        rng = np.random.default_rng(2)
        x = rng.normal(size=(6, 2, 8, 8))
        full = predict_batch(x, params)
        alone = predict_batch(x[3:4], params)
        assert full[3] == alone[0]

    def test_wrong_length(self):
        params = init_params(8, 3, seed=0)
        with pytest.raises(ContractError):
            predict(np.zeros((2, 8, 8)), params)


class TestLoss:
    def test_zero_when_equal(self):
        assert loss([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_definition(self):
        assert loss([0.0], [2.0]) == 4.0

    def test_matches_direct_summation(self):
        rng = np.random.default_rng(4)
        p, y = rng.normal(size=7), rng.normal(size=7)
        direct = sum((a - b) ** 2 for a, b in zip(p, y)) / 7
        assert loss(p, y) == pytest.approx(direct, rel=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            loss([1.0], [1.0, 2.0])

    def test_batch_permutation_invariance(self):
        rng = np.random.default_rng(5)
        p, y = rng.normal(size=32), rng.normal(size=32)
        perm = rng.permutation(32)
        assert loss(p[perm], y[perm]) == pytest.approx(loss(p, y), rel=1e-12)


class TestBackward:
    def test_zero_loss_zero_head_bias_grad(self):
        params = init_params(8, 2, seed=6)
        x = np.random.default_rng(3).normal(size=(5, 2, 8, 8))
        y = predict_batch(x, params)
        grads = backward((x, y), params)
        assert grads["head_b"][0] == 0.0

    def test_gradient_check_random_draws(self):
        rng = np.random.default_rng(11)
        for draw in range(3):
            params = init_params(8, 3, seed=100 + draw)
            x = rng.normal(size=(4, 3, 8, 8))
            y = rng.normal(size=4)
            grads = backward((x, y), params)
            worst_large, worst_small = gradient_check(
                params, x, y, grads, coords_per_tensor=8, rng=rng)
            assert worst_large < 1e-4
            assert worst_small < 1e-3

    def test_loss_scale_linearity(self):
        params = init_params(8, 2, seed=8)
        rng = np.random.default_rng(6)
        x = rng.normal(size=(4, 2, 8, 8))
        y = rng.normal(size=4)
        g1 = backward((x, y), params)
        # moving labels twice as far from predictions doubles every gradient
        preds = predict_batch(x, params)
        y2 = preds + 2.0 * (y - preds)
        g2 = backward((x, y2), params)
        for name in g1:
            assert np.allclose(g2[name], 2.0 * g1[name], atol=1e-9)


class TestTrain:
    def _toy_dataset(self, n=24, s=2, k=8, seed=0):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, s, k, k))
        y = rng.normal(size=n)
        return x, y

    def test_constant_labels_fit(self):
        x, _ = self._toy_dataset()
        y = np.full(24, 5.0)
        cfg = TrainConfig(iterations=300, batch_size=None, seed=0,
                          label_scale="none", learning_rate=3e-2)
        result = train((x, y), cfg)
        assert result.final_loss < 1e-3

    def test_loss_decreases_on_learnable_data(self):
        edges = generate_synthetic(30, 8, 4.0, seed=1)
        snaps = build_snapshots(edges, 1.0)
        x = feature_sequences(snaps, [1, 2], 8)
        y = snaps[2].out_degree.astype(float)
        cfg = TrainConfig(iterations=200, batch_size=16, seed=1,
                          label_scale="node-count")
        result = train((x, y), cfg, init_seed=4)
        assert result.final_loss < result.losses[0]

    def test_deterministic(self):
        x, y = self._toy_dataset()
        cfg = TrainConfig(iterations=50, batch_size=8, seed=3)
        r1 = train((x, y), cfg, init_seed=9)
        r2 = train((x, y), cfg, init_seed=9)
        assert np.array_equal(r1.losses, r2.losses)
        for (_, a), (_, b) in zip(r1.params.tensors(), r2.params.tensors()):
            assert np.array_equal(a, b)

    def test_divergence_reported_with_iteration(self):
        x, y = self._toy_dataset()
        cfg = TrainConfig(iterations=200, batch_size=None, seed=0,
                          learning_rate=1e18, label_scale="none")
        with pytest.raises(TrainingError, match="iteration"):
            train((x, y * 1e12), cfg)

    def test_empty_dataset(self):
        with pytest.raises(ContractError):
            train((np.zeros((0, 2, 8, 8)), np.zeros(0)), TrainConfig(iterations=1))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(iterations=0)
        with pytest.raises(ConfigError):
            TrainConfig(label_scale="what")


class TestSelectS:
    def test_single_candidate(self):
        edges = generate_synthetic(20, 10, 3.0, seed=2)
        snaps = build_snapshots(edges, 1.0)
        labels_train = {u: InfluenceLabel(u, 6, float(snaps[5].out_degree[u] + 1))
                        for u in range(20)}
        labels_val = {u: InfluenceLabel(u, 8, float(snaps[7].out_degree[u] + 1))
                      for u in range(20)}
        cfg = TrainConfig(iterations=30, batch_size=None, seed=0)
        sel = select_s(snaps, [2], k=8, train_label_t=6,
                       train_labels=labels_train, val_label_t=8,
                       val_labels=labels_val, train_cfg=cfg, init_seed=1)
        assert sel.best_s == 2
        assert set(sel.taus) == {2}

    def test_no_candidates(self):
        with pytest.raises(ConfigError):
            select_s([], [], k=8, train_label_t=5, train_labels={},
                     val_label_t=6, val_labels={},
                     train_cfg=TrainConfig(iterations=1))

    def test_insufficient_history(self):
        edges = generate_synthetic(10, 6, 3.0, seed=3)
        snaps = build_snapshots(edges, 1.0)
        with pytest.raises(ConfigError):
            select_s(snaps, [9], k=8, train_label_t=4, train_labels={},
                     val_label_t=5, val_labels={},
                     train_cfg=TrainConfig(iterations=1))


class TestCheckpoint:
    def test_round_trip_bit_identical(self, tmp_path):
        params = init_params(8, 3, seed=12)
        x = np.random.default_rng(8).normal(size=(5, 3, 8, 8))
        before = predict_batch(x, params)
        path = tmp_path / "model.npz"
        save_params(path, params)
        loaded = load_params(path)
        assert loaded.k == params.k and loaded.s == params.s
        after = predict_batch(x, loaded)
        assert np.array_equal(before, after)
        for (na, a), (nb, b) in zip(params.tensors(), loaded.tensors()):
            assert na == nb
            assert np.array_equal(a, b)

    def test_arch_tag_guard(self, tmp_path):
        params = init_params(8, 1, seed=0)
        path = tmp_path / "model.npz"
        save_params(path, params)
        import json

        import numpy as np_mod
        with np_mod.load(path) as data:
            arrays = {k: data[k] for k in data.files}
        meta = json.loads(bytes(arrays["__meta__"]).decode())
        meta["arch"] = "something-else"
        arrays["__meta__"] = np_mod.frombuffer(
            json.dumps(meta).encode(), dtype=np_mod.uint8)
        with open(path, "wb") as fh:
            np_mod.savez(fh, **arrays)
        with pytest.raises(ContractError):
            load_params(path)


class TestInitParams:
    def test_k_too_small(self):
        with pytest.raises(ConfigError):
            init_params(3, 1)

    def test_deterministic(self):
        a = init_params(8, 2, seed=5)
        b = init_params(8, 2, seed=5)
        for (_, x), (_, y) in zip(a.tensors(), b.tensors()):
            assert np.array_equal(x, y)

    def test_bounds(self):
        params = init_params(16, 2, seed=6)
        assert np.abs(params.cnn.conv1_w).max() <= 1.0 / 3.0
        assert np.abs(params.lstm.w_hh[0]).max() <= 1.0 / 8.0
