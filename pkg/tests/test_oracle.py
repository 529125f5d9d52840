import math

import numpy as np
import pytest

from dyscut.oracle import (
    CheckpointFormatError,
    CheckpointTruncatedError,
    McPrediction,
    OracleModel,
    TrainConfig,
    WindowOracle,
    confidence_mask,
    dysfluent_flags,
    focal_loss,
    forward,
    init_model,
    load_model,
    loss_and_grads,
    mc_predict,
    prediction_similarity_matrix,
    predictive_entropy,
    probability_mask,
    save_model,
    train_oracle,
)


def tiny_model(rng=None, dropout=0.0, d=2, h=2, c=2):
    rng = np.random.default_rng(rng if rng is not None else 0)
    return init_model(d, c, hidden_dim=h, dropout_rate=dropout, rng=rng)


class TestForward:
    def test_zero_parameters_give_half(self):
        model = OracleModel(
            w1=np.zeros((3, 4)), b1=np.zeros(4), w2=np.zeros((4, 2)), b2=np.zeros(2),
            dropout_rate=0.0,
        )
        probs = forward(model, np.array([1.0, -2.0, 0.5]))
        assert np.array_equal(probs, np.full(2, 0.5))

    def test_seeded_dropout_is_reproducible(self):
        model = tiny_model(dropout=0.5, d=3, h=8, c=2)
        x = np.array([0.3, -0.1, 1.2])
        a = forward(model, x, dropout_active=True, rng=np.random.default_rng(42))
        b = forward(model, x, dropout_active=True, rng=np.random.default_rng(42))
        assert np.array_equal(a, b)

    def test_hand_computed_two_by_two(self):
        # Independent scalar-math chain for a hand-set 2->2->2 model.
        w1 = np.array([[0.1, -0.2], [0.3, 0.4]])
        b1 = np.array([0.05, -0.05])
        w2 = np.array([[0.2, 0.1], [-0.3, 0.5]])
        b2 = np.array([0.0, 0.1])
        model = OracleModel(w1, b1, w2, b2, dropout_rate=0.0)
        x = np.array([1.0, 0.5])
        h0 = math.tanh(1.0 * 0.1 + 0.5 * 0.3 + 0.05)
        h1 = math.tanh(1.0 * -0.2 + 0.5 * 0.4 - 0.05)
        z0 = h0 * 0.2 + h1 * -0.3 + 0.0
        z1 = h0 * 0.1 + h1 * 0.5 + 0.1
        expected = [1.0 / (1.0 + math.exp(-z0)), 1.0 / (1.0 + math.exp(-z1))]
        assert forward(model, x) == pytest.approx(expected, abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dim"):
            forward(tiny_model(d=3), np.zeros(4))


class TestFocalLoss:
    def test_perfect_prediction_goes_to_zero(self):
        probs = np.array([1.0 - 1e-9, 1e-9])
        targets = np.array([1.0, 0.0])
        assert focal_loss(probs, targets, gamma=2.0) < 1e-16

    def test_gamma_zero_is_mean_bce(self):
        rng = np.random.default_rng(4)
        probs = rng.uniform(0.05, 0.95, size=(6, 3))
        targets = (rng.random((6, 3)) < 0.5).astype(float)
        pt = np.where(targets == 1, probs, 1 - probs)
        bce = float((-np.log(pt)).mean(axis=1).mean())
        assert focal_loss(probs, targets, gamma=0.0) == pytest.approx(bce, rel=1e-12)

    def test_hand_value_half_probability(self):
        # (1 - 0.5)^2 * ln 2 = 0.25 * ln 2
        loss = focal_loss(np.array([0.5]), np.array([1.0]), gamma=2.0)
        assert loss == pytest.approx(0.25 * math.log(2.0), abs=1e-12)

    def test_rejects_probabilities_on_the_boundary(self):
        with pytest.raises(ValueError):
            focal_loss(np.array([1.0]), np.array([1.0]))


class TestGradients:
    @pytest.mark.parametrize("gamma", [0.0, 0.5, 2.0])
    def test_matches_central_differences(self, gamma):
        rng = np.random.default_rng(11)
        model = tiny_model(rng=1, d=3, h=4, c=3)
        x = rng.normal(size=(5, 3))
        targets = (rng.random((5, 3)) < 0.5).astype(float)
        _, grads = loss_and_grads(model, x, targets, gamma=gamma)
        step = 1e-5
        for name in ("w1", "b1", "w2", "b2"):
            arr = getattr(model, name)
            numeric = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                for sign in (1.0, -1.0):
                    shifted = {k: getattr(model, k).copy() for k in ("w1", "b1", "w2", "b2")}
                    shifted[name][idx] += sign * step
                    probed = OracleModel(**shifted, dropout_rate=0.0)
                    loss = focal_loss(forward(probed, x), targets, gamma=gamma)
                    numeric[idx] += sign * loss / (2 * step)
            scale = max(np.abs(grads[name]).max(), np.abs(numeric).max(), 1e-12)
            assert np.abs(grads[name] - numeric).max() / scale < 1e-4

    def test_gradient_with_fixed_dropout_mask(self):
        rng = np.random.default_rng(2)
        model = tiny_model(rng=3, d=2, h=5, c=2)
        x = rng.normal(size=(4, 2))
        targets = (rng.random((4, 2)) < 0.5).astype(float)
        scale = (rng.random((4, 5)) >= 0.4) / 0.6
        loss, grads = loss_and_grads(model, x, targets, dropout_scale=scale)
        step = 1e-5
        arr = model.w1
        numeric = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            vals = []
            for sign in (1.0, -1.0):
                w1 = model.w1.copy()
                w1[idx] += sign * step
                probed = OracleModel(w1, model.b1, model.w2, model.b2, dropout_rate=0.0)
                h = np.tanh(x @ probed.w1 + probed.b1) * scale
                probs = 1.0 / (1.0 + np.exp(-(h @ probed.w2 + probed.b2)))
                vals.append(focal_loss(probs, targets))
            numeric[idx] = (vals[0] - vals[1]) / (2 * step)
        rel = np.abs(grads["w1"] - numeric).max() / max(np.abs(numeric).max(), 1e-12)
        assert rel < 1e-4


class TestTraining:
    def make_separable(self, n=400, seed=0):
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, 2, size=n)
        x = rng.normal(size=(n, 4)) + labels[:, None] * np.array([6.0, 0, 0, 0])
        y = np.zeros((n, 2))
        y[np.arange(n), labels] = 1.0
        return x, y

    def test_loss_decreases_on_separable_data(self):
        x, y = self.make_separable()
        model = tiny_model(rng=0, d=4, h=16, c=2)
        cfg = TrainConfig(learning_rate=1e-2, batch_size=64, epochs=10, seed=0)
        before = focal_loss(forward(model, x), y)
        trained, history = train_oracle(model, x, y, x[:50], y[:50], cfg)
        after = focal_loss(forward(trained, x), y)
        assert after < before
        assert len(history) == 10

    def test_validation_accuracy_on_separable_data(self):
        x, y = self.make_separable(n=600, seed=1)
        model = init_model(4, 2, hidden_dim=32, dropout_rate=0.2, rng=np.random.default_rng(0))
        cfg = TrainConfig(learning_rate=5e-3, batch_size=64, epochs=50, seed=0)
        trained, _ = train_oracle(model, x[:400], y[:400], x[400:], y[400:], cfg)
        pred = forward(trained, x[400:]) >= 0.5
        per_class_acc = (pred == y[400:].astype(bool)).mean(axis=0)
        assert per_class_acc.mean() >= 0.95

    def test_zero_epochs_returns_model_unchanged(self):
        x, y = self.make_separable(n=50)
        model = tiny_model(rng=5, d=4, h=8, c=2)
        cfg = TrainConfig(epochs=0, seed=0)
        trained, history = train_oracle(model, x, y, x, y, cfg)
        assert np.array_equal(trained.w1, model.w1)
        assert history == []

    def test_same_seed_identical_parameters(self):
        x, y = self.make_separable(n=100, seed=2)
        cfg = TrainConfig(learning_rate=1e-3, batch_size=32, epochs=5, seed=9)
        runs = []
        for _ in range(2):
            model = init_model(4, 2, hidden_dim=8, dropout_rate=0.3, rng=np.random.default_rng(1))
            trained, _ = train_oracle(model, x, y, x[:20], y[:20], cfg)
            runs.append(trained)
        assert np.array_equal(runs[0].w1, runs[1].w1)
        assert np.array_equal(runs[0].b2, runs[1].b2)

    def test_speaker_overlap_rejected(self):
        x, y = self.make_separable(n=40)
        model = tiny_model(rng=0, d=4, h=4, c=2)
        with pytest.raises(ValueError, match="overlap"):
            train_oracle(
                model, x, y, x, y, TrainConfig(epochs=1),
                train_speakers=["a", "b"], val_speakers=["b", "c"],
            )


class TestMcPredict:
    def test_zero_dropout_has_no_variance(self):
        model = tiny_model(rng=0, d=3, h=6, c=3, dropout=0.0)
        x = np.random.default_rng(0).normal(size=3)
        preds = [mc_predict(model, x, 20, np.random.default_rng(i)) for i in range(5)]
        assert all(np.array_equal(p.mean_probs, preds[0].mean_probs) for p in preds)
        det = forward(model, x)
        assert np.abs(preds[0].mean_probs - det).max() < 1e-12

    def test_seeded_determinism_with_dropout(self):
        model = tiny_model(rng=0, d=3, h=6, c=3, dropout=0.3)
        x = np.random.default_rng(0).normal(size=3)
        a = mc_predict(model, x, 50, np.random.default_rng(7))
        b = mc_predict(model, x, 50, np.random.default_rng(7))
        assert np.array_equal(a.mean_probs, b.mean_probs)

    def test_requires_at_least_one_pass(self):
        model = tiny_model()
        with pytest.raises(ValueError):
            mc_predict(model, np.zeros(2), 0, np.random.default_rng(0))

    def test_batch_matches_singles(self):
        model = tiny_model(rng=1, d=2, h=4, c=2, dropout=0.0)
        x = np.random.default_rng(3).normal(size=(5, 2))
        batch = mc_predict(model, x, 3, np.random.default_rng(0))
        singles = [mc_predict(model, row, 3, np.random.default_rng(0)) for row in x]
        for got, exp in zip(batch, singles):
            assert np.abs(got.mean_probs - exp.mean_probs).max() < 1e-12


class TestEntropyAndMask:
    def test_one_hot_mask_is_exactly_one(self):
        assert confidence_mask(np.array([1.0, 0.0, 0.0])) == 1.0

    def test_uniform_mask_is_exactly_zero(self):
        for c in (2, 3, 4, 5, 7):
            for level in (1.0, 0.5, 0.3, 0.123):
                assert confidence_mask(np.full(c, level)) == 0.0

    def test_hand_case_half_half(self):
        # q = (0.5, 0.5, 0, 0): entropy ln 2, max ln 4 -> mask 0.5
        ent, h_max = predictive_entropy(np.array([0.5, 0.5, 0.0, 0.0]))
        assert ent == pytest.approx(math.log(2.0), abs=1e-12)
        assert h_max == pytest.approx(math.log(4.0), abs=1e-12)
        assert confidence_mask(np.array([0.5, 0.5, 0.0, 0.0])) == pytest.approx(0.5, abs=1e-12)

    def test_mask_always_in_unit_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            c = int(rng.integers(2, 8))
            v = rng.uniform(0.0, 1.0, size=c)
            if v.sum() == 0.0:
                continue
            assert 0.0 <= confidence_mask(v) <= 1.0

    def test_dysfluent_support_restricts_to_classes(self):
        # uniform over the dysfluent classes only -> mask 0 under that support
        probs = np.array([0.9, 0.2, 0.2, 0.2])
        assert confidence_mask(probs, support="dysfluent") == 0.0
        assert confidence_mask(probs, support="all") > 0.0


class TestDerivedQuantities:
    def test_w2_hand_values(self):
        p0 = np.array([0.9, 0.1])
        pmax = np.array([0.05, 0.8])
        w2 = prediction_similarity_matrix((p0, pmax))
        assert w2[0, 1] == pytest.approx(0.13, abs=1e-12)
        assert w2[0, 0] == pytest.approx(0.8125, abs=1e-12)
        assert w2[1, 1] == pytest.approx(0.65, abs=1e-12)

    def test_w2_zero_and_single_node(self):
        assert np.array_equal(
            prediction_similarity_matrix((np.zeros(3), np.zeros(3))), np.zeros((3, 3))
        )
        single = prediction_similarity_matrix((np.array([0.7]), np.array([0.2])))
        assert single.shape == (1, 1)
        assert single[0, 0] == pytest.approx(0.49 + 0.04, abs=1e-12)

    def test_w2_symmetric_and_psd(self):
        rng = np.random.default_rng(8)
        p0, pmax = rng.uniform(0, 1, 30), rng.uniform(0, 1, 30)
        w2 = prediction_similarity_matrix((p0, pmax))
        assert np.array_equal(w2, w2.T)
        assert np.linalg.eigvalsh(w2).min() > -1e-12
        assert w2.min() >= 0.0 and w2.max() <= 2.0

    def test_probability_mask_threshold(self):
        preds = [
            McPrediction(np.array([1.0, 0.0]), 0.0, 1.0),
            McPrediction(np.array([0.49, 0.2]), 0.0, 1.0),
            McPrediction(np.array([0.3, 0.8]), 0.0, 1.0),
        ]
        assert probability_mask(preds) == pytest.approx([1.0, 0.0, 0.8])

    def test_dysfluent_flags_tie_favours_fluent(self):
        preds = [
            McPrediction(np.array([0.9, 0.05]), 0.0, 1.0),
            McPrediction(np.array([0.1, 0.8]), 0.0, 1.0),
            McPrediction(np.array([0.4, 0.4]), 0.0, 1.0),
        ]
        assert dysfluent_flags(preds).tolist() == [False, True, False]


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path):
        model = tiny_model(rng=4, d=5, h=7, c=3, dropout=0.25)
        path = tmp_path / "oracle.ckpt"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.input_dim == 5 and loaded.hidden_dim == 7 and loaded.class_count == 3
        assert loaded.dropout_rate == pytest.approx(0.25)
        # values are exactly the float32 casts of the originals
        assert np.array_equal(loaded.w1, model.w1.astype(np.float32).astype(np.float64))
        # a second write reproduces the file byte for byte
        save_model(loaded, tmp_path / "again.ckpt")
        assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()

    def test_bad_magic_and_truncation(self, tmp_path):
        model = tiny_model()
        path = tmp_path / "oracle.ckpt"
        save_model(model, path)
        blob = path.read_bytes()
        (tmp_path / "bad.ckpt").write_bytes(b"XXXXXXXX" + blob[8:])
        with pytest.raises(CheckpointFormatError):
            load_model(tmp_path / "bad.ckpt")
        (tmp_path / "short.ckpt").write_bytes(blob[:-2])
        with pytest.raises(CheckpointTruncatedError):
            load_model(tmp_path / "short.ckpt")


class TestEstimator:
    def test_fit_predict_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        labels = rng.integers(0, 2, size=200)
        x = rng.normal(size=(200, 4)) + labels[:, None] * np.array([5.0, 0, 0, 0])
        y = np.zeros((200, 2))
        y[np.arange(200), labels] = 1.0
        est = WindowOracle(hidden_dim=16, epochs=30, learning_rate=5e-3, random_state=0)
        est.fit(x, y)
        acc = (est.predict(x) == y).mean()
        assert acc > 0.9
        est.save(tmp_path / "ckpt")
        again = WindowOracle.load(tmp_path / "ckpt")
        assert np.array_equal(again.model_.w1, load_model(tmp_path / "ckpt").w1)

    def test_get_params_round_trip(self):
        est = WindowOracle(hidden_dim=32, focal_gamma=1.5)
        params = est.get_params()
        assert params["hidden_dim"] == 32
        clone = WindowOracle(**params)
        assert clone.get_params() == params
