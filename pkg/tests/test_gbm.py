import numpy as np
import pytest
from scipy.special import expit, softmax

from dualboost.core import DegenerateLabelsError, DimensionError, StateError
from dualboost.gbm import (
    BoostedFeatureVector,
    GbmModel,
    bfv_matrix,
    extract_bfv,
    fit_gbm,
    predict,
    predict_proba,
    predict_raw,
    write_bfv_csv,
)


def toy(rng, n=300, M=2, d=4):
    X = rng.normal(size=(n, d))
    logits = X[:, :M] * 2.0 if M > 2 else np.column_stack([np.zeros(n), 2 * X[:, 0] - X[:, 1]])
    y = np.array([rng.choice(M, p=softmax(row)) for row in logits])
    return X, y


class TestFit:
    @pytest.mark.parametrize("M", [2, 3])
    def test_training_loss_non_increasing(self, rng, M):
        X, y = toy(rng, M=M)
        model = fit_gbm(X, y, M, n_stages=30, learning_rate=0.1, max_depth=3)
        loss = np.array(model.train_loss)
        assert len(loss) == 31
        assert np.all(np.diff(loss) <= 1e-12)

    def test_binary_init_is_log_odds(self, rng):
        X, y = toy(rng)
        model = fit_gbm(X, y, 2, n_stages=0)
        p = y.mean()
        assert model.init_scores[0] == pytest.approx(np.log(p / (1 - p)))

    def test_multiclass_init_is_log_prior(self, rng):
        X, y = toy(rng, M=3)
        model = fit_gbm(X, y, 3, n_stages=0)
        np.testing.assert_allclose(model.init_scores, np.log(np.bincount(y) / len(y)))

    @pytest.mark.parametrize("M", [2, 3])
    def test_matches_sklearn(self, rng, M):
        ens = pytest.importorskip("sklearn.ensemble")
        X, y = toy(rng, n=250, M=M)
        ours = fit_gbm(X, y, M, n_stages=15, learning_rate=0.2, max_depth=2)
        ref = ens.GradientBoostingClassifier(
            n_estimators=15, learning_rate=0.2, max_depth=2, random_state=0
        ).fit(X, y)
        Xt = rng.normal(size=(200, 4))
        raw_ref = ref.decision_function(Xt)
        raw = predict_raw(ours, Xt)
        if M == 2:
            raw = raw[:, 0]
        else:
            # softmax scores are defined up to a per-row shift
            raw = raw - raw.mean(axis=1, keepdims=True)
            raw_ref = raw_ref - raw_ref.mean(axis=1, keepdims=True)
        np.testing.assert_allclose(raw, raw_ref, rtol=1e-8, atol=1e-8)

    def test_single_class_rejected(self, rng):
        with pytest.raises(DegenerateLabelsError):
            fit_gbm(rng.normal(size=(5, 2)), np.zeros(5, dtype=int), 2, 3)

    def test_unfitted(self):
        model = GbmModel(2, 0.1, np.zeros(1), None)
        with pytest.raises(StateError):
            predict_raw(model, np.zeros((1, 2)))
        with pytest.raises(StateError):
            model.to_dict()


class TestPredict:
    def test_proba_and_labels(self, rng):
        X, y = toy(rng)
        model = fit_gbm(X, y, 2, n_stages=20)
        raw = predict_raw(model, X)
        proba = predict_proba(model, X)
        np.testing.assert_allclose(proba[:, 1], expit(raw[:, 0]))
        np.testing.assert_allclose(proba.sum(1), 1.0)
        assert np.array_equal(predict(model, X), (raw[:, 0] > 0).astype(int))
        assert np.mean(predict(model, X) == y) > 0.7

    def test_roundtrip(self, rng):
        X, y = toy(rng, M=3)
        model = fit_gbm(X, y, 3, n_stages=5)
        back = GbmModel.from_dict(model.to_dict())
        assert np.array_equal(predict_raw(back, X), predict_raw(model, X))


class TestBfv:
    @pytest.mark.parametrize("M", [2, 3])
    def test_reconstruction(self, rng, M):
        X, y = toy(rng, M=M)
        model = fit_gbm(X, y, M, n_stages=25, learning_rate=0.1, max_depth=3)
        Xt = rng.normal(size=(1000, 4)) * 1.5
        K, N = model.n_outputs, model.n_stages
        B = bfv_matrix(model, Xt)
        assert B.shape == (1000, K * N)
        # stage-major: column s*K + k is class k at stage s
        per_class = B.reshape(1000, N, K).sum(axis=1)
        rebuilt = model.init_scores + model.learning_rate * per_class
        np.testing.assert_allclose(rebuilt, predict_raw(model, Xt), rtol=0, atol=1e-9)

    def test_single_sample_layout(self, rng):
        X, y = toy(rng, M=3)
        model = fit_gbm(X, y, 3, n_stages=4)
        bfv = extract_bfv(model, X[0])
        assert bfv.values.shape == (3, 4)
        np.testing.assert_array_equal(bfv.flatten(), bfv_matrix(model, X[:1])[0])
        for s in range(4):
            for k in range(3):
                assert bfv.values[k, s] == model.trees[s][k].predict(X[:1])[0, 0]

    def test_binary_layout(self, rng):
        X, y = toy(rng)
        model = fit_gbm(X, y, 2, n_stages=6)
        bfv = extract_bfv(model, X[3])
        assert bfv.values.shape == (6,)
        np.testing.assert_array_equal(BoostedFeatureVector(bfv.values).flatten(), bfv.values)
        with pytest.raises(DimensionError):
            extract_bfv(model, X[:2])

    def test_csv(self, rng, tmp_path):
        X, y = toy(rng)
        model = fit_gbm(X, y, 2, n_stages=3)
        B = bfv_matrix(model, X[:5])
        path = tmp_path / "bfv.csv"
        write_bfv_csv(path, B)
        lines = path.read_text().splitlines()
        assert lines[0] == "bfv_0,bfv_1,bfv_2"
        np.testing.assert_array_equal(np.loadtxt(path, delimiter=",", skiprows=1), B)
