import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import best_stump, central_difference

from dualboost.core import ConfigError, DimensionError, EmptyInputError, NumericError, TrainingDivergedError
from dualboost.weaklearners import (
    DenseStack,
    MlpConfig,
    MlpLearner,
    Optimizer,
    RegressionTree,
    fit_mlp,
    fit_tree,
    predict_mlp,
    predict_tree,
)


def norm_rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


class TestRegressionTree:
    def test_stump_matches_exhaustive_search(self, rng):
        for _ in range(10):
            x = rng.normal(size=40)
            Y = rng.normal(size=(40, 3)) + (x[:, None] > 0.3)
            tree = fit_tree(x[:, None], Y, max_depth=1)
            sse_ref, thr_ref = best_stump(x, Y)
            pred = predict_tree(tree, x[:, None])
            assert float(((Y - pred) ** 2).sum()) == pytest.approx(sse_ref, rel=1e-12)
            assert tree.threshold[0] == pytest.approx(thr_ref)

    def test_min_samples_leaf_respected(self, rng):
        X = rng.normal(size=(50, 2))
        Y = rng.normal(size=(50, 2))
        tree = fit_tree(X, Y, max_depth=4, min_samples_leaf=7)
        counts = np.bincount(tree.apply(X))
        leaves = [i for i in range(len(tree.feature)) if tree.left[i] < 0]
        assert all(counts[i] >= 7 for i in leaves)

    def test_matches_sklearn(self, rng):
        sk = pytest.importorskip("sklearn.tree")
        X = rng.normal(size=(200, 4))
        Y = np.column_stack([np.sin(X[:, 0]) + X[:, 1], X[:, 2] * X[:, 3]])
        ours = fit_tree(X, Y, max_depth=3)
        ref = sk.DecisionTreeRegressor(max_depth=3, random_state=0).fit(X, Y)
        Xt = rng.normal(size=(300, 4))
        np.testing.assert_allclose(ours.predict(Xt), ref.predict(Xt), rtol=1e-10, atol=1e-12)

    def test_left_routing_is_strict(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        tree = fit_tree(X, np.array([0.0, 0.0, 1.0, 1.0]), max_depth=1)
        thr = tree.threshold[0]
        out = tree.predict(np.array([[thr - 1e-12], [thr]]))
        assert out[0, 0] == 0.0 and out[1, 0] == 1.0

    def test_constant_target_is_single_leaf(self, rng):
        tree = fit_tree(rng.normal(size=(20, 3)), np.full(20, 2.5))
        assert tree.n_leaves == 1 and tree.depth() == 0
        assert np.all(tree.predict(rng.normal(size=(5, 3))) == 2.5)

    def test_depth_zero(self, rng):
        Y = rng.normal(size=(10, 2))
        tree = fit_tree(rng.normal(size=(10, 1)), Y, max_depth=0)
        np.testing.assert_allclose(tree.predict(np.zeros((1, 1)))[0], Y.mean(0))

    def test_feature_gains_sum_to_sse_reduction(self, rng):
        X = rng.normal(size=(80, 3))
        Y = rng.normal(size=(80, 2)) + 3 * (X[:, [1]] > 0)
        tree = fit_tree(X, Y, max_depth=3)
        sse0 = float(((Y - Y.mean(0)) ** 2).sum())
        sse1 = float(((Y - tree.predict(X)) ** 2).sum())
        assert tree.feature_gains().sum() == pytest.approx(sse0 - sse1, rel=1e-9)
        assert np.argmax(tree.feature_gains()) == 1

    def test_roundtrip(self, rng):
        X = rng.normal(size=(30, 2))
        tree = fit_tree(X, rng.normal(size=(30, 2)), max_depth=3)
        back = RegressionTree.from_dict(tree.to_dict())
        assert np.array_equal(back.predict(X), tree.predict(X))

    def test_errors(self):
        with pytest.raises(EmptyInputError):
            fit_tree(np.zeros((0, 2)), np.zeros((0, 1)))
        with pytest.raises(DimensionError):
            fit_tree(np.zeros((3, 2)), np.zeros((4, 1)))
        with pytest.raises(NumericError):
            fit_tree(np.zeros((2, 1)), np.array([np.nan, 1.0]))
        with pytest.raises(ConfigError):
            fit_tree(np.zeros((2, 1)), np.zeros(2), min_samples_leaf=0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 4))
    def test_fit_never_worse_than_mean(self, seed, depth):
        r = np.random.default_rng(seed)
        X, Y = r.normal(size=(25, 2)), r.normal(size=(25, 2))
        tree = fit_tree(X, Y, max_depth=depth)
        assert tree.depth() <= depth
        assert ((Y - tree.predict(X)) ** 2).sum() <= ((Y - Y.mean(0)) ** 2).sum() + 1e-12


class TestDenseStack:
    @pytest.mark.parametrize("out_act", ["identity", "relu"])
    def test_gradient_check(self, rng, out_act):
        net = DenseStack.initialize([4, 6, 5, 3], rng, output_activation=out_act)
        for b in net.biases:
            b[:] = rng.uniform(0.05, 0.2, size=b.shape)
        X = rng.normal(size=(5, 4))
        T = rng.normal(size=(5, 3))
        learner = MlpLearner(MlpConfig(), net)
        _, grads = learner.loss_and_grads(X, T)
        fd = central_difference(lambda: learner.loss_and_grads(X, T)[0], net.params, h=1e-6)
        for g, f in zip(grads, fd):
            assert norm_rel_err(g, f) < 1e-4

    def test_input_gradient(self, rng):
        net = DenseStack.initialize([3, 4, 2], rng)
        X = rng.normal(size=(5, 3))
        out, cache = net.forward(X)
        _, gin = net.backward(cache, np.ones_like(out))
        (fd,) = central_difference(lambda: float(net.forward(X)[0].sum()), [X], h=1e-6)
        assert norm_rel_err(gin, fd) < 1e-4

    def test_zero_output_init(self, rng):
        net = DenseStack.initialize([3, 4, 2], rng, zero_output=True)
        assert np.all(net.predict(rng.normal(size=(6, 3))) == 0.0)

    def test_bad_input_shape(self, rng):
        with pytest.raises(DimensionError):
            DenseStack.initialize([3, 2], rng).forward(np.zeros((2, 4)))


class TestOptimizer:
    def test_sgd_step(self):
        p = np.array([1.0, 2.0])
        Optimizer("sgd", 0.5).step([p], [np.array([2.0, -2.0])])
        np.testing.assert_array_equal(p, [0.0, 3.0])

    def test_rmsprop_first_step(self):
        # s = 0.1 g^2, so the step is lr * g / (sqrt(0.1) |g| + 1e-8)
        p = np.array([0.0])
        Optimizer("rmsprop", 0.01).step([p], [np.array([4.0])])
        assert p[0] == pytest.approx(-0.01 * 4.0 / (np.sqrt(0.1) * 4.0 + 1e-8), rel=1e-12)

    def test_unknown(self):
        with pytest.raises(ConfigError):
            Optimizer("adam", 0.1)


class TestFitMlp:
    def test_learns_linear_map(self, rng):
        X = rng.normal(size=(400, 3))
        T = X @ np.array([[1.0, -1.0], [0.5, 0.0], [0.0, 2.0]])
        cfg = MlpConfig(hidden=(16,), optimizer="rmsprop", lr=0.01, epochs=60, batch_size=32)
        net = fit_mlp(X, T, cfg)
        mse = np.mean(np.sum((predict_mlp(net, X) - T) ** 2, axis=1))
        assert mse < 0.05 * np.mean(np.sum(T**2, axis=1))
        assert net.history[-1] < net.history[0]

    def test_deterministic(self, rng):
        X, T = rng.normal(size=(50, 2)), rng.normal(size=(50, 2))
        a = fit_mlp(X, T, MlpConfig(seed=3))
        b = fit_mlp(X, T, MlpConfig(seed=3))
        assert all(np.array_equal(p, q) for p, q in zip(a.net.params, b.net.params))

    def test_warm_start_uses_init(self, rng):
        X, T = rng.normal(size=(20, 2)), rng.normal(size=(20, 1))
        first = fit_mlp(X, T, MlpConfig(hidden=(4,), epochs=1))
        second = fit_mlp(X, T, MlpConfig(hidden=(4,), epochs=1, lr=0.0), init=first)
        assert np.array_equal(second.predict(X), first.predict(X))

    def test_divergence_reports_epoch(self, rng):
        X = rng.normal(size=(20, 2)) * 1e3
        T = rng.normal(size=(20, 1)) * 1e200
        with pytest.raises(TrainingDivergedError) as info:
            fit_mlp(X, T, MlpConfig(optimizer="sgd", lr=10.0, epochs=3))
        assert info.value.epoch == 0

    def test_errors(self):
        with pytest.raises(EmptyInputError):
            fit_mlp(np.zeros((0, 2)), np.zeros((0, 1)), MlpConfig())
        with pytest.raises(ConfigError):
            fit_mlp(np.zeros((2, 2)), np.zeros((2, 1)), MlpConfig(epochs=0))

    def test_roundtrip(self, rng):
        X = rng.normal(size=(10, 2))
        net = fit_mlp(X, rng.normal(size=(10, 2)), MlpConfig(hidden=(3, 3)))
        back = MlpLearner.from_dict(net.to_dict())
        assert np.array_equal(back.predict(X), net.predict(X))
        assert back.config == net.config
