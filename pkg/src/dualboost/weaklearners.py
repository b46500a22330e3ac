"""Weak learners fitted to vector targets by squared error.

Structured features get multi-output CART regression trees; unstructured
features get small fully connected networks trained by backpropagation.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import ConfigError, DimensionError, EmptyInputError, NumericError, TrainingDivergedError

# ---------------------------------------------------------------------------
# regression trees


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 3
    min_samples_leaf: int = 1


class RegressionTree:
    """Binary tree stored as parallel node arrays.

    Internal nodes have ``feature >= 0``; a sample goes left when
    ``x[feature] < threshold`` and right otherwise. Leaves hold the mean
    target vector of the training rows that reached them.
    """

    def __init__(self, feature, threshold, left, right, value, gain, n_samples,
                 n_features: int, max_depth: int, min_samples_leaf: int):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)
        self.gain = np.asarray(gain, dtype=float)
        self.n_samples = np.asarray(n_samples, dtype=np.int64)
        self.n_features = n_features
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    @property
    def n_outputs(self) -> int:
        return self.value.shape[1]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def depth(self) -> int:
        def walk(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def apply(self, X) -> np.ndarray:
        """Index of the leaf each row of ``X`` lands in."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionError(f"expected (n, {self.n_features}) features, got {X.shape}")
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            r, nd = rows[active], node[active]
            go_left = X[r, feat[active]] < self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def feature_gains(self) -> np.ndarray:
        gains = np.zeros(self.n_features)
        internal = self.feature >= 0
        np.add.at(gains, self.feature[internal], self.gain[internal])
        return gains

    def to_dict(self) -> dict:
        def node(i):
            if self.feature[i] < 0:
                return {"n": int(self.n_samples[i]), "value": [float(v) for v in self.value[i]]}
            return {
                "n": int(self.n_samples[i]),
                "feature": int(self.feature[i]),
                "threshold": float(self.threshold[i]),
                "gain": float(self.gain[i]),
                "left": node(self.left[i]),
                "right": node(self.right[i]),
            }

        return {
            "n_features": self.n_features,
            "n_outputs": self.n_outputs,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "root": node(0),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        builder = _NodeArrays(d["n_outputs"])

        def visit(rec):
            i = builder.add(rec["n"])
            if "value" in rec:
                if len(rec["value"]) != d["n_outputs"]:
                    raise ValueError("leaf value length does not match n_outputs")
                builder.value[i] = np.asarray(rec["value"], dtype=float)
                return i
            builder.feature[i] = rec["feature"]
            builder.threshold[i] = rec["threshold"]
            builder.gain[i] = rec["gain"]
            builder.left[i] = visit(rec["left"])
            builder.right[i] = visit(rec["right"])
            return i

        visit(d["root"])
        return builder.build(d["n_features"], d["max_depth"], d["min_samples_leaf"])


class _NodeArrays:
    def __init__(self, n_outputs: int):
        self.n_outputs = n_outputs
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.gain, self.n_samples = [], [], []

    def add(self, n: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(np.zeros(self.n_outputs))
        self.gain.append(0.0)
        self.n_samples.append(n)
        return len(self.feature) - 1

    def build(self, n_features, max_depth, min_samples_leaf) -> RegressionTree:
        return RegressionTree(
            self.feature, self.threshold, self.left, self.right,
            np.array(self.value).reshape(-1, self.n_outputs), self.gain, self.n_samples,
            n_features, max_depth, min_samples_leaf,
        )


def _best_split(X: np.ndarray, Yc: np.ndarray, min_leaf: int):
    """Best (gain, feature, threshold) for centred targets ``Yc``.

    Gain is the squared-error reduction summed over target components.
    Features are scanned in order and thresholds ascending; only a strictly
    larger gain replaces the incumbent.
    """
    n = len(Yc)
    n_left = np.arange(1, n)
    n_right = n - n_left
    size_ok = (n_left >= min_leaf) & (n_right >= min_leaf)
    total = Yc.sum(axis=0)
    parent = np.sum(total**2) / n
    best = (0.0, -1, 0.0)
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        valid = size_ok & (xs[:-1] < xs[1:])
        if not valid.any():
            continue
        left_sum = np.cumsum(Yc[order], axis=0)[:-1]
        right_sum = total - left_sum
        gain = (
            np.sum(left_sum**2, axis=1) / n_left
            + np.sum(right_sum**2, axis=1) / n_right
            - parent
        )
        gain = np.where(valid, gain, -np.inf)
        p = int(np.argmax(gain))
        if gain[p] > best[0]:
            lo, hi = xs[p], xs[p + 1]
            thr = 0.5 * (lo + hi)
            if not lo < thr <= hi:
                thr = hi
            best = (float(gain[p]), j, float(thr))
    return best


def fit_tree(features, targets, max_depth: int = 3, min_samples_leaf: int = 1,
             seed: int | None = None) -> RegressionTree:
    """Greedy top-down multi-output CART fit by squared error.

    ``seed`` is accepted for interface symmetry with the network learner; the
    exhaustive split search is deterministic.
    """
    X = np.asarray(features, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if len(X) == 0:
        raise EmptyInputError("fit_tree needs at least one sample")
    if X.ndim != 2 or X.shape[1] < 1:
        raise DimensionError("features must be 2-D with at least one column")
    if len(Y) != len(X):
        raise DimensionError(f"{len(X)} feature rows vs {len(Y)} target rows")
    if not np.isfinite(Y).all():
        raise NumericError("targets must be finite")
    if max_depth < 0 or min_samples_leaf < 1:
        raise ConfigError("max_depth must be >= 0 and min_samples_leaf >= 1")

    nodes = _NodeArrays(Y.shape[1])

    def grow(idx: np.ndarray, depth: int) -> int:
        Yn = Y[idx]
        mean = Yn.mean(axis=0)
        node = nodes.add(len(idx))
        nodes.value[node] = mean
        if depth >= max_depth or len(idx) < 2 * min_samples_leaf:
            return node
        Yc = Yn - mean
        sse = float(np.sum(Yc**2))
        # relative floor: float noise around a constant target is not a signal
        if sse <= 1e-14 * float(np.sum(Yn**2)) or sse == 0.0:
            return node
        gain, feat, thr = _best_split(X[idx], Yc, min_samples_leaf)
        if feat < 0 or gain <= 1e-12 * sse:
            return node
        go_left = X[idx, feat] < thr
        nodes.feature[node] = feat
        nodes.threshold[node] = thr
        nodes.gain[node] = gain
        nodes.left[node] = grow(idx[go_left], depth + 1)
        nodes.right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(len(X)), 0)
    return nodes.build(X.shape[1], max_depth, min_samples_leaf)


def predict_tree(tree: RegressionTree, features) -> np.ndarray:
    return tree.predict(features)


# ---------------------------------------------------------------------------
# fully connected networks


class DenseStack:
    """Fully connected layers with rectifier hidden units.

    ``output_activation`` is applied to the last layer only: ``"identity"``
    for regressors and heads, ``"relu"`` for embedding branches.
    """

    def __init__(self, weights, biases, output_activation: str = "identity"):
        if output_activation not in ("identity", "relu"):
            raise ConfigError(f"unknown output activation {output_activation!r}")
        self.weights = [np.asarray(W, dtype=float) for W in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.output_activation = output_activation

    @classmethod
    def initialize(cls, sizes, rng: np.random.Generator, output_activation="identity",
                   zero_output: bool = False) -> "DenseStack":
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        if zero_output:
            weights[-1][:] = 0.0
        return cls(weights, biases, output_activation)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def _relu_at(self, layer: int) -> bool:
        return layer < len(self.weights) - 1 or self.output_activation == "relu"

    def forward(self, X: np.ndarray):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.sizes[0]:
            raise DimensionError(f"expected (n, {self.sizes[0]}) inputs, got {X.shape}")
        cache = []
        a = X
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            cache.append((a, z))
            a = np.maximum(z, 0.0) if self._relu_at(i) else z
        return a, cache

    def backward(self, cache, grad_out: np.ndarray):
        """Gradients [dW0, db0, dW1, ...] and the gradient w.r.t. the input."""
        grads = [None] * (2 * len(self.weights))
        g = grad_out
        for i in range(len(self.weights) - 1, -1, -1):
            a, z = cache[i]
            if self._relu_at(i):
                g = g * (z > 0)
            grads[2 * i] = a.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, g

    def predict(self, X) -> np.ndarray:
        return self.forward(X)[0]

    def copy(self) -> "DenseStack":
        return DenseStack([W.copy() for W in self.weights], [b.copy() for b in self.biases],
                          self.output_activation)


RMSPROP_DECAY = 0.9
RMSPROP_EPS = 1e-8


class Optimizer:
    """Plain SGD or RMSProp updating a list of arrays in place."""

    def __init__(self, kind: str, lr: float):
        if kind not in ("sgd", "rmsprop"):
            raise ConfigError(f"unknown optimizer {kind!r}")
        self.kind = kind
        self.lr = lr
        self._sq = None

    def step(self, params, grads):
        if self.kind == "sgd":
            for p, g in zip(params, grads):
                p -= self.lr * g
            return
        if self._sq is None:
            self._sq = [np.zeros_like(p) for p in params]
        for p, g, s in zip(params, grads, self._sq):
            s *= RMSPROP_DECAY
            s += (1.0 - RMSPROP_DECAY) * g * g
            p -= self.lr * g / (np.sqrt(s) + RMSPROP_EPS)


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple = (32,)
    optimizer: str = "rmsprop"
    lr: float = 1e-3
    epochs: int = 5
    batch_size: int = 128
    seed: int = 0
    zero_init_output: bool = False
    warm_start: bool = False

    def with_seed(self, seed: int) -> "MlpConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MlpConfig":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", ()))
        return cls(**d)


@dataclass
class MlpLearner:
    config: MlpConfig
    net: DenseStack
    history: list = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        return self.net.predict(X)

    def loss_and_grads(self, X, T):
        """Mean over rows of the squared error norm, and its parameter gradients."""
        P, cache = self.net.forward(X)
        diff = P - T
        loss = float(np.sum(diff**2) / len(X))
        grads, _ = self.net.backward(cache, 2.0 * diff / len(X))
        return loss, grads

    def to_dict(self) -> dict:
        from .serialization import encode_array

        return {
            "config": self.config.to_dict(),
            "output_activation": self.net.output_activation,
            "weights": [encode_array(W) for W in self.net.weights],
            "biases": [encode_array(b) for b in self.net.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpLearner":
        from .serialization import decode_array

        net = DenseStack([decode_array(w) for w in d["weights"]],
                         [decode_array(b) for b in d["biases"]], d["output_activation"])
        return cls(MlpConfig.from_dict(d["config"]), net)


def fit_mlp(features, targets, config: MlpConfig, init: MlpLearner | None = None) -> MlpLearner:
    """Mini-batch minimisation of the mean squared error.

    Initial weights and the per-epoch shuffle both come from ``config.seed``.
    ``init`` supplies starting weights when warm-starting.
    """
    X = np.asarray(features, dtype=float)
    T = np.asarray(targets, dtype=float)
    if T.ndim == 1:
        T = T[:, None]
    if len(X) == 0:
        raise EmptyInputError("fit_mlp needs at least one sample")
    if X.ndim != 2 or len(T) != len(X):
        raise DimensionError(f"features {X.shape} vs targets {T.shape}")
    if config.epochs < 1:
        raise ConfigError("epochs must be >= 1")
    rng = np.random.default_rng(config.seed)
    if init is not None:
        net = init.net.copy()
        if net.sizes[0] != X.shape[1] or net.sizes[-1] != T.shape[1]:
            raise DimensionError("warm-start network does not match data dimensions")
    else:
        sizes = [X.shape[1], *config.hidden, T.shape[1]]
        net = DenseStack.initialize(sizes, rng, zero_output=config.zero_init_output)
    learner = MlpLearner(config, net)
    opt = Optimizer(config.optimizer, config.lr)
    n = len(X)
    bs = max(1, min(config.batch_size, n))
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            # overflow is reported below as divergence rather than a warning
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = learner.loss_and_grads(X[idx], T[idx])
                if not np.isfinite(loss):
                    raise TrainingDivergedError(f"network loss became non-finite in epoch {epoch}", epoch=epoch)
                opt.step(net.params, grads)
            total += loss * len(idx)
        if not all(np.isfinite(p).all() for p in net.params):
            raise TrainingDivergedError(f"network weights became non-finite in epoch {epoch}", epoch=epoch)
        learner.history.append(total / n)
    return learner


def predict_mlp(net: MlpLearner, features) -> np.ndarray:
    return net.predict(features)
