"""Gradient boosting classifier on structured features and boosted-feature vectors.

Binary problems fit one logistic-loss tree per stage; M-class problems fit one
softmax-loss tree per class per stage. Leaf values take a single Newton step.
The boosted-feature vector (BFV) of a sample collects, for every tree, the raw
leaf value (before the learning-rate factor) of the leaf the sample reaches.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_softmax, softmax

from .core import DegenerateLabelsError, DimensionError, StateError
from .weaklearners import RegressionTree, fit_tree

_TINY_DENOM = 1e-150


@dataclass
class GbmModel:
    num_classes: int
    learning_rate: float
    init_scores: np.ndarray
    trees: list | None  # trees[stage][k]; one tree per stage when binary
    max_depth: int = 3
    min_samples_leaf: int = 1
    train_loss: list = field(default_factory=list)

    @property
    def n_outputs(self) -> int:
        """Trees per stage: 1 for binary, M otherwise."""
        return 1 if self.num_classes == 2 else self.num_classes

    @property
    def n_stages(self) -> int:
        self._require_fitted()
        return len(self.trees)

    @property
    def n_features(self) -> int:
        self._require_fitted()
        if not self.trees:
            raise StateError("a model with no stages has no recorded feature count")
        return self.trees[0][0].n_features

    def _require_fitted(self):
        if self.trees is None:
            raise StateError("GBM model has not been fitted")

    def feature_gains(self, n_features: int) -> np.ndarray:
        self._require_fitted()
        total = np.zeros(n_features)
        for stage in self.trees:
            for tree in stage:
                total += tree.feature_gains()
        return total

    def to_dict(self) -> dict:
        self._require_fitted()
        return {
            "num_classes": self.num_classes,
            "learning_rate": self.learning_rate,
            "init_scores": [float(v) for v in self.init_scores],
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "train_loss": [float(v) for v in self.train_loss],
            "trees": [[t.to_dict() for t in stage] for stage in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbmModel":
        return cls(
            num_classes=d["num_classes"],
            learning_rate=d["learning_rate"],
            init_scores=np.asarray(d["init_scores"], dtype=float),
            trees=[[RegressionTree.from_dict(t) for t in stage] for stage in d["trees"]],
            max_depth=d["max_depth"],
            min_samples_leaf=d["min_samples_leaf"],
            train_loss=list(d.get("train_loss", [])),
        )


def _training_loss(raw: np.ndarray, labels: np.ndarray, num_classes: int) -> float:
    if num_classes == 2:
        s = raw[:, 0]
        # log(1 + e^s) - y s
        return float(np.mean(np.logaddexp(0.0, s) - labels * s))
    return float(-np.mean(log_softmax(raw, axis=1)[np.arange(len(labels)), labels]))


def fit_gbm(features, labels, num_classes: int, n_stages: int, learning_rate: float = 0.1,
            max_depth: int = 3, min_samples_leaf: int = 1, seed: int = 0) -> GbmModel:
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise DimensionError(f"features {X.shape} vs {len(y)} labels")
    if len(y) < 2 or len(np.unique(y)) < 2:
        raise DegenerateLabelsError("gradient boosting needs at least two distinct labels")

    n = len(y)
    if num_classes == 2:
        p = y.mean()
        init = np.array([np.log(p / (1.0 - p))])
    else:
        prior = np.bincount(y, minlength=num_classes) / n
        init = np.log(np.maximum(prior, np.finfo(float).tiny))
    model = GbmModel(num_classes, learning_rate, init, [], max_depth, min_samples_leaf)
    raw = np.tile(init, (n, 1))
    onehot = np.eye(num_classes)[y]
    model.train_loss.append(_training_loss(raw, y, num_classes))

    for _ in range(n_stages):
        stage = []
        if num_classes == 2:
            prob = expit(raw[:, 0])
            resid = y - prob
            hess = prob * (1.0 - prob)
            stage.append(_fit_newton_tree(X, resid, hess, 1.0, max_depth, min_samples_leaf))
        else:
            prob = softmax(raw, axis=1)
            factor = (num_classes - 1) / num_classes
            for k in range(num_classes):
                resid = onehot[:, k] - prob[:, k]
                hess = np.abs(resid) * (1.0 - np.abs(resid))
                stage.append(_fit_newton_tree(X, resid, hess, factor, max_depth, min_samples_leaf))
        for k, tree in enumerate(stage):
            raw[:, k] += learning_rate * tree.predict(X)[:, 0]
        model.trees.append(stage)
        model.train_loss.append(_training_loss(raw, y, num_classes))
    return model


def _fit_newton_tree(X, resid, hess, factor, max_depth, min_samples_leaf) -> RegressionTree:
    tree = fit_tree(X, resid[:, None], max_depth, min_samples_leaf)
    leaves = tree.apply(X)
    num = np.bincount(leaves, weights=resid, minlength=len(tree.feature))
    den = np.bincount(leaves, weights=hess, minlength=len(tree.feature))
    for leaf in np.unique(leaves):
        tree.value[leaf, 0] = factor * num[leaf] / den[leaf] if den[leaf] > _TINY_DENOM else 0.0
    return tree


def predict_raw(model: GbmModel, features) -> np.ndarray:
    """Staged decision function, shape (n, 1) for binary and (n, M) otherwise."""
    model._require_fitted()
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"features must be 2-D, got {X.shape}")
    raw = np.tile(model.init_scores, (len(X), 1))
    for stage in model.trees:
        for k, tree in enumerate(stage):
            raw[:, k] += model.learning_rate * tree.predict(X)[:, 0]
    return raw


def predict_proba(model: GbmModel, features) -> np.ndarray:
    raw = predict_raw(model, features)
    if model.num_classes == 2:
        p1 = expit(raw[:, 0])
        return np.column_stack([1.0 - p1, p1])
    return softmax(raw, axis=1)


def predict(model: GbmModel, features) -> np.ndarray:
    raw = predict_raw(model, features)
    if model.num_classes == 2:
        return (raw[:, 0] > 0).astype(np.int64)
    return np.argmax(raw, axis=1)


@dataclass(frozen=True)
class BoostedFeatureVector:
    """Raw leaf values; shape (N,) for binary models, (M, N) otherwise.

    Entry (i, j) belongs to class i and stage j.
    """

    values: np.ndarray

    def flatten(self) -> np.ndarray:
        """Stage-major order: stage 0 classes 0..M-1, then stage 1, ..."""
        if self.values.ndim == 1:
            return self.values.copy()
        return self.values.T.ravel()


def bfv_matrix(model: GbmModel, features) -> np.ndarray:
    """Flattened BFVs for a batch, shape (n, n_outputs * N), stage-major."""
    model._require_fitted()
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"features must be 2-D, got {X.shape}")
    cols = [tree.predict(X)[:, 0] for stage in model.trees for tree in stage]
    if not cols:
        return np.zeros((len(X), 0))
    return np.column_stack(cols)


def extract_bfv(model: GbmModel, x_s) -> BoostedFeatureVector:
    x_s = np.asarray(x_s, dtype=float)
    if x_s.ndim != 1:
        raise DimensionError("extract_bfv takes a single feature vector")
    flat = bfv_matrix(model, x_s[None, :])[0]
    if model.num_classes == 2:
        return BoostedFeatureVector(flat)
    return BoostedFeatureVector(flat.reshape(model.n_stages, model.num_classes).T.copy())


def write_bfv_csv(path, bfvs: np.ndarray):
    bfvs = np.atleast_2d(bfvs)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"bfv_{i}" for i in range(bfvs.shape[1])])
        for row in bfvs:
            writer.writerow([repr(float(v)) for v in row])
