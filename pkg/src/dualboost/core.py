"""Shared domain types, the class codebook, argmax classification and metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes do not agree with the declared dimensions."""


class EmptyInputError(ValueError):
    pass


class DomainError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


class ConfigError(ValueError):
    pass


class StateError(RuntimeError):
    pass


class DegenerateLabelsError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    """A learner produced a non-finite loss during fitting."""

    def __init__(self, message: str, epoch: int | None = None, iteration: int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.iteration = iteration


@dataclass(frozen=True)
class Codebook:
    """Unit-vector codewords y^k for M classes."""

    num_classes: int

    def __post_init__(self):
        if self.num_classes < 2:
            raise DomainError(f"need at least 2 classes, got {self.num_classes}")

    @property
    def codewords(self) -> np.ndarray:
        return np.eye(self.num_classes)

    def codeword(self, k: int) -> np.ndarray:
        return self.codewords[k]

    def encode(self, labels: np.ndarray) -> np.ndarray:
        """One row per label: the codeword of that label."""
        return self.codewords[np.asarray(labels, dtype=int)]


@dataclass(frozen=True)
class BimodalSample:
    x_u: np.ndarray
    x_s: np.ndarray
    label: int


@dataclass
class Dataset:
    """A bimodal dataset held column-wise.

    ``xu`` is (n, dim_u), ``xs`` is (n, dim_s) and ``y`` holds integer labels.
    ``meta`` carries generator bookkeeping (flip masks, column splits, shape
    types) that is not part of the on-disk format.
    """

    xu: np.ndarray
    xs: np.ndarray
    y: np.ndarray
    num_classes: int
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xu = np.ascontiguousarray(np.asarray(self.xu, dtype=float))
        self.xs = np.ascontiguousarray(np.asarray(self.xs, dtype=float))
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.xu.ndim != 2 or self.xs.ndim != 2:
            raise DimensionError("xu and xs must be 2-D")
        n = len(self.y)
        if self.xu.shape[0] != n or self.xs.shape[0] != n:
            raise DimensionError(
                f"row counts disagree: xu={self.xu.shape[0]} xs={self.xs.shape[0]} y={n}"
            )
        if n and (self.y.min() < 0 or self.y.max() >= self.num_classes):
            raise DomainError(f"labels must lie in [0, {self.num_classes})")
        if not (np.isfinite(self.xu).all() and np.isfinite(self.xs).all()):
            raise NumericError("dataset features must be finite")

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def dim_u(self) -> int:
        return self.xu.shape[1]

    @property
    def dim_s(self) -> int:
        return self.xs.shape[1]

    @property
    def codebook(self) -> Codebook:
        return Codebook(self.num_classes)

    @property
    def samples(self) -> Iterator[BimodalSample]:
        for i in range(self.n):
            yield BimodalSample(self.xu[i], self.xs[i], int(self.y[i]))

    def subset(self, index) -> "Dataset":
        return Dataset(self.xu[index], self.xs[index], self.y[index], self.num_classes, self.seed)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.num_classes == other.num_classes
            and np.array_equal(self.xu, other.xu)
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.y, other.y)
        )


def classify(f_x, codebook: Codebook) -> int:
    """argmax_k <y^k, f(x)>, lowest index on ties."""
    f_x = np.asarray(f_x, dtype=float)
    if f_x.shape != (codebook.num_classes,):
        raise DimensionError(f"score vector has shape {f_x.shape}, expected ({codebook.num_classes},)")
    return int(np.argmax(codebook.codewords @ f_x))


def classify_batch(scores: np.ndarray, num_classes: int) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[1] != num_classes:
        raise DimensionError(f"scores have shape {scores.shape}, expected (n, {num_classes})")
    # np.argmax returns the first maximum, which is the lowest-index tie-break
    return np.argmax(scores, axis=1)


@dataclass(frozen=True)
class Metrics:
    confusion: np.ndarray
    accuracy: float
    f1: float

    def get(self, name: str) -> float:
        if name == "f1":
            return self.f1
        if name == "accuracy":
            return self.accuracy
        raise ConfigError(f"unknown metric {name!r}")


def confusion_and_metrics(predictions: Sequence[int], labels: Sequence[int], num_classes: int) -> Metrics:
    """Confusion matrix (rows = true label), accuracy and F1.

    F1 is the binary F1 with class 1 as positive when ``num_classes == 2`` and
    the macro average otherwise. A class with no true, predicted or correct
    members has an undefined F1: the binary score is then 1.0 (nothing to
    find, nothing found) and the macro average skips the class. A class that
    appears but is never correctly predicted scores 0.
    """
    preds = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.size == 0:
        raise EmptyInputError("no predictions to score")
    if preds.shape != labels.shape:
        raise DimensionError(f"{preds.shape[0]} predictions vs {labels.shape[0]} labels")
    for arr in (preds, labels):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise DomainError(f"class indices must lie in [0, {num_classes})")

    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (labels, preds), 1)
    accuracy = float(np.trace(confusion) / confusion.sum())

    tp = np.diag(confusion).astype(float)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    if num_classes == 2:
        f1 = 1.0 if denom[1] == 0 else float(2 * tp[1] / denom[1])
    else:
        present = denom > 0
        f1 = float(np.mean(2 * tp[present] / denom[present]))
    return Metrics(confusion, accuracy, f1)


def score(predictions, labels, num_classes: int, metric: str = "f1") -> float:
    return confusion_and_metrics(predictions, labels, num_classes).get(metric)


def relative_improvement(metric_model: float, metric_baseline: float) -> float:
    """Percent change of a model's metric against a baseline's."""
    if not metric_baseline > 0:
        raise DomainError(f"baseline metric must be positive, got {metric_baseline}")
    return 100.0 * (metric_model - metric_baseline) / metric_baseline
