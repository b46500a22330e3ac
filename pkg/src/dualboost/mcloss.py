"""Multi-class exponential loss with unit-vector codewords.

With codewords y^k = e_k every inner product <f, y_i - y^k> reduces to
f[y_i] - f[k], so the per-sample quantities are computed from the matrix of
score gaps ``f[:, k] - f[:, y_i]``. Working with those gaps is the
max-shifted form of the factored expressions: the factor e^{-f_y/2} is folded
into every term before exponentiating, so no intermediate exceeds the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Codebook, DimensionError, NumericError


@dataclass(frozen=True)
class PseudoResiduals:
    w: np.ndarray  # (n, M)
    w_tilde: np.ndarray  # (n, M)
    w_hat: np.ndarray  # (n,)


@dataclass(frozen=True)
class RiskReport:
    total_risk: float
    mean_loss: float


def _as_batch(scores, labels, num_classes: int):
    scores = np.asarray(scores, dtype=float)
    single = scores.ndim == 1
    scores = np.atleast_2d(scores)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if scores.shape[1] != num_classes:
        raise DimensionError(f"scores have {scores.shape[1]} columns, expected {num_classes}")
    if scores.shape[0] != labels.shape[0]:
        raise DimensionError(f"{scores.shape[0]} score rows vs {labels.shape[0]} labels")
    if not np.isfinite(scores).all():
        raise NumericError("scores must be finite")
    return scores, labels, single


def _gap_exponentials(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """E[i, k] = exp(-<f_i, y_i - y^k> / 2) = exp((f_ik - f_iy) / 2)."""
    own = scores[np.arange(len(labels)), labels]
    return np.exp(0.5 * (scores - own[:, None]))


def loss(f_x, label, codebook: Codebook):
    """L(y, f) = sum_k exp(-<f, y - y^k>/2). Vectorises over rows of ``f_x``."""
    scores, labels, single = _as_batch(f_x, label, codebook.num_classes)
    out = _gap_exponentials(scores, labels).sum(axis=1)
    return float(out[0]) if single else out


def risk(scores, labels, codebook: Codebook) -> RiskReport:
    scores, labels, _ = _as_batch(scores, labels, codebook.num_classes)
    total = float(_gap_exponentials(scores, labels).sum())
    return RiskReport(total, total / len(labels))


def total_risk(scores: np.ndarray, labels: np.ndarray) -> float:
    """Summed loss without validation; the hot path of step-size search."""
    own = scores[np.arange(len(labels)), labels]
    return float(np.exp(0.5 * (scores - own[:, None])).sum())


def compute_w(f_x, label, codebook: Codebook) -> np.ndarray:
    """w_i = 1/2 sum_k (y_i - y^k) exp(-<f, y_i - y^k>/2)."""
    scores, labels, single = _as_batch(f_x, label, codebook.num_classes)
    e = _gap_exponentials(scores, labels)
    w = -0.5 * e
    rows = np.arange(len(labels))
    w[rows, labels] += 0.5 * e.sum(axis=1)
    return w[0] if single else w


def compute_w_tilde(f_x, label, codebook: Codebook) -> np.ndarray:
    """sum_k (y_i - y^k) exp(-<f, y_i - y^k>/4)."""
    scores, labels, single = _as_batch(f_x, label, codebook.num_classes)
    r = np.sqrt(_gap_exponentials(scores, labels))
    wt = -r
    rows = np.arange(len(labels))
    wt[rows, labels] += r.sum(axis=1)
    return wt[0] if single else wt


def compute_w_hat(f_x, label, codebook: Codebook):
    """sum_k ||y_i - y^k||^2 exp(-<f, y_i - y^k>/2); the k = y_i term is 0."""
    scores, labels, single = _as_batch(f_x, label, codebook.num_classes)
    e = _gap_exponentials(scores, labels)
    sq_dist = 2.0 * (1.0 - codebook.encode(labels))
    out = (sq_dist * e).sum(axis=1)
    return float(out[0]) if single else out


def pseudo_residuals(scores, labels, codebook: Codebook) -> PseudoResiduals:
    return PseudoResiduals(
        compute_w(scores, labels, codebook),
        compute_w_tilde(scores, labels, codebook),
        compute_w_hat(scores, labels, codebook),
    )


def _check_aligned(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise DimensionError(f"learner outputs {a.shape} vs residuals {b.shape}")


def first_order_decrease(learner_outputs, w) -> float:
    """sum_i <g(x_i), w_i>: minus the derivative of the risk along g at step 0."""
    g = np.atleast_2d(np.asarray(learner_outputs, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    _check_aligned(g, w)
    return float(np.sum(g * w))


def risk_quadratic_surrogate(g_outputs, h_outputs, residuals: PseudoResiduals,
                             base_risk: float, eps: float, delta: float) -> float:
    """Second-order expansion of R(f + eps g + delta h) around (0, 0).

    The curvature and cross terms are evaluated exactly as the derivation
    writes them (they are not the exact second derivatives of the risk).
    """
    g = np.atleast_2d(np.asarray(g_outputs, dtype=float))
    h = np.atleast_2d(np.asarray(h_outputs, dtype=float))
    w, wt, wh = residuals.w, residuals.w_tilde, residuals.w_hat
    _check_aligned(g, w)
    _check_aligned(h, w)
    gw = np.sum(g * w)
    hw = np.sum(h * w)
    curv_g = 0.25 * np.sum(np.sum(g * g, axis=1) + 2.0 * np.sum(g * wt, axis=1) + wh)
    curv_h = 0.25 * np.sum(np.sum(h * h, axis=1) + 2.0 * np.sum(h * wt, axis=1) + wh)
    return float(
        base_risk
        - eps * gw
        - delta * hw
        + 0.5 * eps**2 * curv_g
        + 0.5 * delta**2 * curv_h
        + 0.5 * eps * delta * (gw + hw)
    )
