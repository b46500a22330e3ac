"""First-order boosting with one weak-learner family per modality.

Each stage fits a network g on the unstructured features and a tree h on the
structured features, both to the pseudo-residuals w of the exponential loss,
then picks the step pair (eps, delta) minimising the training risk of
f + eps g + delta h. Switching a family off gives the single-learner scheme
(GD-MCBoost) on the other modality.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import mcloss
from .core import Codebook, ConfigError, Dataset, DimensionError, TrainingDivergedError, classify_batch, score
from .stepsearch import StepConfig, search_steps
from .weaklearners import MlpConfig, MlpLearner, RegressionTree, TreeConfig, fit_mlp, fit_tree

MODES = ("both", "only_g", "only_s")
HISTORY_FIELDS = ["iter", "risk", "eps", "delta", "seconds", "val_metric"]

# stream tags for per-(iteration, inner step) seeds
G_STREAM, H_STREAM, STEP_STREAM = 0, 1, 2


def derive_seed(seed: int, t: int, j: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, t, j, stream]).generate_state(1)[0])


@dataclass
class StagePair:
    g: MlpLearner | None
    h: RegressionTree | None
    eps: float
    delta: float

    def __post_init__(self):
        if self.g is None and self.h is None:
            raise ConfigError("a stage needs at least one learner")
        if self.g is None:
            self.eps = 0.0
        if self.h is None:
            self.delta = 0.0

    def contribution(self, xu: np.ndarray, xs: np.ndarray) -> np.ndarray:
        if self.g is None:
            return self.delta * self.h.predict(xs)
        if self.h is None:
            return self.eps * self.g.predict(xu)
        return self.eps * self.g.predict(xu) + self.delta * self.h.predict(xs)

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "delta": self.delta,
            "g": None if self.g is None else self.g.to_dict(),
            "h": None if self.h is None else self.h.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StagePair":
        return cls(
            g=None if d["g"] is None else MlpLearner.from_dict(d["g"]),
            h=None if d["h"] is None else RegressionTree.from_dict(d["h"]),
            eps=d["eps"],
            delta=d["delta"],
        )


@dataclass
class TwoWlModel:
    num_classes: int
    mode: str = "both"
    algorithm: str = "2wl"
    stages: list = field(default_factory=list)
    initial_risk: float = 0.0
    history: list = field(default_factory=list)
    best_iteration: int = 0
    metric: str = "f1"
    dim_u: int | None = None
    dim_s: int | None = None

    @property
    def codebook(self) -> Codebook:
        return Codebook(self.num_classes)

    def to_dict(self) -> dict:
        # wall-clock seconds stay out so fixed seeds give identical artifacts
        hist = [{k: v for k, v in row.items() if k != "seconds"} for row in self.history]
        return {
            "num_classes": self.num_classes,
            "mode": self.mode,
            "algorithm": self.algorithm,
            "initial_risk": self.initial_risk,
            "best_iteration": self.best_iteration,
            "metric": self.metric,
            "dim_u": self.dim_u,
            "dim_s": self.dim_s,
            "history": hist,
            "stages": [s.to_dict() for s in self.stages],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TwoWlModel":
        return cls(
            num_classes=d["num_classes"],
            mode=d["mode"],
            algorithm=d["algorithm"],
            stages=[StagePair.from_dict(s) for s in d["stages"]],
            initial_risk=d["initial_risk"],
            history=d["history"],
            best_iteration=d["best_iteration"],
            metric=d["metric"],
            dim_u=d["dim_u"],
            dim_s=d["dim_s"],
        )


def _check_pair(train: Dataset, valid: Dataset | None):
    if valid is None:
        return
    if (valid.num_classes, valid.dim_u, valid.dim_s) != (train.num_classes, train.dim_u, train.dim_s):
        raise DimensionError("train and validation datasets disagree on classes or dimensions")


class BoostingRun:
    """Score caches and per-iteration bookkeeping shared by the trainers."""

    def __init__(self, train: Dataset, valid: Dataset | None, model: TwoWlModel):
        _check_pair(train, valid)
        self.train, self.valid, self.model = train, valid, model
        self.codebook = train.codebook
        self.F = np.zeros((train.n, train.num_classes))
        self.Fv = None if valid is None else np.zeros((valid.n, valid.num_classes))
        self.t0 = time.perf_counter()
        model.initial_risk = mcloss.total_risk(self.F, train.y)
        self.best_val = -np.inf

    def residuals(self, second_order: bool = False):
        if second_order:
            return mcloss.pseudo_residuals(self.F, self.train.y, self.codebook)
        return mcloss.compute_w(self.F, self.train.y, self.codebook)

    def fit_g(self, targets, config: MlpConfig, seed: int, t: int) -> MlpLearner:
        init = None
        if config.warm_start:
            prev = [s.g for s in self.model.stages if s.g is not None]
            init = prev[-1] if prev else None
        try:
            return fit_mlp(self.train.xu, targets, config.with_seed(seed), init=init)
        except TrainingDivergedError as exc:
            raise TrainingDivergedError(f"iteration {t}: {exc}", epoch=exc.epoch, iteration=t) from exc

    def fit_h(self, targets, config: TreeConfig) -> RegressionTree:
        return fit_tree(self.train.xs, targets, config.max_depth, config.min_samples_leaf)

    def risk_function(self, G, H):
        F, y = self.F, self.train.y
        if G is None:
            return lambda e, d: mcloss.total_risk(F + d * H, y)
        if H is None:
            return lambda e, d: mcloss.total_risk(F + e * G, y)
        return lambda e, d: mcloss.total_risk(F + e * G + d * H, y)

    def commit(self, stage: StagePair, G_train, H_train, t: int, extra: dict | None = None):
        if stage.g is None:
            self.F += stage.delta * H_train
        elif stage.h is None:
            self.F += stage.eps * G_train
        else:
            self.F += stage.eps * G_train + stage.delta * H_train
        self.model.stages.append(stage)
        val = None
        if self.valid is not None:
            self.Fv += stage.contribution(self.valid.xu, self.valid.xs)
            preds = classify_batch(self.Fv, self.valid.num_classes)
            val = score(preds, self.valid.y, self.valid.num_classes, self.model.metric)
            if val > self.best_val:
                self.best_val = val
                self.model.best_iteration = t + 1
        else:
            self.model.best_iteration = t + 1
        row = {
            "iter": t,
            "risk": mcloss.total_risk(self.F, self.train.y),
            "eps": stage.eps,
            "delta": stage.delta,
            "seconds": time.perf_counter() - self.t0,
            "val_metric": val,
        }
        if extra:
            row.update(extra)
        self.model.history.append(row)


def train_2wl(train: Dataset, valid: Dataset | None, n_iter: int,
              mlp_config: MlpConfig = MlpConfig(), tree_config: TreeConfig = TreeConfig(),
              step_config: StepConfig = StepConfig(), mode: str = "both", seed: int = 0,
              metric: str = "f1") -> TwoWlModel:
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    if n_iter < 0:
        raise ConfigError("n_iter must be >= 0")
    model = TwoWlModel(train.num_classes, mode, "2wl", metric=metric, dim_u=train.dim_u, dim_s=train.dim_s)
    run = BoostingRun(train, valid, model)
    use_g, use_s = mode != "only_s", mode != "only_g"
    for t in range(n_iter):
        w = run.residuals()
        g = run.fit_g(w, mlp_config, derive_seed(seed, t, 0, G_STREAM), t) if use_g else None
        h = run.fit_h(w, tree_config) if use_s else None
        G = None if g is None else g.predict(train.xu)
        H = None if h is None else h.predict(train.xs)
        step = search_steps(run.risk_function(G, H),
                            replace(step_config, seed=derive_seed(seed, t, 0, STEP_STREAM)),
                            active=(use_g, use_s))
        run.commit(StagePair(g, h, step.eps, step.delta), G, H, t)
    return model


def train_gd_mcboost(train: Dataset, n_iter: int, tree_config: TreeConfig = TreeConfig(),
                     step_config: StepConfig = StepConfig(), seed: int = 0):
    """Single-learner multi-class gradient boosting with trees on the structured modality.

    Returns the list of (tree, step) pairs and the final training scores.
    """
    codebook = train.codebook
    F = np.zeros((train.n, train.num_classes))
    stages = []
    for t in range(n_iter):
        w = mcloss.compute_w(F, train.y, codebook)
        tree = fit_tree(train.xs, w, tree_config.max_depth, tree_config.min_samples_leaf)
        H = tree.predict(train.xs)
        cfg = replace(step_config, seed=derive_seed(seed, t, 0, STEP_STREAM))
        result = search_steps(lambda e, d: mcloss.total_risk(F + d * H, train.y), cfg, active=(False, True))
        F += result.delta * H
        stages.append((tree, result.delta))
    return stages, F


def decision_function(model: TwoWlModel, xu, xs, n_stages: int | None = None) -> np.ndarray:
    xu = np.asarray(xu, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if xu.ndim != 2 or xs.ndim != 2 or len(xu) != len(xs):
        raise DimensionError(f"inputs {xu.shape} and {xs.shape} are not aligned 2-D arrays")
    if model.dim_u is not None and (xu.shape[1] != model.dim_u or xs.shape[1] != model.dim_s):
        raise DimensionError(
            f"model expects dims ({model.dim_u}, {model.dim_s}), got ({xu.shape[1]}, {xs.shape[1]})"
        )
    F = np.zeros((len(xu), model.num_classes))
    stages = model.stages if n_stages is None else model.stages[:n_stages]
    for stage in stages:
        F += stage.contribution(xu, xs)
    return F


def predict_2wl(model: TwoWlModel, data, use_best: bool = False) -> np.ndarray:
    """Class predictions for a Dataset or an (xu, xs) pair."""
    xu, xs = (data.xu, data.xs) if isinstance(data, Dataset) else data
    n_stages = model.best_iteration if use_best else None
    return classify_batch(decision_function(model, xu, xs, n_stages), model.num_classes)


def write_history_csv(path, history: list, fields=HISTORY_FIELDS):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in history:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in fields})
