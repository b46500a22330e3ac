"""Two-branch joint networks over both modalities.

Branch 1 embeds the unstructured features. Branch 2 embeds either the raw
structured features (``variant="baseline"``) or their boosted-feature vectors
from a fitted GBM (``variant="bfv"``). The embeddings are fused by
concatenation or element-wise product and a head network maps the result to
M logits, trained with softmax cross-entropy.
"""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import log_softmax, softmax

from .core import ConfigError, Dataset, DimensionError, StateError, TrainingDivergedError, classify_batch, score
from .gbm import GbmModel, bfv_matrix
from .serialization import decode_array, encode_array
from .weaklearners import DenseStack, Optimizer

HISTORY_FIELDS = ["epoch", "train_loss", "val_metric", "seconds"]


@dataclass(frozen=True)
class FusionConfig:
    variant: str = "baseline"
    fusion: str = "concat"
    branch1: tuple = (32,)
    branch2: tuple = (32,)
    head: tuple = (16,)
    optimizer: str = "rmsprop"
    lr: float = 1e-3
    epochs: int = 30
    batch_size: int = 64
    standardize: bool = True
    seed: int = 0
    metric: str = "f1"

    def __post_init__(self):
        if self.variant not in ("baseline", "bfv"):
            raise ConfigError(f"variant must be 'baseline' or 'bfv', got {self.variant!r}")
        if self.fusion not in ("concat", "product"):
            raise ConfigError(f"fusion must be 'concat' or 'product', got {self.fusion!r}")
        if not self.branch1 or not self.branch2:
            raise ConfigError("each branch needs at least one layer")
        if self.fusion == "product" and self.branch1[-1] != self.branch2[-1]:
            raise ConfigError(
                f"product fusion needs equal branch widths, got {self.branch1[-1]} and {self.branch2[-1]}"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("branch1", "branch2", "head"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FusionConfig":
        d = dict(d)
        for k in ("branch1", "branch2", "head"):
            d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class FusionModel:
    config: FusionConfig
    num_classes: int
    branch1: DenseStack
    branch2: DenseStack
    head: DenseStack
    mean2: np.ndarray | None = None
    scale2: np.ndarray | None = None
    gbm: GbmModel | None = None
    history: list = field(default_factory=list)
    best_epoch: int = -1

    @property
    def stacks(self):
        return (self.branch1, self.branch2, self.head)

    @property
    def params(self) -> list[np.ndarray]:
        return [p for s in self.stacks for p in s.params]

    def forward(self, xu, x2):
        a, c1 = self.branch1.forward(xu)
        b, c2 = self.branch2.forward(x2)
        z = np.concatenate([a, b], axis=1) if self.config.fusion == "concat" else a * b
        logits, c3 = self.head.forward(z)
        return logits, (a, b, c1, c2, c3)

    def loss_and_grads(self, xu, x2, y):
        """Mean cross-entropy and gradients for every parameter, in ``params`` order."""
        logits, (a, b, c1, c2, c3) = self.forward(xu, x2)
        n = len(y)
        loss = float(-np.mean(log_softmax(logits, axis=1)[np.arange(n), y]))
        d_logits = softmax(logits, axis=1)
        d_logits[np.arange(n), y] -= 1.0
        d_logits /= n
        g_head, dz = self.head.backward(c3, d_logits)
        if self.config.fusion == "concat":
            da, db = dz[:, : a.shape[1]], dz[:, a.shape[1]:]
        else:
            da, db = dz * b, dz * a
        g1, _ = self.branch1.backward(c1, da)
        g2, _ = self.branch2.backward(c2, db)
        return loss, g1 + g2 + g_head

    def branch2_input(self, xs, gbm: GbmModel | None = None) -> np.ndarray:
        if self.config.variant == "bfv":
            gbm = gbm if gbm is not None else self.gbm
            if gbm is None:
                raise StateError("the BFV variant needs its fitted GBM to build branch-2 inputs")
            x2 = bfv_matrix(gbm, xs)
        else:
            x2 = np.asarray(xs, dtype=float)
        if self.mean2 is not None:
            x2 = (x2 - self.mean2) / self.scale2
        return x2

    def predict_proba(self, xu, xs, gbm=None) -> np.ndarray:
        logits, _ = self.forward(np.asarray(xu, dtype=float), self.branch2_input(xs, gbm))
        return softmax(logits, axis=1)

    def to_dict(self) -> dict:
        def stack(s: DenseStack):
            return {
                "output_activation": s.output_activation,
                "weights": [encode_array(W) for W in s.weights],
                "biases": [encode_array(b) for b in s.biases],
            }

        return {
            "config": self.config.to_dict(),
            "num_classes": self.num_classes,
            "branch1": stack(self.branch1),
            "branch2": stack(self.branch2),
            "head": stack(self.head),
            "mean2": None if self.mean2 is None else encode_array(self.mean2),
            "scale2": None if self.scale2 is None else encode_array(self.scale2),
            "gbm": None if self.gbm is None else self.gbm.to_dict(),
            "best_epoch": self.best_epoch,
            "history": [{k: v for k, v in row.items() if k != "seconds"} for row in self.history],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FusionModel":
        def stack(rec):
            return DenseStack([decode_array(w) for w in rec["weights"]],
                              [decode_array(b) for b in rec["biases"]], rec["output_activation"])

        return cls(
            config=FusionConfig.from_dict(d["config"]),
            num_classes=d["num_classes"],
            branch1=stack(d["branch1"]),
            branch2=stack(d["branch2"]),
            head=stack(d["head"]),
            mean2=None if d["mean2"] is None else decode_array(d["mean2"]),
            scale2=None if d["scale2"] is None else decode_array(d["scale2"]),
            gbm=None if d["gbm"] is None else GbmModel.from_dict(d["gbm"]),
            best_epoch=d["best_epoch"],
            history=d["history"],
        )


def build_fusion(config: FusionConfig, dim_u: int, dim_2: int, num_classes: int,
                 rng: np.random.Generator) -> FusionModel:
    b1 = DenseStack.initialize([dim_u, *config.branch1], rng, output_activation="relu")
    b2 = DenseStack.initialize([dim_2, *config.branch2], rng, output_activation="relu")
    fused = config.branch1[-1] + config.branch2[-1] if config.fusion == "concat" else config.branch1[-1]
    head = DenseStack.initialize([fused, *config.head, num_classes], rng)
    return FusionModel(config, num_classes, b1, b2, head)


def train_fusion(train: Dataset, valid: Dataset | None, gbm: GbmModel | None,
                 config: FusionConfig = FusionConfig()) -> FusionModel:
    """End-to-end mini-batch training; keeps the weights of the best validation epoch."""
    if config.variant == "bfv" and gbm is None:
        raise StateError("the BFV variant needs a fitted GBM")
    rng = np.random.default_rng(config.seed)
    x2_raw = bfv_matrix(gbm, train.xs) if config.variant == "bfv" else train.xs
    model = build_fusion(config, train.dim_u, x2_raw.shape[1], train.num_classes, rng)
    if config.variant == "bfv":
        model.gbm = gbm
        if config.standardize:
            model.mean2 = x2_raw.mean(axis=0)
            std = x2_raw.std(axis=0)
            model.scale2 = np.where(std > 0, std, 1.0)
    x2 = model.branch2_input(train.xs)
    if valid is not None:
        if (valid.dim_u, valid.dim_s, valid.num_classes) != (train.dim_u, train.dim_s, train.num_classes):
            raise DimensionError("train and validation datasets disagree on classes or dimensions")
        x2_valid = model.branch2_input(valid.xs)

    opt = Optimizer(config.optimizer, config.lr)
    n = train.n
    bs = max(1, min(config.batch_size, n))
    best_val, best_params = -np.inf, None
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            loss, grads = model.loss_and_grads(train.xu[idx], x2[idx], train.y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"fusion loss became non-finite in epoch {epoch}", epoch=epoch)
            opt.step(model.params, grads)
            total += loss * len(idx)
        val = None
        if valid is not None:
            logits, _ = model.forward(valid.xu, x2_valid)
            val = score(classify_batch(logits, train.num_classes), valid.y, train.num_classes, config.metric)
            if val > best_val:
                best_val, best_params = val, [p.copy() for p in model.params]
                model.best_epoch = epoch
        model.history.append({"epoch": epoch, "train_loss": total / n, "val_metric": val,
                              "seconds": time.perf_counter() - t0})
    if best_params is not None:
        for p, best in zip(model.params, best_params):
            p[...] = best
    else:
        model.best_epoch = config.epochs - 1
    return model


def predict_fusion(model: FusionModel, data, gbm: GbmModel | None = None) -> np.ndarray:
    xu, xs = (data.xu, data.xs) if isinstance(data, Dataset) else data
    logits, _ = model.forward(np.asarray(xu, dtype=float), model.branch2_input(xs, gbm))
    return classify_batch(logits, model.num_classes)


def write_history_csv(path, history: list):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for row in history:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in HISTORY_FIELDS})
