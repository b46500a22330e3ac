"""Train, evaluate and compare the model roster on one dataset."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import gbm as gbm_mod
from ..boost2wl import HISTORY_FIELDS as BOOST_FIELDS
from ..boost2wl import TwoWlModel, predict_2wl, train_2wl
from ..boost2wl2o import HISTORY_FIELDS as BOOST2O_FIELDS
from ..boost2wl2o import TwoWl2oConfig, train_2wl2o
from ..core import ConfigError, Dataset, relative_improvement, score
from ..datasets import generate, load_csv, load_dataset, split_tabular, split_train_valid
from ..fusionnet import HISTORY_FIELDS as FUSION_FIELDS
from ..fusionnet import FusionModel, predict_fusion, train_fusion
from .config import ExperimentConfig

log = logging.getLogger(__name__)

GBM_FIELDS = ["stage", "train_loss"]


@dataclass
class ModelArtifact:
    kind: str
    model: object
    config: ExperimentConfig
    history: list = field(default_factory=list)

    @property
    def history_fields(self) -> list[str]:
        if self.kind in ("baseline", "bfvdnn"):
            return FUSION_FIELDS
        if self.kind == "gbm_only":
            return GBM_FIELDS
        if self.kind.startswith("2wl2o"):
            return BOOST2O_FIELDS
        return BOOST_FIELDS

    def predict(self, data: Dataset) -> np.ndarray:
        return predict_kind(self.kind, self.model, data)


def load_data(cfg: ExperimentConfig) -> tuple[Dataset, Dataset | None]:
    v = cfg.values
    if v["data.train"]:
        train = load_dataset(v["data.train"])
        valid = load_dataset(v["data.valid"]) if v["data.valid"] else None
        return train, valid
    if v["data.kind"] == "split_tabular":
        if not v["data.csv"]:
            raise ConfigError("data.kind=split_tabular needs data.csv")
        X, y, _ = load_csv(v["data.csv"])
        ds = split_tabular(X, y, importance_split=v["data.importance_split"].lower() == "true",
                           split_seed=int(v["data.seed"]))
        perm = np.random.default_rng(int(v["data.seed"])).permutation(ds.n)
        ds = ds.subset(perm)
        n_valid = int(round(float(v["data.valid_fraction"]) * ds.n))
        return split_train_valid(ds, ds.n - n_valid)
    return generate(cfg.gen_spec)


def train_kind(cfg: ExperimentConfig, train: Dataset, valid: Dataset | None) -> ModelArtifact:
    kind = cfg.kind
    if kind in ("baseline", "bfvdnn"):
        gbm = None
        if kind == "bfvdnn":
            gbm = fit_structured_gbm(cfg, train)
        model = train_fusion(train, valid, gbm, cfg.fusion)
        return ModelArtifact(kind, model, cfg, model.history)
    if kind == "gbm_only":
        model = fit_structured_gbm(cfg, train)
        hist = [{"stage": i, "train_loss": v} for i, v in enumerate(model.train_loss)]
        return ModelArtifact(kind, model, cfg, hist)
    if kind in ("2wl2o", "2wl2o_fix"):
        config = TwoWl2oConfig(
            n_outer=cfg.n_iter, n_inner=cfg.n_inner,
            eps0=float(cfg.get("boost.eps0")), delta0=float(cfg.get("boost.delta0")),
            mlp=cfg.mlp, tree=cfg.tree, step=cfg.step, seed=cfg.seed, metric=cfg.metric,
        )
        model = train_2wl2o(train, valid, config)
        return ModelArtifact(kind, model, cfg, model.history)
    mode = {"1wl_s": "only_s", "1wl_u": "only_g"}.get(kind, "both")
    model = train_2wl(train, valid, cfg.n_iter, cfg.mlp, cfg.tree, cfg.step, mode=mode,
                      seed=cfg.seed, metric=cfg.metric)
    return ModelArtifact(kind, model, cfg, model.history)


def fit_structured_gbm(cfg: ExperimentConfig, train: Dataset):
    p = cfg.gbm_params
    return gbm_mod.fit_gbm(train.xs, train.y, train.num_classes, p["n_stages"], p["learning_rate"],
                           p["max_depth"], p["min_samples_leaf"], seed=cfg.seed)


def predict_kind(kind: str, model, data: Dataset) -> np.ndarray:
    """Predictions of the selected model: best validation iteration/epoch when one was tracked."""
    if isinstance(model, FusionModel):
        return predict_fusion(model, data)
    if isinstance(model, TwoWlModel):
        return predict_2wl(model, data, use_best=True)
    return gbm_mod.predict(model, data.xs)


def evaluate(artifact: ModelArtifact, data: Dataset, metric: str | None = None) -> float:
    metric = metric or artifact.config.metric
    return score(artifact.predict(data), data.y, data.num_classes, metric)


@dataclass
class CompareRow:
    kind: str
    value: float
    rel_improvement: float
    values: list


def compare(cfg: ExperimentConfig, repeats: int | None = None, on_trained=None):
    """Train every roster entry, score it on the validation split.

    Returns (rows, artifacts). ``on_trained(kind, repeat, artifact)`` is called
    after each fit. Relative improvement is taken against ``compare.baseline``
    (or the first roster entry when that kind is not in the roster).
    """
    repeats = repeats or cfg.repeats
    train, valid = load_data(cfg)
    if valid is None or valid.n == 0:
        raise ConfigError("compare needs a validation split")
    roster = cfg.roster
    if not roster:
        raise ConfigError("compare.roster is empty")
    results, artifacts = {}, {}
    for kind in roster:
        values = []
        for r in range(repeats):
            kcfg = cfg.for_kind(kind)
            if r:
                kcfg = kcfg.with_values(seed=kcfg.seed + r)
            log.info("training %s (repeat %d)", kind, r)
            art = train_kind(kcfg, train, valid)
            values.append(evaluate(art, valid))
            if on_trained:
                on_trained(kind, r, art)
            if r == 0:
                artifacts[kind] = art
        results[kind] = values
    base_kind = cfg.get("compare.baseline")
    if base_kind not in results:
        base_kind = roster[0]
    base = float(np.mean(results[base_kind]))
    rows = []
    for kind in roster:
        value = float(np.mean(results[kind]))
        rows.append(CompareRow(kind, value, relative_improvement(value, base), results[kind]))
    return rows, artifacts


def format_table(rows: list[CompareRow], metric: str) -> str:
    lines = [f"| model | {metric} | % rel. improvement |", "|---|---|---|"]
    for row in rows:
        lines.append(f"| {row.kind} | {row.value:.4f} | {row.rel_improvement:.2f} |")
    return "\n".join(lines) + "\n"
