"""Flat ``section.key=value`` experiment configuration.

Lines are ``key = value``; ``#`` starts a comment. Keys are listed in
``DEFAULTS``; anything else is rejected. ``roster.<kind>.<key>=value`` lines
override a key for one roster entry of ``compare``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

from ..core import ConfigError
from ..datasets import GenSpec
from ..fusionnet import FusionConfig
from ..stepsearch import StepConfig
from ..weaklearners import MlpConfig, TreeConfig

MODEL_KINDS = ("baseline", "bfvdnn", "2wl", "2wl2o", "2wl_fix", "2wl2o_fix", "1wl_s", "1wl_u", "gbm_only")

DEFAULTS: dict[str, str] = {
    "model.kind": "2wl2o",
    "seed": "0",
    "metric": "f1",
    # data: generated from data.kind unless data.train is given
    "data.kind": "xor_bimodal",
    "data.train": "",
    "data.valid": "",
    "data.csv": "",
    "data.importance_split": "false",
    "data.valid_fraction": "0.2",
    "data.n_train": "1000",
    "data.n_valid": "200",
    "data.dim_u": "10",
    "data.dim_s": "10",
    "data.num_classes": "2",
    "data.noise_rate": "0.09",
    "data.seed": "0",
    "data.mu": "0.5",
    "data.class0_prior": "0.47",
    "data.side": "32",
    "data.s_sep": "1.0",
    "data.leakage": "0.7",
    "data.blob_noise": "0.5",
    # boosting loops
    "boost.n_iter": "30",
    "boost.n_inner": "1",
    "boost.eps0": "0.1",
    "boost.delta0": "0.1",
    "tree.max_depth": "3",
    "tree.min_samples_leaf": "1",
    "mlp.hidden": "32",
    "mlp.optimizer": "rmsprop",
    "mlp.lr": "0.001",
    "mlp.epochs": "5",
    "mlp.batch_size": "128",
    "mlp.warm_start": "false",
    "step.mode": "adaptive_random",
    "step.eps": "0.1",
    "step.delta": "0.1",
    "step.explore": "10",
    "step.refine": "20",
    "step.bound": "1.0",
    "step.grid": "21",
    "step.sigma": "0.25",
    # GBM feeding the BFV network (and gbm_only)
    "gbm.n_stages": "50",
    "gbm.learning_rate": "0.1",
    "gbm.max_depth": "3",
    "gbm.min_samples_leaf": "1",
    "fusion.fusion": "concat",
    "fusion.branch1": "32",
    "fusion.branch2": "32",
    "fusion.head": "16",
    "fusion.optimizer": "rmsprop",
    "fusion.lr": "0.001",
    "fusion.epochs": "30",
    "fusion.batch_size": "64",
    "fusion.standardize": "true",
    # compare
    "compare.roster": "baseline,1wl_s,1wl_u,2wl,2wl2o,bfvdnn",
    "compare.baseline": "baseline",
    "compare.repeats": "1",
}


def parse_flat(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _ints(v: str) -> tuple:
    return tuple(int(p) for p in v.split(",") if p.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated view over a flat key map; ``values`` holds every key with defaults filled in."""

    values: dict
    overrides: dict

    @classmethod
    def from_flat(cls, flat: dict[str, str]) -> "ExperimentConfig":
        values, overrides = dict(DEFAULTS), {}
        for key, value in flat.items():
            if key.startswith("roster."):
                parts = key.split(".", 2)
                if len(parts) != 3 or parts[1] not in MODEL_KINDS or parts[2] not in DEFAULTS:
                    raise ConfigError(f"bad roster override {key!r}")
                overrides.setdefault(parts[1], {})[parts[2]] = value
            elif key in DEFAULTS:
                values[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        cfg = cls(values, overrides)
        cfg.validate()
        return cfg

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        return cls.from_flat(parse_flat(text, source))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read(), str(path))

    def for_kind(self, kind: str) -> "ExperimentConfig":
        """This config with ``model.kind`` set and roster overrides for ``kind`` applied."""
        values = dict(self.values)
        values.update(self.overrides.get(kind, {}))
        values["model.kind"] = kind
        cfg = ExperimentConfig(values, {})
        cfg.validate()
        return cfg

    def with_values(self, **kv) -> "ExperimentConfig":
        values = dict(self.values)
        values.update({k.replace("__", "."): str(v) for k, v in kv.items()})
        cfg = ExperimentConfig(values, self.overrides)
        cfg.validate()
        return cfg

    def validate(self):
        try:
            if self.kind not in MODEL_KINDS:
                raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {self.kind!r}")
            if self.metric not in ("f1", "accuracy"):
                raise ConfigError(f"metric must be f1 or accuracy, got {self.metric!r}")
            for k in self.roster:
                if k not in MODEL_KINDS:
                    raise ConfigError(f"unknown roster entry {k!r}")
            self.gen_spec, self.mlp, self.tree, self.step, self.fusion, self.gbm_params  # noqa: B018
            self.n_iter, self.n_inner, self.seed, self.repeats  # noqa: B018
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid config value: {exc}") from exc

    # -- typed accessors -------------------------------------------------

    def get(self, key: str) -> str:
        return self.values[key]

    @property
    def kind(self) -> str:
        return self.values["model.kind"]

    @property
    def metric(self) -> str:
        return self.values["metric"]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    @property
    def n_iter(self) -> int:
        return int(self.values["boost.n_iter"])

    @property
    def n_inner(self) -> int:
        return int(self.values["boost.n_inner"])

    @property
    def repeats(self) -> int:
        r = int(self.values["compare.repeats"])
        if r < 1:
            raise ConfigError("compare.repeats must be >= 1")
        return r

    @property
    def roster(self) -> list[str]:
        return [k.strip() for k in self.values["compare.roster"].split(",") if k.strip()]

    @property
    def gen_spec(self) -> GenSpec:
        v = self.values
        return GenSpec(
            kind=v["data.kind"],
            n_train=int(v["data.n_train"]),
            n_valid=int(v["data.n_valid"]),
            dim_u=int(v["data.dim_u"]),
            dim_s=int(v["data.dim_s"]),
            num_classes=int(v["data.num_classes"]),
            noise_rate=float(v["data.noise_rate"]),
            seed=int(v["data.seed"]),
            mu=float(v["data.mu"]),
            class0_prior=float(v["data.class0_prior"]),
            side=int(v["data.side"]),
            s_sep=float(v["data.s_sep"]),
            leakage=float(v["data.leakage"]),
            blob_noise=float(v["data.blob_noise"]),
        )

    @property
    def mlp(self) -> MlpConfig:
        v = self.values
        return MlpConfig(
            hidden=_ints(v["mlp.hidden"]),
            optimizer=v["mlp.optimizer"],
            lr=float(v["mlp.lr"]),
            epochs=int(v["mlp.epochs"]),
            batch_size=int(v["mlp.batch_size"]),
            warm_start=_bool(v["mlp.warm_start"]),
        )

    @property
    def tree(self) -> TreeConfig:
        return TreeConfig(int(self.values["tree.max_depth"]), int(self.values["tree.min_samples_leaf"]))

    @property
    def step(self) -> StepConfig:
        v = self.values
        bound = float(v["step.bound"])
        cfg = StepConfig(
            mode=v["step.mode"],
            eps=float(v["step.eps"]),
            delta=float(v["step.delta"]),
            eps_max=bound,
            delta_max=bound,
            explore=int(v["step.explore"]),
            refine=int(v["step.refine"]),
            grid=int(v["step.grid"]),
            sigma=float(v["step.sigma"]),
        )
        if self.kind.endswith("_fix"):
            cfg = replace(cfg, mode="fixed")
        return cfg

    @property
    def gbm_params(self) -> dict:
        v = self.values
        return {
            "n_stages": int(v["gbm.n_stages"]),
            "learning_rate": float(v["gbm.learning_rate"]),
            "max_depth": int(v["gbm.max_depth"]),
            "min_samples_leaf": int(v["gbm.min_samples_leaf"]),
        }

    @property
    def fusion(self) -> FusionConfig:
        v = self.values
        return FusionConfig(
            variant="bfv" if self.kind == "bfvdnn" else "baseline",
            fusion=v["fusion.fusion"],
            branch1=_ints(v["fusion.branch1"]),
            branch2=_ints(v["fusion.branch2"]),
            head=_ints(v["fusion.head"]),
            optimizer=v["fusion.optimizer"],
            lr=float(v["fusion.lr"]),
            epochs=int(v["fusion.epochs"]),
            batch_size=int(v["fusion.batch_size"]),
            standardize=_bool(v["fusion.standardize"]),
            seed=self.seed,
            metric=self.metric,
        )

    # -- echo --------------------------------------------------------------

    def to_flat(self) -> dict[str, str]:
        flat = dict(sorted(self.values.items()))
        for kind, kv in sorted(self.overrides.items()):
            for k, v in sorted(kv.items()):
                flat[f"roster.{kind}.{k}"] = v
        return flat

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.to_flat().items())

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()
