"""Second-order two-learner boosting.

Each outer iteration freezes w and w~ at the current scores and runs an inner
loop that alternates between fitting (g, h) to step-dependent targets and
re-searching the steps against the true risk. The inner candidate with the
lowest risk becomes the stage.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import mcloss
from .boost2wl import G_STREAM, STEP_STREAM, BoostingRun, StagePair, TwoWlModel, derive_seed
from .core import ConfigError, Dataset
from .mcloss import PseudoResiduals
from .stepsearch import StepConfig, search_steps
from .weaklearners import MlpConfig, TreeConfig

HISTORY_FIELDS = ["iter", "inner_j", "risk", "eps", "delta", "seconds", "val_metric"]


@dataclass(frozen=True)
class TwoWl2oConfig:
    n_outer: int = 10
    n_inner: int = 1
    eps0: float = 0.1
    delta0: float = 0.1
    mlp: MlpConfig = MlpConfig()
    tree: TreeConfig = TreeConfig()
    step: StepConfig = StepConfig()
    seed: int = 0
    metric: str = "f1"

    def __post_init__(self):
        if self.n_outer < 0 or self.n_inner < 1:
            raise ConfigError("need n_outer >= 0 and n_inner >= 1")
        if not (0 <= self.eps0 <= self.step.eps_max and 0 <= self.delta0 <= self.step.delta_max):
            raise ConfigError("initial steps must lie inside the step bounds")


def second_order_targets(residuals: PseudoResiduals, eps: float, delta: float, family: str) -> np.ndarray:
    """Regression targets for g (``family="g"``) or h (``family="h"``).

    g: eps w - eps^2/4 w~ - eps delta/2 w;  h: the same with eps and delta swapped
    in the first two terms.
    """
    w, wt = residuals.w, residuals.w_tilde
    if family == "g":
        own = eps
    elif family == "h":
        own = delta
    else:
        raise ConfigError(f"family must be 'g' or 'h', got {family!r}")
    return own * w - (own**2 / 4.0) * wt - (eps * delta / 2.0) * w


def train_2wl2o(train: Dataset, valid: Dataset | None, config: TwoWl2oConfig = TwoWl2oConfig()) -> TwoWlModel:
    model = TwoWlModel(train.num_classes, "both", "2wl2o", metric=config.metric,
                       dim_u=train.dim_u, dim_s=train.dim_s)
    run = BoostingRun(train, valid, model)
    for t in range(config.n_outer):
        res = run.residuals(second_order=True)
        eps_j, delta_j = config.eps0, config.delta0
        candidates = []
        for j in range(config.n_inner):
            g = run.fit_g(second_order_targets(res, eps_j, delta_j, "g"), config.mlp,
                          derive_seed(config.seed, t, j, G_STREAM), t)
            h = run.fit_h(second_order_targets(res, eps_j, delta_j, "h"), config.tree)
            G, H = g.predict(train.xu), h.predict(train.xs)
            step = search_steps(run.risk_function(G, H),
                                replace(config.step, seed=derive_seed(config.seed, t, j, STEP_STREAM)))
            eps_j, delta_j = step.eps, step.delta
            r_j = mcloss.total_risk(run.F + eps_j * G + delta_j * H, train.y)
            candidates.append((r_j, g, h, G, H, eps_j, delta_j))
        j_star = min(range(len(candidates)), key=lambda j: candidates[j][0])
        _, g, h, G, H, eps, delta = candidates[j_star]
        run.commit(StagePair(g, h, eps, delta), G, H, t,
                   extra={"inner_j": j_star, "inner_risks": [c[0] for c in candidates]})
    return model
