"""Search for the step pair (eps, delta) that minimises the true training risk."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .core import ConfigError

log = logging.getLogger(__name__)

MODES = ("fixed", "grid", "adaptive_random")
ANCHORS = ((0.0, 0.0), (0.1, 0.1))


@dataclass(frozen=True)
class StepConfig:
    mode: str = "adaptive_random"
    eps: float = 0.1
    delta: float = 0.1
    eps_max: float = 1.0
    delta_max: float = 1.0
    explore: int = 10
    refine: int = 20
    grid: int = 21
    sigma: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"step mode must be one of {MODES}, got {self.mode!r}")
        if self.eps_max < 0 or self.delta_max < 0:
            raise ConfigError("step bounds must be nonnegative")
        if self.mode == "adaptive_random" and (self.explore < 1 or self.refine < 1):
            raise ConfigError("adaptive search needs explore >= 1 and refine >= 1")
        if self.mode == "grid" and self.grid < 2:
            raise ConfigError("grid search needs at least 2 points per axis")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StepResult:
    eps: float
    delta: float
    risk_at_optimum: float
    evaluations: int


class _Tracker:
    """Keeps the first candidate reaching the lowest finite risk."""

    def __init__(self, risk_eval, eps_on, delta_on):
        self.risk_eval = risk_eval
        self.eps_on = eps_on
        self.delta_on = delta_on
        self.best = None
        self.count = 0

    def __call__(self, eps: float, delta: float) -> bool:
        eps = float(eps) if self.eps_on else 0.0
        delta = float(delta) if self.delta_on else 0.0
        r = float(self.risk_eval(eps, delta))
        self.count += 1
        if not math.isfinite(r):
            log.warning("discarding step candidate (%g, %g): risk %r", eps, delta, r)
            return False
        if self.best is None or r < self.best[2]:
            self.best = (eps, delta, r)
            return True
        return False


def search_steps(risk_eval: Callable[[float, float], float], config: StepConfig,
                 active: tuple[bool, bool] = (True, True)) -> StepResult:
    """Minimise ``risk_eval`` over the box [0, eps_max] x [0, delta_max].

    ``active`` switches an axis off; its step is then pinned to 0 and the
    search runs over the remaining axis only.
    """
    eps_on, delta_on = active
    if not (eps_on or delta_on):
        raise ConfigError("at least one step axis must be active")
    track = _Tracker(risk_eval, eps_on, delta_on)
    hi_e = config.eps_max if eps_on else 0.0
    hi_d = config.delta_max if delta_on else 0.0

    if config.mode == "fixed":
        track(config.eps, config.delta)
        eps = config.eps if eps_on else 0.0
        delta = config.delta if delta_on else 0.0
        risk = track.best[2] if track.best else math.inf
        return StepResult(eps, delta, risk, track.count)

    if config.mode == "grid":
        e_axis = np.linspace(0.0, hi_e, config.grid) if eps_on else [0.0]
        d_axis = np.linspace(0.0, hi_d, config.grid) if delta_on else [0.0]
        for e in e_axis:
            for d in d_axis:
                track(e, d)
    else:
        _adaptive(track, config, hi_e, hi_d)

    if track.best is None:
        # every candidate was non-finite; standing still is always admissible
        return StepResult(0.0, 0.0, math.inf, track.count)
    eps, delta, risk = track.best
    return StepResult(eps, delta, risk, track.count)


def _adaptive(track: _Tracker, config: StepConfig, hi_e: float, hi_d: float):
    rng = np.random.default_rng(config.seed)
    for e, d in ANCHORS:
        track(min(e, hi_e), min(d, hi_d))
    for _ in range(config.explore):
        e, d = rng.uniform(0.0, 1.0, size=2)
        track(e * hi_e, d * hi_d)
    sigma = config.sigma
    for _ in range(config.refine):
        e0, d0, _ = track.best if track.best else (0.0, 0.0, None)
        step = rng.normal(0.0, sigma, size=2)
        e = float(np.clip(e0 + step[0] * hi_e, 0.0, hi_e))
        d = float(np.clip(d0 + step[1] * hi_d, 0.0, hi_d))
        if not track(e, d):
            sigma *= 0.5
