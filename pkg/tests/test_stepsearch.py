import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualboost.core import ConfigError
from dualboost.stepsearch import StepConfig, search_steps


def bowl(e0, d0):
    return lambda e, d: (e - e0) ** 2 + 2 * (d - d0) ** 2 + 1.0


class TestModes:
    def test_fixed_returns_configured_steps(self):
        calls = []
        res = search_steps(lambda e, d: calls.append((e, d)) or 5.0, StepConfig(mode="fixed", eps=0.1, delta=0.3))
        assert (res.eps, res.delta) == (0.1, 0.3)
        assert calls == [(0.1, 0.3)] and res.risk_at_optimum == 5.0

    def test_grid_finds_lattice_minimum(self):
        res = search_steps(bowl(0.3, 0.6), StepConfig(mode="grid", grid=11))
        assert res.eps == pytest.approx(0.3) and res.delta == pytest.approx(0.6)
        assert res.evaluations == 121

    def test_adaptive_gets_close(self):
        results = [search_steps(bowl(0.37, 0.52), StepConfig(seed=s)) for s in range(10)]
        assert all(r.evaluations == 2 + 10 + 20 for r in results)
        assert all(r.risk_at_optimum < 1.05 for r in results)
        dist = [np.hypot(r.eps - 0.37, r.delta - 0.52) for r in results]
        assert np.median(dist) < 0.05

    def test_adaptive_deterministic(self):
        a = search_steps(bowl(0.2, 0.9), StepConfig(seed=9))
        b = search_steps(bowl(0.2, 0.9), StepConfig(seed=9))
        assert a == b

    def test_inactive_axis_pinned(self):
        seen = []

        def f(e, d):
            seen.append(e)
            return (d - 0.4) ** 2

        res = search_steps(f, StepConfig(), active=(False, True))
        assert res.eps == 0.0 and set(seen) == {0.0}
        assert abs(res.delta - 0.4) < 0.1
        with pytest.raises(ConfigError):
            search_steps(f, StepConfig(), active=(False, False))

    def test_non_finite_candidates_discarded(self):
        def f(e, d):
            return math.inf if e + d > 0.05 else 1.0 - e - d

        res = search_steps(f, StepConfig(mode="grid", grid=41))
        assert math.isfinite(res.risk_at_optimum)
        assert res.eps + res.delta <= 0.05 + 1e-12

    def test_all_non_finite_stands_still(self):
        res = search_steps(lambda e, d: math.nan, StepConfig())
        assert (res.eps, res.delta) == (0.0, 0.0) and res.risk_at_optimum == math.inf

    def test_ties_keep_first(self):
        res = search_steps(lambda e, d: 1.0, StepConfig(mode="grid", grid=3))
        assert (res.eps, res.delta) == (0.0, 0.0)

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            StepConfig(mode="bayes")
        with pytest.raises(ConfigError):
            StepConfig(eps_max=-1)
        with pytest.raises(ConfigError):
            StepConfig(mode="grid", grid=1)


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.floats(-1, 2), st.floats(-1, 2), st.integers(0, 1000),
           st.sampled_from(["grid", "adaptive_random"]))
    def test_never_worse_than_origin_and_inside_box(self, e0, d0, seed, mode):
        f = bowl(e0, d0)
        res = search_steps(f, StepConfig(mode=mode, seed=seed, eps_max=1.0, delta_max=0.5))
        assert 0.0 <= res.eps <= 1.0 and 0.0 <= res.delta <= 0.5
        assert res.risk_at_optimum <= f(0.0, 0.0)
        assert res.risk_at_optimum == f(res.eps, res.delta)
