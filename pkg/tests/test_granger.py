from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slicecause.errors import ValidationError
from slicecause.granger import build_designs, enhanced_granger_test, f_statistic, pairwise_granger
from slicecause.telemetry import ModelConfig

from conftest import make_window


def test_design_hand_example():
    (xu, yu), (xr, yr) = build_designs([1, 2, 3, 4], [10, 20, 30, 40], np.zeros((0, 4)), 1, 1)
    np.testing.assert_array_equal(xu, [[1, 10], [2, 20], [3, 30]])
    np.testing.assert_array_equal(yu, [2, 3, 4])
    np.testing.assert_array_equal(xr, [[1], [2], [3]])


def test_design_rejects_zero_lag():
    with pytest.raises(ValidationError):
        build_designs(np.arange(10.0), np.arange(10.0), np.zeros((0, 10)), 1, 0)


def test_design_conditioning_columns():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(2, 50))
    (xu0, _), (xr0, _) = build_designs(rng.normal(size=50), rng.normal(size=50), np.zeros((0, 50)), 3, 4)
    (xu2, _), (xr2, _) = build_designs(rng.normal(size=50), rng.normal(size=50), z, 3, 4)
    assert xu2.shape[1] - xu0.shape[1] == 2
    assert xr2.shape[1] - xr0.shape[1] == 2
    assert xu0.shape == (46, 7)


def test_f_statistic_arithmetic():
    assert f_statistic(12.0, 10.0, 2, 20) == pytest.approx(2.0)


def test_null_mean_f_matches_theory():
    rng = np.random.default_rng(123)
    cfg = ModelConfig(p=5, q=5)
    fs = []
    for _ in range(1000):
        w = make_window(rng.normal(size=(2, 300)), k=1, util=rng.uniform(0, 1, (1, 300)))
        fs.append(enhanced_granger_test(w, 0, 1, cfg).f_stat)
    d2 = 300 - 5 - 5 - 5 - 1 - 1
    assert abs(np.mean(fs) / (d2 / (d2 - 2)) - 1) < 0.05


def test_planted_lag_one_is_detected():
    rng = np.random.default_rng(1)
    x = rng.normal(size=300)
    y = np.zeros(300)
    y[1:] = 0.9 * x[:-1]
    y += 0.05 * rng.normal(size=300)
    res = enhanced_granger_test(make_window(np.vstack([x, y])), 0, 1, ModelConfig())
    assert res.p_value < 1e-6
    assert res.lag_estimate == 1


def test_confounder_is_suppressed_by_conditioning():
    rng = np.random.default_rng(5)
    rej_c = rej_u = 0
    trials = 200
    for _ in range(trials):
        u = np.zeros(300)
        e = rng.normal(size=300)
        for t in range(1, 300):
            u[t] = 0.8 * u[t - 1] + e[t]
        x = 2.0 * u + rng.normal(size=300)
        y = 2.0 * u + rng.normal(size=300)
        util = (u - u.min()) / (u.max() - u.min())
        w = make_window(np.vstack([x, y]), util=util[None, :])
        rej_c += enhanced_granger_test(w, 0, 1, ModelConfig()).p_value < 0.05
        rej_u += enhanced_granger_test(w, 0, 1, ModelConfig(conditioned=False)).p_value < 0.05
    assert rej_c / trials <= 0.08
    assert rej_u >= 3 * max(rej_c, 1)


def test_constant_signal_convention():
    rng = np.random.default_rng(0)
    raw = np.vstack([np.full(100, 4.0), rng.normal(size=100)])
    w = make_window(raw)
    res = enhanced_granger_test(w, 0, 1, ModelConfig(window_ticks=100))
    assert (res.f_stat, res.p_value, res.degenerate) == (0.0, 1.0, True)


def test_self_pair_rejected():
    w = make_window(np.random.default_rng(0).normal(size=(2, 50)))
    with pytest.raises(ValidationError):
        enhanced_granger_test(w, 1, 1, ModelConfig(window_ticks=50))


def test_pairwise_matches_single_tests():
    rng = np.random.default_rng(9)
    w = make_window(rng.normal(size=(4, 120)), k=2, util=rng.uniform(0, 1, (2, 120)))
    cfg = ModelConfig(p=3, q=4, window_ticks=120)
    allp = pairwise_granger(w, cfg)
    assert len(allp) == 12
    for (i, j), r in allp.items():
        single = enhanced_granger_test(w, i, j, cfg)
        assert r.f_stat == single.f_stat and r.p_value == single.p_value


@given(st.integers(0, 10_000), st.floats(0.01, 100))
def test_nesting_scale_invariance_and_bounds(seed, scale):
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(2, 80))
    util = rng.uniform(0, 1, (1, 80))
    cfg = ModelConfig(p=2, q=3, window_ticks=80)
    a = enhanced_granger_test(make_window(raw, util=util), 0, 1, cfg)
    b = enhanced_granger_test(make_window(raw * np.array([[1.0], [scale]]), util=util), 0, 1, cfg)
    assert a.restricted.rss >= a.unrestricted.rss * (1 - 1e-12)
    assert a.f_stat >= 0 and 0 <= a.p_value <= 1
    assert b.f_stat == pytest.approx(a.f_stat, rel=1e-8, abs=1e-10)
    assert a.d2 == a.n_eff - 2 - 3 - 1 - 1
