from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slicecause.contention import (ContentionParams, contention_at_tick, contention_matrix,
                                   contention_over_window, contention_series, sigmoid)
from slicecause.errors import ValidationError
from slicecause.telemetry import TelemetryWindow

W = (0.45, 0.31, 0.24)


def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(1.0) == pytest.approx(0.7310586, abs=1e-7)
    assert sigmoid(3.3) + sigmoid(-3.3) == pytest.approx(1.0, abs=1e-15)
    assert sigmoid(-800.0) >= 0.0 and sigmoid(800.0) == 1.0


def test_zero_allocation_gate():
    params = ContentionParams(W, (0.5, 0.5, 0.5))
    assert contention_at_tick((0, 0, 0), (1, 1, 1), (1, 1, 1), params) == 0.0


def test_unit_allocation_example():
    params = ContentionParams(W, (0.0, 0.0, 0.0))
    assert contention_at_tick((1, 1, 1), (1, 1, 1), (1, 1, 1), params) == pytest.approx(0.7310586, abs=1e-7)


def test_low_stress_example():
    params = ContentionParams(W, (1.0, 1.0, 1.0), sigmoid_slope=1.5)
    # slope * (U - tau) = -6 everywhere
    val = contention_at_tick((1, 1, 1), (1, 1, 1), (-3.0, -3.0, -3.0), params)
    assert val == pytest.approx(0.00247, abs=1e-5)


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        contention_at_tick((1, 1), (1, 1, 1), (1, 1, 1), ContentionParams(W, (0.5,) * 3))


def test_params_validation():
    with pytest.raises(ValidationError):
        ContentionParams((-0.1, 0.5), (0.5, 0.5))
    with pytest.raises(ValidationError):
        ContentionParams((0.1, 0.5), (0.5, 1.5))


def _window(alloc, util):
    alloc = np.asarray(alloc, float)
    n, k, t = alloc.shape
    return TelemetryWindow(np.random.default_rng(0).normal(size=(n, t)), alloc, util)


def test_constant_window_equals_tick_value():
    alloc = np.tile(np.array([[0.3, 0.6], [0.8, 0.2]])[:, :, None], (1, 1, 10))
    util = np.tile(np.array([[0.7], [0.4]]), (1, 10))
    params = ContentionParams((0.6, 0.4), (0.5, 0.5))
    w = _window(alloc, util)
    tick = contention_at_tick(alloc[0, :, 0], alloc[1, :, 0], util[:, 0], params)
    assert contention_over_window(w, 0, 1, params) == pytest.approx(tick, rel=1e-14)


def test_two_tick_mean():
    # per-tick values 0.2 and 0.4 through a single resource with weight 1 and a saturated gate
    params = ContentionParams((1.0,), (0.0,), sigmoid_slope=1000.0)
    alloc = np.array([[[0.2, 0.4]], [[1.0, 1.0]]])
    w = _window(alloc, np.array([[1.0, 1.0]]))
    np.testing.assert_allclose(contention_series(w, 0, 1, params), [0.2, 0.4])
    assert contention_over_window(w, 0, 1, params) == pytest.approx(0.3)


def test_zero_allocation_window():
    rng = np.random.default_rng(2)
    alloc = rng.uniform(0, 1, (3, 2, 20))
    alloc[1] = 0.0
    w = _window(alloc, rng.uniform(0, 1, (2, 20)))
    assert contention_over_window(w, 1, 2, ContentionParams((0.5, 0.5), (0.5, 0.5))) == 0.0


@given(st.integers(0, 10_000), st.floats(0.1, 20))
def test_matrix_matches_tick_loop_and_is_symmetric(seed, slope):
    rng = np.random.default_rng(seed)
    n, k, t = 4, 3, 15
    alloc = rng.uniform(0, 1, (n, k, t))
    util = rng.uniform(0, 1, (k, t))
    w = rng.uniform(0, 1, k)
    params = ContentionParams(tuple(w), tuple(rng.uniform(0, 1, k)), slope)
    win = _window(alloc, util)
    M = contention_matrix(win, params)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            loop = np.mean([contention_at_tick(alloc[i, :, s], alloc[j, :, s], util[:, s], params)
                            for s in range(t)])
            assert M[i, j] == pytest.approx(loop, rel=1e-12, abs=1e-15)
            assert M[i, j] == M[j, i]
            assert M[i, j] <= w.sum() + 1e-12


@given(st.integers(0, 10_000), st.integers(0, 2), st.floats(0, 0.5))
def test_monotone_in_allocation_and_utilisation(seed, r, bump):
    rng = np.random.default_rng(seed)
    a_i, a_j, u = rng.uniform(0, 0.5, 3), rng.uniform(0, 1, 3), rng.uniform(0, 0.5, 3)
    params = ContentionParams(W, tuple(rng.uniform(0, 1, 3)))
    base = contention_at_tick(a_i, a_j, u, params)
    a2, u2 = a_i.copy(), u.copy()
    a2[r] += bump
    u2[r] += bump
    assert contention_at_tick(a2, a_j, u, params) >= base - 1e-15
    assert contention_at_tick(a_i, a_j, u2, params) >= base - 1e-15
    assert contention_at_tick(a_j, a_i, u, params) == base
