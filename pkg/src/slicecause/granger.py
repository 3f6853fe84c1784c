"""Resource-conditioned Granger test for one ordered slice pair.

Unrestricted: Y_t on [Y lags 1..p | X lags 1..q | Z_{1..K,t}]
Restricted:   Y_t on [Y lags 1..p | Z_{1..K,t}]

No intercept column: signals are z-scored and the utilisation regressors are
standardised per window, so both models pass through the origin. Rows start
at ``max(p, q)``; the F denominator uses ``T_eff - p - q - K - 1`` with
``T_eff`` the number of regressed rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linreg import FitResult, f_tail, ols_fit
from .telemetry import ModelConfig, TelemetryWindow


@dataclass(frozen=True, eq=False)
class GrangerResult:
    f_stat: float
    p_value: float
    unrestricted: FitResult | None
    restricted: FitResult | None
    lag_estimate: int
    d1: int
    d2: int
    n_eff: int
    degenerate: bool = False


def lag_matrix(series: np.ndarray, lags: int, start: int) -> np.ndarray:
    """Columns ``series[t - 1], ..., series[t - lags]`` for ``t >= start``."""
    T = series.shape[0]
    return np.column_stack([series[start - i:T - i] for i in range(1, lags + 1)])


def build_designs(y, x, z, p: int, q: int):
    """Return ``((X_unrestricted, target), (X_restricted, target))``.

    ``z`` is a K x T array of contemporaneous regressors (K may be 0).
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float).reshape(-1, y.shape[0]) if np.size(z) else np.zeros((0, y.shape[0]))
    if p < 1:
        raise ValidationError(f"p must be >= 1, got {p}")
    if q < 1:
        raise ValidationError(f"q must be >= 1 (a zero-lag source carries no Granger evidence), got {q}")
    T = y.shape[0]
    if x.shape != (T,) or z.shape[1] != T:
        raise ValidationError("y, x and z must share the tick axis")
    K = z.shape[0]
    L = max(p, q)
    if T <= L + K + 1:
        raise ValidationError(f"series of length {T} too short for p={p}, q={q}, K={K}")
    target = y[L:]
    ylags = lag_matrix(y, p, L)
    xlags = lag_matrix(x, q, L)
    zc = z[:, L:].T
    unrestricted = np.hstack([ylags, xlags, zc])
    restricted = np.hstack([ylags, zc])
    return (unrestricted, target), (restricted, target)


def f_statistic(rss_r: float, rss_u: float, q: int, d2: int) -> float:
    diff = max(rss_r - rss_u, 0.0)
    if rss_u <= 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return (diff / q) / (rss_u / d2)


class _TargetContext:
    """Per-target pieces shared by every source: lags of Y, Z and the restricted fit."""

    def __init__(self, y: np.ndarray, z: np.ndarray, p: int, q: int):
        self.L = max(p, q)
        self.p, self.q = p, q
        self.target = y[self.L:]
        self.ylags = lag_matrix(y, p, self.L)
        self.zc = z[:, self.L:].T
        self.K = z.shape[0]
        self.degenerate = not np.any(y)
        self.restricted = None if self.degenerate else ols_fit(
            np.hstack([self.ylags, self.zc]), self.target)

    @property
    def n_eff(self) -> int:
        return self.target.shape[0]

    @property
    def d2(self) -> int:
        return self.n_eff - self.p - self.q - self.K - 1


def _active_regressors(window: TelemetryWindow, config: ModelConfig) -> np.ndarray:
    if not config.conditioned:
        return np.zeros((0, window.n_ticks))
    z = window.conditioning_regressors()
    # a constant utilisation row standardises to zeros and carries no information
    return z[np.any(z != 0.0, axis=1)]


def _test_with_context(ctx: _TargetContext, x: np.ndarray) -> GrangerResult:
    p, q, d2 = ctx.p, ctx.q, ctx.d2
    if d2 < 1:
        raise ValidationError(f"F denominator dof {d2} < 1; window too short")
    if ctx.degenerate or not np.any(x):
        return GrangerResult(0.0, 1.0, None, ctx.restricted, 1, q, d2, ctx.n_eff, True)
    xlags = lag_matrix(x, q, ctx.L)
    unrestricted = ols_fit(np.hstack([ctx.ylags, xlags, ctx.zc]), ctx.target)
    f = f_statistic(ctx.restricted.rss, unrestricted.rss, q, d2)
    beta = unrestricted.coefficients[p:p + q]
    lag = int(np.argmax(np.abs(beta))) + 1
    return GrangerResult(f, f_tail(f, q, d2), unrestricted, ctx.restricted,
                         lag, q, d2, ctx.n_eff)


def enhanced_granger_test(window: TelemetryWindow, source: int, target: int,
                          config: ModelConfig) -> GrangerResult:
    """Test ``source -> target`` conditioned on the window's utilisation rows."""
    if source == target:
        raise ValidationError("source and target must differ")
    n = window.n_slices
    if not (0 <= source < n and 0 <= target < n):
        raise ValidationError(f"slice index out of range for N={n}")
    z = _active_regressors(window, config)
    ctx = _TargetContext(window.slice_signals[target], z, config.p, config.q)
    return _test_with_context(ctx, window.slice_signals[source])


def pairwise_granger(window: TelemetryWindow, config: ModelConfig) -> dict[tuple[int, int], GrangerResult]:
    """All ``N(N-1)`` ordered-pair tests, keyed ``(source, target)``.

    The restricted fit depends only on the target, so it is computed once per
    target. Results are identical to calling ``enhanced_granger_test`` pair by
    pair.
    """
    z = _active_regressors(window, config)
    sig = window.slice_signals
    n = window.n_slices
    out: dict[tuple[int, int], GrangerResult] = {}
    for j in range(n):
        ctx = _TargetContext(sig[j], z, config.p, config.q)
        for i in range(n):
            if i != j:
                out[(i, j)] = _test_with_context(ctx, sig[i])
    return dict(sorted(out.items()))
