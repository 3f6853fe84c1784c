"""OLS fitting, F-distribution tail probabilities and Benjamini-Hochberg.

The F tail goes through a self-contained regularised incomplete beta
(continued fraction, modified Lentz) so that p-values do not depend on
which special-function library happens to be installed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import RankDeficientError, ValidationError

RANK_TOL = 1e-10
_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 20000


@dataclass(frozen=True, eq=False)
class FitResult:
    coefficients: np.ndarray
    rss: float
    residuals: np.ndarray
    dof_resid: int


def ols_fit(design, target) -> FitResult:
    """Least squares via a reduced QR factorisation.

    Raises ``RankDeficientError`` when a diagonal entry of ``R`` falls below
    ``1e-10`` times the largest column norm.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(target, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, c = X.shape
    if y.shape != (n,):
        raise ValidationError(f"target length {y.shape} does not match design rows {n}")
    if n <= c:
        raise ValidationError(f"need more rows than columns, got {n} x {c}")
    col_norm = np.sqrt(np.einsum("ij,ij->j", X, X))
    scale = col_norm.max() if c else 0.0
    if c == 0:
        return FitResult(np.zeros(0), float(y @ y), y.copy(), n)
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    if scale == 0.0 or diag.min() < RANK_TOL * scale:
        raise RankDeficientError(
            f"design is rank deficient (min |R_ii| = {diag.min():.3g}, "
            f"max column norm = {scale:.3g})")
    beta = solve_triangular(R, Q.T @ y)
    resid = y - X @ beta
    return FitResult(beta, float(resid @ resid), resid, n - c)


# -- regularised incomplete beta ---------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValidationError("betainc_reg needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"x must lie in [0, 1], got {x}")
    return _betainc(a, b, x, 1.0 - x)


def _betainc(a: float, b: float, x: float, y: float) -> float:
    """``I_x(a, b)`` given both ``x`` and ``y = 1 - x``.

    Callers that can form ``1 - x`` without cancellation pass it in, which
    keeps full accuracy when ``x`` sits next to 1.
    """
    if x == 0.0 or y == 1.0:
        return 0.0
    if y == 0.0 or x == 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, y) / b


def _check_dof(d1, d2):
    for name, d in (("d1", d1), ("d2", d2)):
        if isinstance(d, bool) or int(d) != d or d < 1:
            raise ValidationError(f"{name} must be a positive integer, got {d!r}")


def f_tail(f_value: float, d1: int, d2: int) -> float:
    """Upper tail ``P(F(d1, d2) > f_value)``."""
    _check_dof(d1, d2)
    if not f_value >= 0:
        raise ValidationError(f"F value must be >= 0, got {f_value}")
    if math.isinf(f_value):
        return 0.0
    # complementary argument keeps relative accuracy deep in the tail
    den = d2 + d1 * f_value
    return min(1.0, max(0.0, _betainc(d2 / 2.0, d1 / 2.0, d2 / den, d1 * f_value / den)))


def f_cdf(f_value: float, d1: int, d2: int) -> float:
    """Lower tail ``P(F(d1, d2) <= f_value)``."""
    _check_dof(d1, d2)
    if not f_value >= 0:
        raise ValidationError(f"F value must be >= 0, got {f_value}")
    if math.isinf(f_value):
        return 1.0
    den = d1 * f_value + d2
    return min(1.0, max(0.0, _betainc(d1 / 2.0, d2 / 2.0, d1 * f_value / den, d2 / den)))


# -- multiple testing ----------------------------------------------------------------

def bh_adjust(p_values, m: int | None = None, *, monotone: bool = False) -> np.ndarray:
    """Benjamini-Hochberg adjusted p-values, ``p * m / rank`` clamped to 1.

    ``m`` is the size of the test family and may exceed the number of
    p-values supplied (the rest of the family is taken to rank above them).
    Ranks are 1-based ascending; tied p-values share the lowest rank of their
    group. ``monotone=True`` adds the textbook step-up cumulative minimum,
    which the plain formula omits.
    """
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        raise ValidationError("p_values must be 1-D")
    if m is None:
        m = p.size
    if m < p.size:
        raise ValidationError(f"m={m} but {p.size} p-values were supplied")
    if p.size == 0:
        return p.copy()
    if np.any(~np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
        raise ValidationError("p-values must lie in [0, 1]")
    order = np.argsort(p, kind="stable")
    sorted_p = p[order]
    ranks_sorted = np.arange(1, p.size + 1, dtype=float)
    # ties take the first (lowest) rank of their run
    new_run = np.concatenate([[True], sorted_p[1:] != sorted_p[:-1]])
    ranks_sorted = np.maximum.accumulate(np.where(new_run, ranks_sorted, 0.0))
    adj_sorted = sorted_p * m / ranks_sorted
    if monotone:
        adj_sorted = np.minimum.accumulate(adj_sorted[::-1])[::-1]
    adj = np.empty_like(p)
    adj[order] = np.minimum(adj_sorted, 1.0)
    return adj
