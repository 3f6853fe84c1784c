"""Resource-contention strength between two slices.

    rho_ij(t) = sum_k w_k * A_ik(t) * A_jk(t) * sigmoid(slope * (U_kt - tau_k))

The allocation product is an AND gate: a slice with no share of resource k
contributes nothing through it. Window-level contention is the arithmetic
mean over ticks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .telemetry import TelemetryWindow
from .theta import ThetaParams


@dataclass(frozen=True)
class ContentionParams:
    weights: tuple[float, ...]
    thresholds: tuple[float, ...]
    sigmoid_slope: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        t = np.asarray(self.thresholds, dtype=float)
        if w.shape != t.shape or w.ndim != 1:
            raise ValidationError("weights and thresholds must be equal-length sequences")
        if np.any(w < 0):
            raise ValidationError("weights must be >= 0")
        if np.any((t < 0) | (t > 1)):
            raise ValidationError("thresholds must lie in [0, 1]")
        if not self.sigmoid_slope > 0:
            raise ValidationError("sigmoid_slope must be positive")

    @classmethod
    def from_theta(cls, theta: ThetaParams, slope: float = 1.0) -> "ContentionParams":
        return cls(theta.weights, theta.thresholds, slope)


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def contention_at_tick(alloc_i, alloc_j, util, params: ContentionParams) -> float:
    a_i = np.asarray(alloc_i, dtype=float)
    a_j = np.asarray(alloc_j, dtype=float)
    u = np.asarray(util, dtype=float)
    k = len(params.weights)
    if not (a_i.shape == a_j.shape == u.shape == (k,)):
        raise ValidationError(
            f"dimension mismatch: alloc_i {a_i.shape}, alloc_j {a_j.shape}, util {u.shape}, K={k}")
    gate = sigmoid(params.sigmoid_slope * (u - np.asarray(params.thresholds)))
    return float(np.sum(np.asarray(params.weights) * (a_i * a_j) * gate))


def stress(window: TelemetryWindow, params: ContentionParams) -> np.ndarray:
    """Per-resource utilisation stress ``sigmoid(slope (U - tau))``, K x T."""
    tau = np.asarray(params.thresholds)[:, None]
    return sigmoid(params.sigmoid_slope * (window.utilization - tau))


def contention_series(window: TelemetryWindow, i: int, j: int,
                      params: ContentionParams) -> np.ndarray:
    """Per-tick ``rho_ij(t)`` for one pair."""
    _check_pair(window, i, j, params)
    w = np.asarray(params.weights)[:, None]
    A = window.allocations
    return np.sum(w * (A[i] * A[j]) * stress(window, params), axis=0)


def contention_over_window(window: TelemetryWindow, i: int, j: int,
                           params: ContentionParams) -> float:
    return float(np.mean(contention_series(window, i, j, params)))


def contention_matrix(window: TelemetryWindow, params: ContentionParams) -> np.ndarray:
    """Window-mean contention for every pair at once (N x N, symmetric)."""
    if len(params.weights) != window.n_resources:
        raise ValidationError(
            f"params have {len(params.weights)} resources, window has {window.n_resources}")
    A = window.allocations                                    # N x K x T
    g = stress(window, params) * np.asarray(params.weights)[:, None]   # K x T
    # sum_k w_k mean_t A_ik A_jk s_kt
    rho = np.einsum("ikt,kt,jkt->ij", A, g, A, optimize=True) / window.n_ticks
    rho = np.triu(rho, 1)
    rho = rho + rho.T                 # exact symmetry despite summation order
    return rho


def _check_pair(window, i, j, params):
    n = window.n_slices
    if not (0 <= i < n and 0 <= j < n):
        raise ValidationError(f"slice index out of range for N={n}")
    if i == j:
        raise ValidationError("contention is defined between distinct slices")
    if len(params.weights) != window.n_resources:
        raise ValidationError(
            f"params have {len(params.weights)} resources, window has {window.n_resources}")
