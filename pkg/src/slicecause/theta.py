"""Learnable contention and fusion parameters.

The constrained values (weights >= 0, thresholds in [0, 1], omega1 in (0, 1))
are what the rest of the package consumes. The optimiser works on an
unconstrained vector through softplus / logistic maps, so every iterate is
feasible by construction.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError

DEFAULT_OMEGA1 = 0.67
_EPS = 1e-12


def softplus(x):
    x = np.asarray(x, dtype=float)
    return np.logaddexp(0.0, x)


def inv_softplus(y):
    y = np.maximum(np.asarray(y, dtype=float), _EPS)
    # log(expm1(y)) without overflow for large y
    return y + np.log(-np.expm1(-y))


def logistic(x):
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def logit(y):
    y = np.clip(np.asarray(y, dtype=float), _EPS, 1.0 - _EPS)
    return np.log(y) - np.log1p(-y)


@dataclass(frozen=True)
class ThetaParams:
    """Criticality weights ``w_k``, contention thresholds ``tau_k`` and ``omega1``.

    ``omega2`` is always ``1 - omega1``.
    """

    weights: tuple[float, ...]
    thresholds: tuple[float, ...]
    omega1: float

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        t = tuple(float(v) for v in self.thresholds)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "omega1", float(self.omega1))
        if len(w) != len(t):
            raise ValidationError(
                f"weights ({len(w)}) and thresholds ({len(t)}) differ in length")
        if not all(math.isfinite(v) and v >= 0 for v in w):
            raise ValidationError(f"weights must be finite and >= 0, got {w}")
        if not all(0.0 <= v <= 1.0 for v in t):
            raise ValidationError(f"thresholds must lie in [0, 1], got {t}")
        if not 0.0 <= self.omega1 <= 1.0:
            raise ValidationError(f"omega1 must lie in [0, 1], got {self.omega1}")

    @property
    def omega2(self) -> float:
        return 1.0 - self.omega1

    @property
    def k(self) -> int:
        return len(self.weights)

    @classmethod
    def default(cls, k: int, omega1: float = DEFAULT_OMEGA1) -> "ThetaParams":
        """Uniform weights, mid-range thresholds."""
        if k < 1:
            raise ValidationError("need at least one resource")
        return cls((1.0 / k,) * k, (0.5,) * k, omega1)

    def with_omega1(self, omega1: float) -> "ThetaParams":
        return ThetaParams(self.weights, self.thresholds, omega1)

    # -- unconstrained parameterisation ------------------------------------

    def to_free(self) -> np.ndarray:
        """Layout: ``[u_1..u_K, v_1..v_K, s]``."""
        return np.concatenate([
            inv_softplus(self.weights),
            logit(self.thresholds),
            np.atleast_1d(logit(self.omega1)),
        ])

    @classmethod
    def from_free(cls, free: Sequence[float]) -> "ThetaParams":
        free = np.asarray(free, dtype=float)
        if free.ndim != 1 or free.size % 2 != 1:
            raise ValidationError("free vector must have length 2K + 1")
        k = (free.size - 1) // 2
        return cls(tuple(softplus(free[:k])),
                   tuple(logistic(free[k:2 * k])),
                   float(logistic(free[-1])))

    def constrained_vector(self) -> np.ndarray:
        return np.array([*self.weights, *self.thresholds, self.omega1])

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        return {"weights": list(self.weights),
                "thresholds": list(self.thresholds),
                "omega1": self.omega1,
                "omega2": self.omega2}

    @classmethod
    def from_dict(cls, data: dict) -> "ThetaParams":
        try:
            return cls(tuple(data["weights"]), tuple(data["thresholds"]),
                       data["omega1"])
        except KeyError as exc:
            raise ValidationError(f"theta document missing field {exc}") from None

    def save(self, path: str | Path) -> None:
        # repr-based float encoding in json round-trips exactly
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ThetaParams":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{exc.lineno}: {exc.msg}") from None
        return cls.from_dict(data)
