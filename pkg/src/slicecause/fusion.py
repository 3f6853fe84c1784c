"""Normalised F evidence fused with contention into the causal strength Gamma."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Mapping

from .errors import ValidationError

DEGENERATE_PHI = 0.5


@dataclass(frozen=True)
class MixingWeights:
    omega1: float

    def __post_init__(self):
        if not 0.0 <= self.omega1 <= 1.0:
            raise ValidationError(f"omega1 must lie in [0, 1], got {self.omega1}")

    @property
    def omega2(self) -> float:
        return 1.0 - self.omega1


def normalize_f(f_values: Mapping[Hashable, float]) -> dict:
    """Min-max scale F statistics over the supplied set.

    When the range collapses (below 1e-12) every pair gets 0.5: the window
    says nothing about which pair is stronger.
    """
    if not f_values:
        raise ValidationError("normalize_f needs at least one pair")
    vals = list(f_values.values())
    lo, hi = min(vals), max(vals)
    span = hi - lo
    if not span >= 1e-12 or span == float("inf"):
        if span == float("inf"):
            # an infinite F (perfect fit) dominates every finite one
            return {k: 1.0 if v == hi else 0.0 for k, v in f_values.items()}
        return {k: DEGENERATE_PHI for k in f_values}
    return {k: (v - lo) / span for k, v in f_values.items()}


def integrated_strength(phi: float, rho: float, weights: MixingWeights) -> float:
    return weights.omega1 * phi + weights.omega2 * rho
