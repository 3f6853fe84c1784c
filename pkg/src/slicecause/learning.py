"""Fitting theta by penalised Bernoulli likelihood over a labelled corpus.

Every ordered pair ``(i, j)`` of a scenario is an observation with label
``y = 1`` iff ``i -> j`` is a true edge, and success probability
``Gamma_ij(theta)`` clipped to ``[1e-6, 1 - 1e-6]``. The objective is

    L(theta) = sum_pairs [y log Gamma + (1 - y) log(1 - Gamma)]
               - lambda * (sum w^2 + sum tau^2 + omega1^2)

F statistics (hence phi) do not depend on theta and are computed once per
scenario. Contention and its derivatives come from per-resource matrix
products, so one evaluation costs ``O(M N^2 K T)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .attribution import pairwise_evidence
from .contention import sigmoid
from .errors import DivergenceError, ValidationError
from .simulator import Scenario, TrainingCorpus
from .telemetry import ModelConfig
from .theta import ThetaParams, logistic

P_CLIP = 1e-6
DEFAULT_LAMBDA = 1e-3


@dataclass(frozen=True, eq=False)
class ScenarioTerms:
    """Theta-independent pieces of one scenario's likelihood."""

    phi: np.ndarray            # N x N, zero diagonal
    labels: np.ndarray         # N x N, 0/1, zero diagonal
    alloc: np.ndarray          # K x N x T
    util: np.ndarray           # K x T
    mask: np.ndarray           # N x N, True off the diagonal


def scenario_terms(scenario: Scenario, config: ModelConfig, evidence=None) -> ScenarioTerms:
    window = scenario.window
    n = window.n_slices
    evidence = evidence or pairwise_evidence(window, config)
    phi = np.zeros((n, n))
    for (i, j), v in evidence.phi.items():
        phi[i, j] = v
    labels = np.zeros((n, n))
    for i, j in scenario.truth_edges:
        labels[i, j] = 1.0
    mask = ~np.eye(n, dtype=bool)
    return ScenarioTerms(phi, labels, np.ascontiguousarray(window.allocations.transpose(1, 0, 2)),
                         np.asarray(window.utilization), mask)


class LikelihoodModel:
    """Cached corpus terms; evaluates the objective and its gradient."""

    def __init__(self, corpus: TrainingCorpus, config: ModelConfig | None = None,
                 evidence: Sequence | None = None):
        if len(corpus) == 0:
            raise ValidationError("corpus is empty")
        self.config = config or ModelConfig()
        ks = {sc.window.n_resources for sc in corpus}
        if len(ks) != 1:
            raise ValidationError(f"scenarios disagree on resource count: {sorted(ks)}")
        self.k = ks.pop()
        evidence = evidence or [None] * len(corpus)
        self.terms = [scenario_terms(sc, self.config, ev) for sc, ev in zip(corpus, evidence)]
        self.n_obs = int(sum(t.mask.sum() for t in self.terms))

    # contention and d(rho)/d(tau) for one scenario, shapes K x N x N
    def _contention(self, t: ScenarioTerms, tau: np.ndarray):
        slope = self.config.sigmoid_slope
        s = sigmoid(slope * (t.util - tau[:, None]))
        T = t.util.shape[1]
        at = t.alloc.transpose(0, 2, 1)                     # K x T x N
        S = np.matmul(t.alloc * s[:, None, :], at) / T
        D = np.matmul(t.alloc * (s * (1.0 - s))[:, None, :], at) / T
        return S, D

    def gamma(self, theta: ThetaParams, index: int) -> np.ndarray:
        t = self.terms[index]
        w = np.asarray(theta.weights)
        S, _ = self._contention(t, np.asarray(theta.thresholds))
        rho = np.tensordot(w, S, axes=1)
        g = theta.omega1 * t.phi + theta.omega2 * rho
        return np.where(t.mask, g, 0.0)

    def value_and_grad(self, theta: ThetaParams, lam: float):
        """Objective and its gradient with respect to ``(w, tau, omega1)``."""
        w = np.asarray(theta.weights)
        tau = np.asarray(theta.thresholds)
        om = theta.omega1
        slope = self.config.sigmoid_slope
        total = 0.0
        gw = np.zeros(self.k)
        gt = np.zeros(self.k)
        go = 0.0
        for t in self.terms:
            S, D = self._contention(t, tau)
            rho = np.tensordot(w, S, axes=1)
            gam = om * t.phi + (1.0 - om) * rho
            inside = (gam > P_CLIP) & (gam < 1.0 - P_CLIP) & t.mask
            gc = np.clip(gam, P_CLIP, 1.0 - P_CLIP)
            y = t.labels
            ll = np.where(t.mask, y * np.log(gc) + (1.0 - y) * np.log1p(-gc), 0.0)
            total += float(ll.sum())
            dg = np.where(inside, y / gc - (1.0 - y) / (1.0 - gc), 0.0)
            go += float(np.sum(dg * (t.phi - rho)))
            drho = dg * (1.0 - om)
            gw += np.einsum("kij,ij->k", S, drho)
            gt += -slope * w * np.einsum("kij,ij->k", D, drho)
        penalty = float(np.sum(w ** 2) + np.sum(tau ** 2) + om ** 2)
        value = total - lam * penalty
        grad = np.concatenate([gw - 2 * lam * w, gt - 2 * lam * tau, [go - 2 * lam * om]])
        return value, grad

    def value(self, theta: ThetaParams, lam: float) -> float:
        return self.value_and_grad(theta, lam)[0]

    def free_value_and_grad(self, free: np.ndarray, lam: float):
        """Objective and gradient with respect to the unconstrained vector."""
        theta = ThetaParams.from_free(free)
        value, g = self.value_and_grad(theta, lam)
        k = self.k
        tau = np.asarray(theta.thresholds)
        jac = np.concatenate([logistic(free[:k]), tau * (1.0 - tau),
                              [theta.omega1 * (1.0 - theta.omega1)]])
        return value, g * jac, theta


def log_likelihood(theta: ThetaParams, corpus: TrainingCorpus | LikelihoodModel,
                   lam: float = DEFAULT_LAMBDA, config: ModelConfig | None = None) -> float:
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    model = corpus if isinstance(corpus, LikelihoodModel) else LikelihoodModel(corpus, config)
    return model.value(theta, lam)


def log_likelihood_grad(theta: ThetaParams, corpus: TrainingCorpus | LikelihoodModel,
                        lam: float = DEFAULT_LAMBDA, config: ModelConfig | None = None) -> np.ndarray:
    """Gradient with respect to the constrained values ``(w, tau, omega1)``."""
    model = corpus if isinstance(corpus, LikelihoodModel) else LikelihoodModel(corpus, config)
    return model.value_and_grad(theta, lam)[1]


@dataclass
class FitTrace:
    theta: ThetaParams
    history: list = field(default_factory=list)   # per-iteration objective (sum form)
    iterations: int = 0
    converged: bool = False
    lam: float = DEFAULT_LAMBDA
    seed: int = 0


def initial_theta(k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7E7A]))
    base = ThetaParams.default(k, omega1=0.5).to_free()
    return base + rng.normal(0.0, 0.01, size=base.size)


def fit_trace(corpus: TrainingCorpus | LikelihoodModel, lam: float = DEFAULT_LAMBDA,
              max_iters: int = 2000, seed: int = 0, *, config: ModelConfig | None = None,
              step: float = 64.0, tol: float = 1e-8, max_halvings: int = 40) -> FitTrace:
    """Gradient ascent on the free parameters with halving backtracking.

    Step size and the convergence test act on the per-observation mean of
    the objective; this rescales the problem without moving its optimum.
    """
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    if isinstance(corpus, LikelihoodModel):
        model = corpus
    else:
        if len(corpus) < 2:
            raise ValidationError("fit needs at least two scenarios")
        model = LikelihoodModel(corpus, config)
    scale = 1.0 / model.n_obs
    x = initial_theta(model.k, seed)
    value, grad, theta = model.free_value_and_grad(x, lam)
    if not np.isfinite(value):
        raise DivergenceError("non-finite likelihood at initialisation", None)
    trace = FitTrace(theta, [value], 0, False, lam, seed)
    for it in range(1, max_iters + 1):
        g = grad * scale
        h = step
        accepted = False
        for _ in range(max_halvings):
            cand = x + h * g
            c_value, c_grad, c_theta = model.free_value_and_grad(cand, lam)
            if not np.isfinite(c_value) or not np.all(np.isfinite(c_grad)):
                raise DivergenceError(f"non-finite likelihood at iteration {it}", theta)
            if c_value > value:
                accepted = True
                break
            h *= 0.5
        trace.iterations = it
        if not accepted:
            trace.converged = True
            break
        delta = (c_value - value) * scale
        x, value, grad, theta = cand, c_value, c_grad, c_theta
        trace.history.append(value)
        trace.theta = theta
        if abs(delta) < tol:
            trace.converged = True
            break
    return trace


def fit(corpus: TrainingCorpus, lam: float = DEFAULT_LAMBDA, max_iters: int = 2000,
        seed: int = 0, config: ModelConfig | None = None) -> ThetaParams:
    return fit_trace(corpus, lam, max_iters, seed, config=config).theta


def relabel_with_theta(corpus: TrainingCorpus, theta: ThetaParams, seed: int,
                       config: ModelConfig | None = None) -> TrainingCorpus:
    """Replace every scenario's edge labels by Bernoulli(Gamma(theta)) draws.

    This plants ``theta`` as the true parameter of the likelihood model, which
    is what a recovery test needs.
    """
    from dataclasses import replace
    model = LikelihoodModel(corpus, config)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xB1A5]))
    out = []
    for idx, sc in enumerate(corpus):
        g = np.clip(model.gamma(theta, idx), P_CLIP, 1.0 - P_CLIP)
        draw = rng.random(g.shape) < g
        n = g.shape[0]
        edges = frozenset((i, j) for i in range(n) for j in range(n) if i != j and draw[i, j])
        out.append(replace(sc, truth_edges=edges))
    return TrainingCorpus(out, corpus.template, corpus.seed)


def sensitivity_sweep(corpus: TrainingCorpus, omega1_grid: Sequence[float],
                      theta: ThetaParams | None = None, config: ModelConfig | None = None,
                      evidence: Sequence | None = None) -> list[tuple[float, float]]:
    """Edge-level accuracy per omega1 with weights and thresholds held fixed."""
    from .evaluation import corpus_metrics

    config = config or ModelConfig()
    grid = [float(v) for v in omega1_grid]
    if any(not 0.0 <= v <= 1.0 for v in grid):
        raise ValidationError("omega1 grid must lie in [0, 1]")
    k = corpus.scenarios[0].window.n_resources
    theta = theta or config.theta_for(k)
    if evidence is None:
        evidence = [pairwise_evidence(sc.window, config) for sc in corpus]
    out = []
    for om in grid:
        cfg = config.replace(theta=theta.with_omega1(om))
        m = corpus_metrics(corpus, cfg, evidence)
        out.append((om, m.accuracy))
    return out
