from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slicecause.errors import DivergenceError, ValidationError
from slicecause.learning import (LikelihoodModel, ScenarioTerms, fit_trace, log_likelihood,
                                 relabel_with_theta, sensitivity_sweep)
from slicecause.simulator import ScenarioSpec, TrainingCorpus, batch_generate
from slicecause.telemetry import ModelConfig
from slicecause.theta import ThetaParams

SMALL = ScenarioSpec(n_slices=4, k_resources=2, chain_nodes=(2, 3), confounder_range=(0, 1))


@pytest.fixture(scope="module")
def corpus():
    return batch_generate(SMALL, 4, seed=5)


@pytest.fixture(scope="module")
def model(corpus):
    return LikelihoodModel(corpus, ModelConfig(bootstrap_reps=0))


def _random_theta(rng, k=2):
    return ThetaParams(tuple(rng.uniform(0.05, 2.0, k)), tuple(rng.uniform(0.05, 0.95, k)),
                       float(rng.uniform(0.05, 0.95)))


def test_gradient_matches_central_differences(model):
    rng = np.random.default_rng(20)
    h = 1e-5
    worst = 0.0
    for _ in range(20):
        theta = _random_theta(rng)
        _, g = model.value_and_grad(theta, 1e-3)
        x = theta.constrained_vector()
        k = theta.k
        fd = np.empty_like(x)
        for idx in range(x.size):
            up, dn = x.copy(), x.copy()
            up[idx] += h
            dn[idx] -= h
            mk = lambda v: ThetaParams(tuple(v[:k]), tuple(v[k:2 * k]), float(v[-1]))
            fd[idx] = (model.value(mk(up), 1e-3) - model.value(mk(dn), 1e-3)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12)))
    assert worst < 1e-4


def test_free_gradient_matches_central_differences(model):
    rng = np.random.default_rng(21)
    h = 1e-5
    for _ in range(5):
        x = _random_theta(rng).to_free()
        _, g, _ = model.free_value_and_grad(x, 1e-3)
        fd = np.array([(model.free_value_and_grad(x + h * e, 1e-3)[0]
                        - model.free_value_and_grad(x - h * e, 1e-3)[0]) / (2 * h)
                       for e in np.eye(x.size)])
        assert np.max(np.abs(g - fd)) / np.max(np.abs(fd)) < 1e-4


def _pinned_model(model, phi_value, labels):
    # two slices, zero allocation (rho = 0), fixed phi
    n = labels.shape[0]
    terms = ScenarioTerms(np.full((n, n), phi_value) * (1 - np.eye(n)), labels,
                          np.zeros((2, n, 10)), np.full((2, 10), 0.5), ~np.eye(n, dtype=bool))
    m = LikelihoodModel.__new__(LikelihoodModel)
    m.config, m.k, m.terms, m.n_obs = model.config, 2, [terms], n * (n - 1)
    return m


def test_half_probability_gives_log_half_per_pair(model):
    m = _pinned_model(model, 1.0, np.array([[0.0, 1.0], [0.0, 0.0]]))
    theta = ThetaParams((0.5, 0.5), (0.5, 0.5), 0.5)
    assert m.value(theta, 0.0) == pytest.approx(2 * math.log(0.5), rel=1e-12)


def test_perfect_fit_approaches_zero(model):
    labels = np.array([[0.0, 1.0], [1.0, 0.0]])
    m = _pinned_model(model, 1.0, labels)
    theta = ThetaParams((0.5, 0.5), (0.5, 0.5), 1.0 - 1e-9)
    assert m.value(theta, 0.0) == pytest.approx(2 * math.log1p(-1e-6), rel=1e-6)   # clip bound


def test_penalty_is_lambda_times_squared_norm(model):
    theta = ThetaParams((0.45, 0.31), (0.5, 0.2), 0.67)
    diff = model.value(theta, 1e-3) - model.value(theta, 0.0)
    assert diff == pytest.approx(-1e-3 * float(np.sum(theta.constrained_vector() ** 2)), rel=1e-9)


@given(st.floats(0, 10), st.floats(0, 10))
def test_likelihood_nonincreasing_in_lambda(lam_a, lam_b):
    model = _MODEL_CACHE.setdefault("m", None) or _build()
    theta = ThetaParams((0.3, 0.7), (0.4, 0.6), 0.6)
    lo, hi = sorted((lam_a, lam_b))
    assert model.value(theta, hi) <= model.value(theta, lo)


_MODEL_CACHE: dict = {}


def _build():
    _MODEL_CACHE["m"] = LikelihoodModel(batch_generate(SMALL, 2, seed=9),
                                        ModelConfig(bootstrap_reps=0))
    return _MODEL_CACHE["m"]


def test_log_likelihood_wrappers(corpus, model):
    theta = ThetaParams((0.3, 0.7), (0.4, 0.6), 0.6)
    assert log_likelihood(theta, model, 1e-3) == model.value(theta, 1e-3)
    with pytest.raises(ValidationError):
        log_likelihood(theta, model, -1.0)
    with pytest.raises(ValidationError):
        LikelihoodModel(TrainingCorpus([]))


def test_fit_respects_constraints_and_improves(model):
    trace = fit_trace(model, 1e-3, 200, seed=1)
    th = trace.theta
    assert all(w >= 0 for w in th.weights)
    assert all(0 <= t <= 1 for t in th.thresholds)
    assert 0 < th.omega1 < 1
    assert trace.history == sorted(trace.history)
    assert trace.history[-1] > trace.history[0]


def test_fit_is_deterministic(model):
    a = fit_trace(model, 1e-3, 50, seed=3).theta
    b = fit_trace(model, 1e-3, 50, seed=3).theta
    assert a == b


def test_huge_lambda_drives_to_penalty_minimum(model):
    th = fit_trace(model, 1e4, 2000, seed=0).theta
    assert max(th.weights) < 0.05
    assert max(th.thresholds) < 0.05
    assert th.omega1 < 0.05


def test_fit_needs_two_scenarios(corpus):
    with pytest.raises(ValidationError):
        fit_trace(corpus.subset([0]), 1e-3, 10)


def test_divergence_carries_last_iterate(model):
    broken = _pinned_model(model, float("nan"), np.zeros((2, 2)))
    with pytest.raises(DivergenceError):
        fit_trace(broken, 1e-3, 10)


def test_relabel_is_deterministic(corpus):
    theta = ThetaParams((0.45, 0.55), (0.5, 0.5), 0.67)
    a = relabel_with_theta(corpus, theta, 4)
    b = relabel_with_theta(corpus, theta, 4)
    assert [s.truth_edges for s in a] == [s.truth_edges for s in b]
    assert all(i != j for s in a for i, j in s.truth_edges)


def test_sensitivity_endpoints_and_grid(corpus):
    cfg = ModelConfig(bootstrap_reps=0)
    rows = sensitivity_sweep(corpus, [0.0, 0.5, 1.0], config=cfg)
    assert [r[0] for r in rows] == [0.0, 0.5, 1.0]
    assert all(0.0 <= a <= 1.0 for _, a in rows)
    with pytest.raises(ValidationError):
        sensitivity_sweep(corpus, [1.5], config=cfg)
