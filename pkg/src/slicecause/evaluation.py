"""Attribution quality metrics, ablations, sweeps, baselines and latency benches.

Accuracy is edge-level: every ordered pair ``(i, j), i != j`` of a scenario
is one binary decision, pooled over the corpus. Path-level exact match is
reported next to it.
"""
from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .attribution import (AttackPath, CausalEdge, CausalGraph, PairEvidence,
                          attribute, attribute_from_evidence, pairwise_evidence)
from .errors import ValidationError
from .learning import DEFAULT_LAMBDA, LikelihoodModel, fit_trace
from .simulator import ScenarioSpec, TrainingCorpus, batch_generate, generate
from .telemetry import ModelConfig, TelemetryWindow
from .theta import ThetaParams

ACCURACY_NOTE = ("accuracy is edge-level over all ordered slice pairs (TP+TN)/N(N-1), "
                 "pooled over scenarios; path exact-match is reported separately")
Z95 = 1.959963984540054


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion; ``(0, 1)`` when ``n = 0``."""
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class EdgeScore:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 1.0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 1.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 1.0

    @property
    def fdr(self) -> float:
        return 1.0 - self.precision

    def __add__(self, other: "EdgeScore") -> "EdgeScore":
        return EdgeScore(self.tp + other.tp, self.fp + other.fp,
                         self.fn + other.fn, self.tn + other.tn)

    def intervals(self) -> dict:
        return {
            "accuracy": wilson_interval(self.tp + self.tn, self.total),
            "precision": wilson_interval(self.tp, self.tp + self.fp),
            "recall": wilson_interval(self.tp, self.tp + self.fn),
            "fdr": wilson_interval(self.fp, self.tp + self.fp),
        }


def _edge_set(predicted) -> set:
    if isinstance(predicted, CausalGraph):
        return set(predicted.edges)
    return {tuple(e) for e in predicted}


def score_edges(predicted, truth, n_nodes: int | None = None) -> EdgeScore:
    """Confusion counts over the ``N (N - 1)`` ordered pairs.

    ``predicted`` is a CausalGraph (its node list fixes ``N``) or an edge
    collection, in which case ``n_nodes`` is required.
    """
    if isinstance(predicted, CausalGraph):
        if n_nodes is not None and n_nodes != len(predicted.nodes):
            raise ValidationError(f"graph has {len(predicted.nodes)} nodes, expected {n_nodes}")
        n_nodes = len(predicted.nodes)
    if n_nodes is None:
        raise ValidationError("n_nodes is required for a bare edge collection")
    pred = _edge_set(predicted)
    true = {tuple(e) for e in truth}
    for i, j in pred | true:
        if i == j or not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise ValidationError(f"edge {(i, j)} outside the {n_nodes}-node universe")
    tp = len(pred & true)
    fp = len(pred - true)
    fn = len(true - pred)
    tn = n_nodes * (n_nodes - 1) - tp - fp - fn
    return EdgeScore(tp, fp, fn, tn)


def score_path(predicted: AttackPath | Sequence[int], truth: AttackPath | Sequence[int]):
    """``(exact_match, hop_overlap)``; overlap counts shared consecutive pairs."""
    p = tuple(predicted.nodes if isinstance(predicted, AttackPath) else predicted)
    t = tuple(truth.nodes if isinstance(truth, AttackPath) else truth)
    if not t:
        return p == t, 1.0 if not p else 0.0
    tp = set(zip(t, t[1:]))
    pp = set(zip(p, p[1:]))
    return p == t, len(tp & pp) / len(tp)


# -- corpus evaluation -------------------------------------------------------------------

@dataclass
class EvalReport:
    score: EdgeScore
    per_scenario: list = field(default_factory=list)    # per-scenario edge accuracy
    path_exact: int = 0
    path_overlap: float = 0.0
    n_scenarios: int = 0
    latency_ms: list = field(default_factory=list)
    per_phase_timing: dict = field(default_factory=dict)
    false_scenarios: int = 0                            # scenarios with at least one false edge

    accuracy = property(lambda self: self.score.accuracy)
    precision = property(lambda self: self.score.precision)
    recall = property(lambda self: self.score.recall)
    fdr = property(lambda self: self.score.fdr)

    @property
    def false_edge_rate(self) -> float:
        return self.score.fp / self.score.total if self.score.total else 0.0

    def latency_summary(self) -> dict:
        if not self.latency_ms:
            return {}
        a = np.asarray(self.latency_ms)
        return {"mean": float(a.mean()), "sd": float(a.std(ddof=1)) if a.size > 1 else 0.0,
                "p95": float(np.percentile(a, 95))}

    def to_dict(self, include_timing: bool = True) -> dict:
        s = self.score
        out = {
            "note": ACCURACY_NOTE,
            "n_scenarios": self.n_scenarios,
            "counts": {"tp": s.tp, "fp": s.fp, "fn": s.fn, "tn": s.tn},
            "accuracy": s.accuracy, "precision": s.precision,
            "recall": s.recall, "fdr": s.fdr,
            "intervals_95": {k: list(v) for k, v in s.intervals().items()},
            "false_edge_rate": self.false_edge_rate,
            "scenarios_with_false_edge": self.false_scenarios,
            "path_exact_match": self.path_exact,
            "path_hop_overlap_mean": self.path_overlap,
        }
        if include_timing:
            out["timing"] = {"latency_ms": self.latency_summary(),
                             "per_phase_ms": self.per_phase_timing}
        return out


Predictor = Callable[[TelemetryWindow, int], tuple]


def _evidence_task(args) -> PairEvidence:
    window, config = args
    return pairwise_evidence(window, config)


def corpus_evidence(corpus: TrainingCorpus, config: ModelConfig, jobs: int = 1) -> list[PairEvidence]:
    """Theta-independent pairwise tests per scenario, in corpus order.

    With ``jobs > 1`` scenarios are spread over worker processes; ``map``
    keeps the input order so results do not depend on scheduling.
    """
    if jobs <= 1 or len(corpus) < 2:
        return [pairwise_evidence(sc.window, config) for sc in corpus]
    tasks = [(sc.window, config) for sc in corpus]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_evidence_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def corpus_metrics(corpus: TrainingCorpus, config: ModelConfig,
                   evidence: Sequence[PairEvidence] | None = None,
                   configs: Sequence[ModelConfig] | None = None,
                   baseline: bool = False, jobs: int = 1) -> EvalReport:
    """Pooled metrics of the attribution pipeline (or the correlation baseline).

    ``configs`` gives one configuration per scenario (cross-fitted theta);
    ``evidence`` reuses theta-independent pairwise tests; with ``jobs > 1``
    they are computed up front in parallel, so per-scenario latency then
    covers only the fusion and path phases.
    """
    if evidence is None and not baseline and configs is None and jobs > 1:
        evidence = corpus_evidence(corpus, config, jobs)
    total = EdgeScore(0, 0, 0, 0)
    report = EvalReport(total)
    phases: dict = {}
    overlap = 0.0
    for idx, sc in enumerate(corpus):
        cfg = configs[idx] if configs is not None else config
        t0 = time.perf_counter()
        if baseline:
            graph = correlation_baseline(sc.window, cfg)
            from .attribution import extract_path
            path = extract_path(graph)
        else:
            timings: dict = {}
            ev = evidence[idx] if evidence is not None else pairwise_evidence(sc.window, cfg, timings)
            res = attribute_from_evidence(sc.window, ev, cfg, timings, with_confidence=False)
            graph, path = res.graph, res.path
            for k, v in timings.items():
                phases[k] = phases.get(k, 0.0) + v * 1e3
        report.latency_ms.append((time.perf_counter() - t0) * 1e3)
        s = score_edges(graph, sc.truth_edges)
        total = total + s
        report.per_scenario.append(s.accuracy)
        report.false_scenarios += s.fp > 0
        exact, ov = score_path(path, sc.truth_path)
        report.path_exact += exact
        overlap += ov
    n = len(corpus)
    report.score = total
    report.n_scenarios = n
    report.path_overlap = overlap / n if n else 0.0
    report.per_phase_timing = {k: v / n for k, v in phases.items()}
    return report


# -- paired statistics ------------------------------------------------------------------------

def sign_test(a: Sequence[float], b: Sequence[float]) -> tuple[int, int, float]:
    """One-sided exact sign test that ``a`` tends to exceed ``b``; ties dropped.

    Returns ``(wins, losses, p_value)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValidationError("paired samples differ in length")
    d = a - b
    wins = int(np.sum(d > 1e-12))
    losses = int(np.sum(d < -1e-12))
    if wins + losses == 0:
        return 0, 0, 1.0
    p = stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue
    return wins, losses, float(p)


def trend_test(levels: Sequence[float], values: Sequence[float],
               direction: str = "increasing") -> tuple[float, float]:
    """One-sided Spearman test of a monotone trend of ``values`` in ``levels``."""
    alt = "greater" if direction == "increasing" else "less"
    r = stats.spearmanr(levels, values, alternative=alt)
    return float(r.statistic), float(r.pvalue)


# -- folds and ablation ---------------------------------------------------------------------

def fold_of(scenario_id: str, seed: int, folds: int) -> int:
    h = hashlib.sha256(f"{seed}:{scenario_id}".encode()).digest()
    return int.from_bytes(h[:8], "big") % folds


VARIANTS = ("unconditioned", "conditioned", "fused_fixed", "fused_learned")


@dataclass
class AblationTable:
    reports: dict                       # variant -> EvalReport
    thetas: list                        # per-fold learned ThetaParams
    folds: int
    seed: int

    def deltas(self) -> dict:
        out = {}
        for a, b in zip(VARIANTS[1:], VARIANTS[:-1]):
            ra, rb = self.reports[a], self.reports[b]
            wins, losses, p = sign_test(ra.per_scenario, rb.per_scenario)
            out[f"{a}-{b}"] = {"accuracy_delta": ra.accuracy - rb.accuracy,
                               "wins": wins, "losses": losses, "sign_test_p": p}
        ra, rb = self.reports["fused_learned"], self.reports["conditioned"]
        wins, losses, p = sign_test(ra.per_scenario, rb.per_scenario)
        out["fused_learned-conditioned"] = {"accuracy_delta": ra.accuracy - rb.accuracy,
                                            "wins": wins, "losses": losses, "sign_test_p": p}
        return out

    def to_dict(self, include_timing: bool = False) -> dict:
        return {
            "note": ACCURACY_NOTE,
            "folds": self.folds, "seed": self.seed,
            "variants": {k: v.to_dict(include_timing) for k, v in self.reports.items()},
            "deltas": self.deltas(),
            "learned_theta": [t.to_dict() for t in self.thetas],
        }


def cross_fit_thetas(corpus: TrainingCorpus, config: ModelConfig, evidence: Sequence,
                     folds: int = 5, seed: int = 0, lam: float = DEFAULT_LAMBDA,
                     max_iters: int = 2000) -> tuple[list, list]:
    """Per-scenario theta learned without that scenario's fold; also the fold thetas."""
    if folds < 2:
        raise ValidationError("need at least two folds")
    assign = [fold_of(sc.scenario_id, seed, folds) for sc in corpus]
    per_scenario: list = [None] * len(corpus)
    fold_thetas = []
    for f in range(folds):
        train = [i for i, a in enumerate(assign) if a != f]
        test = [i for i, a in enumerate(assign) if a == f]
        if not test:
            continue
        if len(train) < 2:
            raise ValidationError("a training split has fewer than two scenarios")
        model = LikelihoodModel(corpus.subset(train), config, [evidence[i] for i in train])
        theta = fit_trace(model, lam, max_iters, seed).theta
        fold_thetas.append(theta)
        for i in test:
            per_scenario[i] = theta
    return per_scenario, fold_thetas


def ablation_run(corpus: TrainingCorpus, config: ModelConfig | None = None, *,
                 folds: int = 5, seed: int = 0, lam: float = DEFAULT_LAMBDA,
                 max_iters: int = 2000, fixed_theta: ThetaParams | None = None,
                 jobs: int = 1) -> AblationTable:
    """Four variants on identical data.

    1. unconditioned Granger (no utilisation regressors), omega1 = 1
    2. conditioned Granger, omega1 = 1
    3. conditioned Granger fused with contention at a fixed theta
    4. as 3 with theta learned on the other folds
    """
    if len(corpus) == 0:
        raise ValidationError("corpus is empty")
    config = config or ModelConfig()
    k = corpus.scenarios[0].window.n_resources
    fixed = fixed_theta or ThetaParams.default(k)
    uncond = config.replace(conditioned=False, theta=fixed.with_omega1(1.0))
    cond = config.replace(conditioned=True, theta=fixed.with_omega1(1.0))
    ev_u = corpus_evidence(corpus, uncond, jobs)
    ev_c = corpus_evidence(corpus, cond, jobs)
    reports = {
        "unconditioned": corpus_metrics(corpus, uncond, ev_u),
        "conditioned": corpus_metrics(corpus, cond, ev_c),
        "fused_fixed": corpus_metrics(corpus, cond.replace(theta=fixed), ev_c),
    }
    per_sc, fold_thetas = cross_fit_thetas(corpus, cond, ev_c, folds, seed, lam, max_iters)
    cfgs = [cond.replace(theta=t) for t in per_sc]
    reports["fused_learned"] = corpus_metrics(corpus, cond, ev_c, configs=cfgs)
    return AblationTable(reports, fold_thetas, folds, seed)


# -- robustness ---------------------------------------------------------------------------------

AXES = ("snr", "observability", "n_slices", "window", "lag_order")


def robustness_sweep(template: ScenarioSpec, axis: str, grid: Sequence, *, count: int = 50,
                     seed: int = 0, config: ModelConfig | None = None,
                     theta: ThetaParams | None = None, jobs: int = 1) -> list[dict]:
    """Regenerate the corpus at each grid point with the same seeds and score it.

    Seeds are shared across grid points, so every point sees the same chains
    and confounders and only the swept quantity changes.
    """
    if axis not in AXES:
        raise ValidationError(f"unknown axis {axis!r}; choose from {AXES}")
    if not len(grid):
        raise ValidationError("grid is empty")
    config = config or ModelConfig()
    rows = []
    for level in grid:
        spec = template
        cfg = config
        if axis == "snr":
            spec = replace(template, snr_db=float(level))
        elif axis == "observability":
            spec = replace(template, observability=float(level))
        elif axis == "n_slices":
            spec = replace(template, n_slices=int(level),
                           chain_nodes=(template.chain_nodes[0],
                                        min(template.chain_nodes[1], int(level))))
        elif axis == "window":
            spec = replace(template, ticks=int(level))
            cfg = config.replace(window_ticks=int(level))
        elif axis == "lag_order":
            cfg = config.replace(p=int(level), q=int(level))
        if theta is not None:
            cfg = cfg.replace(theta=theta)
        corpus = batch_generate(spec, count, seed)
        rep = corpus_metrics(corpus, cfg, jobs=jobs)
        lat = rep.latency_summary()
        rows.append({"axis": axis, "level": level, "accuracy": rep.accuracy,
                     "precision": rep.precision, "recall": rep.recall, "fdr": rep.fdr,
                     "path_exact": rep.path_exact / rep.n_scenarios,
                     "latency_mean_ms": lat.get("mean", 0.0),
                     "per_scenario": rep.per_scenario})
    return rows


def sweep_trend(rows: Sequence[dict], direction: str = "increasing") -> tuple[float, float]:
    """Pooled one-sided Spearman trend of per-scenario accuracy against the level."""
    levels, values = [], []
    for r in rows:
        levels.extend([float(r["level"])] * len(r["per_scenario"]))
        values.extend(r["per_scenario"])
    return trend_test(levels, values, direction)


# -- correlation baseline ---------------------------------------------------------------------

def lagged_correlations(x: np.ndarray, y: np.ndarray, max_lag: int) -> np.ndarray:
    """``r[l-1] = corr(x[t - l], y[t])`` for ``l = 1..max_lag``."""
    out = np.zeros(max_lag)
    for lag in range(1, max_lag + 1):
        a, b = x[:-lag], y[lag:]
        sa, sb = a.std(), b.std()
        out[lag - 1] = 0.0 if sa == 0 or sb == 0 else float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))
    return out


def correlation_baseline(window: TelemetryWindow, config: ModelConfig | None = None) -> CausalGraph:
    """Edge ``i -> j`` when the strongest lagged correlation of ``x_i`` leading
    ``y_j`` over lags ``1..q`` is significant.

    Each lag is tested with the Fisher transform at the Sidak level
    ``1 - (1 - alpha)^(1/q)``, so a null pair is flagged with probability
    about ``alpha``. Gamma carries ``|r|``.
    """
    config = config or ModelConfig()
    sig = window.slice_signals
    n, T = window.n_slices, window.n_ticks
    q = config.q
    per_lag = 1.0 - (1.0 - config.alpha) ** (1.0 / q)
    edges = {}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            r = lagged_correlations(sig[i], sig[j], q)
            best = int(np.argmax(np.abs(r)))
            rb = float(np.clip(r[best], -1 + 1e-15, 1 - 1e-15))
            lag = best + 1
            zstat = abs(math.atanh(rb)) * math.sqrt(max(T - lag - 3, 1))
            p = float(2 * stats.norm.sf(zstat))
            if p < per_lag:
                edges[(i, j)] = CausalEdge(i, j, abs(rb), p, p, 0.0, lag,
                                           window.window_start + lag * window.tick_duration)
    onsets = {i: window.window_start for i in range(n)}
    return CausalGraph(tuple(range(n)), edges, onsets, window.tick_duration, window.window_start)


# -- latency -----------------------------------------------------------------------------------

def bench_window(n: int, ticks: int = 300, k: int = 3, seed: int = 0) -> TelemetryWindow:
    chain = tuple(range(min(4, n)))
    spec = ScenarioSpec(n_slices=n, k_resources=k, ticks=ticks, chain=chain,
                        lags=(2,) * (len(chain) - 1), strengths=(1.0,) * (len(chain) - 1),
                        hop_resources=tuple(h % k for h in range(len(chain) - 1)),
                        seed=seed, chain_nodes=(2, min(4, n)))
    return generate(spec).window


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def bench_latency(n_grid: Sequence[int], config: ModelConfig | None = None, repeats: int = 10,
                  *, ticks: int = 300, seed: int = 0, with_confidence: bool = True) -> dict:
    """Warm-cache wall clock of ``attribute`` per N, plus log-log slopes."""
    if repeats < 5:
        raise ValidationError("repeats must be >= 5")
    config = config or ModelConfig()
    rows = []
    for n in n_grid:
        window = bench_window(int(n), ticks, seed=seed)
        attribute(window, config, with_confidence)          # warm-up
        total, pairwise = [], []
        for _ in range(repeats):
            t0 = time.perf_counter()
            res = attribute(window, config, with_confidence)
            total.append((time.perf_counter() - t0) * 1e3)
            pairwise.append(res.timings["pairwise_tests"] * 1e3)
        a, b = np.asarray(total), np.asarray(pairwise)
        rows.append({"n": int(n), "ticks": ticks, "mean_ms": float(a.mean()),
                     "sd_ms": float(a.std(ddof=1)), "p95_ms": float(np.percentile(a, 95)),
                     "pairwise_mean_ms": float(b.mean()), "pairwise_sd_ms": float(b.std(ddof=1))})
    out = {"rows": rows, "repeats": repeats, "config": config.to_dict()}
    if len(rows) >= 2:
        ns = [r["n"] for r in rows]
        out["slope_total"] = loglog_slope(ns, [r["mean_ms"] for r in rows])
        out["slope_pairwise"] = loglog_slope(ns, [r["pairwise_mean_ms"] for r in rows])
    return out
