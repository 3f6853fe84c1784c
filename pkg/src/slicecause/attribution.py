"""Domain-adapted causal attribution over one telemetry window.

Pipeline: pairwise conditioned Granger tests, window-mean contention,
min-max F normalisation and fusion into Gamma, Benjamini-Hochberg over all
``N(N-1)`` tests, the dual edge gate ``Gamma > tau_causal and p_adj < alpha``,
and the maximum-product path with per-hop confidence.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .contention import ContentionParams, contention_matrix, contention_series
from .fusion import DEGENERATE_PHI, MixingWeights, integrated_strength, normalize_f
from .granger import _active_regressors, lag_matrix, pairwise_granger
from .linreg import bh_adjust
from .paths import extract_best_path
from .telemetry import ModelConfig, TelemetryWindow
from .theta import ThetaParams

PHASES = ("pairwise_tests", "contention", "fusion", "bh_correction",
          "edge_filter", "path_search", "confidence")


@dataclass(frozen=True)
class PairTestResult:
    source: int
    target: int
    f_stat: float
    p_value: float
    p_adj: float
    rho: float
    phi: float
    gamma: float
    lag_estimate: int
    d1: int
    d2: int

    @property
    def pair(self) -> tuple[int, int]:
        return (self.source, self.target)


@dataclass(frozen=True)
class CausalEdge:
    source: int
    target: int
    gamma: float
    p_value: float
    p_adj: float
    rho: float
    lag: int
    onset: float


@dataclass(frozen=True)
class CausalGraph:
    nodes: tuple[int, ...]
    edges: dict                     # (i, j) -> CausalEdge
    node_onsets: dict = field(default_factory=dict)
    tick_duration: float = 0.1
    window_start: float = 0.0

    def edge_set(self) -> set[tuple[int, int]]:
        return set(self.edges)


@dataclass(frozen=True)
class Hop:
    slice: int
    time: float
    confidence: float
    interval: tuple[float, float] | None = None


@dataclass(frozen=True)
class AttackPath:
    hops: tuple[Hop, ...] = ()
    path_score: float = 0.0

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(h.slice for h in self.hops)

    def __len__(self) -> int:
        return len(self.hops)


@dataclass(frozen=True, eq=False)
class PairEvidence:
    """Theta-independent part of the pipeline for one window."""

    granger: dict                   # (i, j) -> GrangerResult
    p_adj: dict                     # (i, j) -> float
    phi: dict                       # (i, j) -> float
    f_min: float
    f_max: float


@dataclass(eq=False)
class AttributionResult:
    graph: CausalGraph
    path: AttackPath
    pairs: dict                     # (i, j) -> PairTestResult
    theta: ThetaParams
    config: ModelConfig
    timings: dict = field(default_factory=dict)


# -- onset and timestamps -------------------------------------------------------------

def detect_onset(window: TelemetryWindow, slice_index: int, threshold: float = 2.0) -> int | None:
    """First tick whose z-scored signal exceeds ``threshold``; None if never."""
    hits = np.flatnonzero(window.slice_signals[slice_index] > threshold)
    return int(hits[0]) if hits.size else None


def hop_timestamp(edge: PairTestResult | CausalEdge, window: TelemetryWindow,
                  threshold: float = 2.0, origin: float | None = None) -> float:
    """Time the target of ``edge`` is reached.

    ``origin`` (seconds) defaults to the source's detected activity onset, or
    the window start when the source never crosses ``threshold``.
    """
    src = edge.source
    lag = edge.lag_estimate if isinstance(edge, PairTestResult) else edge.lag
    if origin is None:
        onset = detect_onset(window, src, threshold)
        origin = window.window_start + (onset or 0) * window.tick_duration
    return origin + lag * window.tick_duration


# -- evidence --------------------------------------------------------------------------

def pairwise_evidence(window: TelemetryWindow, config: ModelConfig,
                      timings: dict | None = None) -> PairEvidence:
    t0 = time.perf_counter()
    granger = pairwise_granger(window, config)
    t1 = time.perf_counter()
    pairs = list(granger)
    n = window.n_slices
    adj = bh_adjust([granger[e].p_value for e in pairs], n * (n - 1),
                    monotone=config.bh_monotone)
    p_adj = dict(zip(pairs, (float(v) for v in adj)))
    t2 = time.perf_counter()
    phi = normalize_f({e: g.f_stat for e, g in granger.items()})
    fvals = [g.f_stat for g in granger.values()]
    t3 = time.perf_counter()
    if timings is not None:
        timings["pairwise_tests"] = t1 - t0
        timings["bh_correction"] = t2 - t1
        timings["fusion"] = t3 - t2
    return PairEvidence(granger, p_adj, phi, min(fvals), max(fvals))


def _fuse(window, evidence, theta, config, timings=None):
    t0 = time.perf_counter()
    params = ContentionParams.from_theta(theta, config.sigmoid_slope)
    rho = contention_matrix(window, params)
    t1 = time.perf_counter()
    mix = MixingWeights(theta.omega1)
    pairs = {}
    for e, g in evidence.granger.items():
        r = float(rho[e])
        ph = evidence.phi[e]
        pairs[e] = PairTestResult(e[0], e[1], g.f_stat, g.p_value, evidence.p_adj[e],
                                  r, ph, integrated_strength(ph, r, mix),
                                  g.lag_estimate, g.d1, g.d2)
    t2 = time.perf_counter()
    if timings is not None:
        timings["contention"] = t1 - t0
        timings["fusion"] = timings.get("fusion", 0.0) + (t2 - t1)
    return pairs


def select_edges(pairs: dict, config: ModelConfig) -> list[tuple[int, int]]:
    """Pairs passing ``Gamma > tau_causal and p_adj < alpha``."""
    return [e for e, r in pairs.items()
            if r.gamma > config.tau_causal and r.p_adj < config.alpha]


def build_graph(window: TelemetryWindow, pairs: dict, config: ModelConfig) -> CausalGraph:
    edges = {}
    onsets = {}
    for e in select_edges(pairs, config):
        r = pairs[e]
        edges[e] = CausalEdge(r.source, r.target, r.gamma, r.p_value, r.p_adj, r.rho,
                              r.lag_estimate,
                              hop_timestamp(r, window, config.onset_threshold))
    for i in range(window.n_slices):
        onset = detect_onset(window, i, config.onset_threshold)
        onsets[i] = window.window_start + (onset or 0) * window.tick_duration
    return CausalGraph(tuple(range(window.n_slices)), edges, onsets,
                       window.tick_duration, window.window_start)


def extract_path(graph: CausalGraph) -> AttackPath:
    """Maximum-product maximal path; hop times accumulate lag offsets.

    Hop confidence is ``1 - p_adj`` of the edge entering the hop; the first
    hop inherits its outgoing edge's confidence.
    """
    if not graph.edges:
        return AttackPath()
    emap = {e: (ed.gamma, ed.p_adj) for e, ed in graph.edges.items()}
    nodes, score, _ = extract_best_path(emap)
    if not nodes:
        return AttackPath()
    first = graph.edges[(nodes[0], nodes[1])]
    t = graph.node_onsets.get(nodes[0], graph.window_start)
    hops = [Hop(nodes[0], t, 1.0 - first.p_adj)]
    for a, b in zip(nodes, nodes[1:]):
        ed = graph.edges[(a, b)]
        t = t + ed.lag * graph.tick_duration
        hops.append(Hop(b, t, 1.0 - ed.p_adj))
    return AttackPath(tuple(hops), score)


# -- per-hop confidence --------------------------------------------------------------

def bootstrap_gamma(edge: PairTestResult, window: TelemetryWindow, config: ModelConfig,
                    theta: ThetaParams, f_range: tuple[float, float],
                    reps: int | None = None) -> np.ndarray:
    """Gamma for ``reps`` circular block-bootstrap resamples of the regression rows.

    Blocks of ``p`` consecutive rows are drawn with wrap-around, so every
    resampled row keeps its own lag structure intact. F is recomputed from
    block-summed normal equations; phi uses the window's F range (clipped to
    [0, 1]); contention is averaged over the same resampled ticks.
    """
    reps = config.bootstrap_reps if reps is None else reps
    i, j = edge.source, edge.target
    p, q = config.p, config.q
    sig = window.slice_signals
    z = _active_regressors(window, config)
    L = max(p, q)
    y = sig[j][L:]
    X = np.hstack([lag_matrix(sig[j], p, L), lag_matrix(sig[i], q, L), z[:, L:].T])
    n_rows, ncol = X.shape
    restricted_cols = np.r_[0:p, p + q:ncol]
    rho_t = contention_series(window, i, j,
                              ContentionParams.from_theta(theta, config.sigmoid_slope))[L:]

    b = p
    n_blocks = -(-n_rows // b)
    idx = (np.arange(n_rows)[:, None] + np.arange(b)[None, :]) % n_rows   # block s -> rows
    outer = np.einsum("ri,rj->rij", X, X)
    G_blk = outer[idx].sum(axis=1)                       # n_rows x c x c
    xy_blk = (X * y[:, None])[idx].sum(axis=1)           # n_rows x c
    yy_blk = (y * y)[idx].sum(axis=1)
    rho_blk = rho_t[idx].sum(axis=1)

    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), int(i), int(j)]))
    starts = rng.integers(0, n_rows, size=(reps, n_blocks))
    G = G_blk[starts].sum(axis=1)
    xy = xy_blk[starts].sum(axis=1)
    yy = yy_blk[starts].sum(axis=1)
    n_eff = n_blocks * b
    rss_u = yy - np.einsum("bi,bi->b", xy, np.linalg.solve(G, xy[..., None])[..., 0])
    Gr = G[:, restricted_cols][:, :, restricted_cols]
    xyr = xy[:, restricted_cols]
    rss_r = yy - np.einsum("bi,bi->b", xyr, np.linalg.solve(Gr, xyr[..., None])[..., 0])
    d2 = n_eff - p - q - z.shape[0] - 1
    rss_u = np.maximum(rss_u, 1e-300)
    f = (np.maximum(rss_r - rss_u, 0.0) / q) / (rss_u / d2)

    lo, hi = f_range
    if hi - lo < 1e-12 or not math.isfinite(hi - lo):
        phi = np.full(reps, DEGENERATE_PHI)
    else:
        phi = np.clip((f - lo) / (hi - lo), 0.0, 1.0)
    rho = rho_blk[starts].sum(axis=1) / n_eff
    return theta.omega1 * phi + theta.omega2 * rho


def hop_confidence(edge: PairTestResult, window: TelemetryWindow, config: ModelConfig,
                   theta: ThetaParams | None = None,
                   f_range: tuple[float, float] | None = None):
    """``(1 - p_adj, (2.5%, 97.5%) bootstrap percentiles of Gamma))``."""
    theta = theta or config.theta_for(window.n_resources)
    point = 1.0 - edge.p_adj
    if config.bootstrap_reps == 0:
        return point, None
    if f_range is None:
        ev = pairwise_evidence(window, config)
        f_range = (ev.f_min, ev.f_max)
    g = bootstrap_gamma(edge, window, config, theta, f_range)
    lo, hi = np.percentile(g, [2.5, 97.5])
    return point, (float(lo), float(hi))


# -- orchestration ----------------------------------------------------------------------

def attribute_from_evidence(window: TelemetryWindow, evidence: PairEvidence,
                            config: ModelConfig, timings: dict | None = None,
                            with_confidence: bool = True) -> AttributionResult:
    timings = {} if timings is None else timings
    theta = config.theta_for(window.n_resources)
    pairs = _fuse(window, evidence, theta, config, timings)
    t0 = time.perf_counter()
    graph = build_graph(window, pairs, config)
    t1 = time.perf_counter()
    path = extract_path(graph)
    t2 = time.perf_counter()
    if with_confidence and len(path) and config.bootstrap_reps > 0:
        f_range = (evidence.f_min, evidence.f_max)
        hops = []
        for k, hop in enumerate(path.hops):
            a, b = (path.nodes[0], path.nodes[1]) if k == 0 else (path.nodes[k - 1], hop.slice)
            point, interval = hop_confidence(pairs[(a, b)], window, config, theta, f_range)
            hops.append(Hop(hop.slice, hop.time, point, interval))
        path = AttackPath(tuple(hops), path.path_score)
    t3 = time.perf_counter()
    timings["edge_filter"] = t1 - t0
    timings["path_search"] = t2 - t1
    timings["confidence"] = t3 - t2
    return AttributionResult(graph, path, pairs, theta, config, timings)


def attribute(window: TelemetryWindow, config: ModelConfig | None = None,
              with_confidence: bool = True) -> AttributionResult:
    """Run the full attribution pipeline on one window."""
    config = config or ModelConfig()
    window.validate_for(config)
    timings: dict = {}
    t0 = time.perf_counter()
    evidence = pairwise_evidence(window, config, timings)
    result = attribute_from_evidence(window, evidence, config, timings, with_confidence)
    timings["total"] = time.perf_counter() - t0
    return result


# -- report -----------------------------------------------------------------------------

def _num(x: float):
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


def to_report(result: AttributionResult, window: TelemetryWindow, extra: dict | None = None) -> dict:
    """JSON-ready attribution report. Only ``timing`` varies between identical runs."""
    ids = window.slice_ids
    edges = [{"source": ids[e.source], "target": ids[e.target],
              "source_index": e.source, "target_index": e.target,
              "gamma": _num(e.gamma), "p_value": _num(e.p_value), "p_adj": _num(e.p_adj),
              "rho": _num(e.rho), "lag": e.lag, "onset": _num(e.onset)}
             for _, e in sorted(result.graph.edges.items())]
    hops = [{"slice": ids[h.slice], "slice_index": h.slice, "time": _num(h.time),
             "confidence": _num(h.confidence),
             "interval": None if h.interval is None else [_num(v) for v in h.interval]}
            for h in result.path.hops]
    pairs = [{"source_index": r.source, "target_index": r.target, "f_stat": _num(r.f_stat),
              "p_value": _num(r.p_value), "p_adj": _num(r.p_adj), "rho": _num(r.rho),
              "phi": _num(r.phi), "gamma": _num(r.gamma), "lag": r.lag_estimate,
              "dof": [r.d1, r.d2]}
             for _, r in sorted(result.pairs.items())]
    report = {
        "config": result.config.to_dict(),
        "theta": result.theta.to_dict(),
        "seed": result.config.seed,
        "window": {"n_slices": window.n_slices, "n_resources": window.n_resources,
                   "n_ticks": window.n_ticks, "tick_duration": window.tick_duration,
                   "window_start": window.window_start, "metric": window.metric},
        "nodes": list(ids),
        "edges": edges,
        "path": {"hops": hops, "path_score": _num(result.path.path_score),
                 "length": len(result.path)},
        "pairs": pairs,
        "timing": {k: v * 1000.0 for k, v in result.timings.items()},
    }
    if extra:
        report.update(extra)
    return report
