"""Seeded multi-slice telemetry with planted causal structure.

Generative model (per tick ``t``, after a burn-in that is discarded):

* allocations ``A_ik(t)``: a per-(slice, resource) level plus a slow AR(1)
  wobble; both endpoints of an attack hop get a high share of the hop's
  resource, and confounded slices get a high share of the confounding one.
* utilisation ``U_k(t)``: base level plus AR(1) fluctuation; attack hops
  add a stress offset to their resource from the attack onset; confounding
  resources fluctuate strongly. Optional ramps override the level.
* slice signals, simulated in chain order::

      x_b(t) = ar x_b(t-1) + e_b(t)
               + sum_conf  g * u~_k(t)                    (confounding)
               + c * A_ak(t) A_bk(t) * x~_a(t - lag)      (attack hop a -> b)

  ``u~`` and ``x~`` are standardised. A hop therefore acts through the
  joint allocation on its resource, and a confounder moves two slices from
  one utilisation series with no link between them.

Measurement noise is Gaussian at ``snr_db`` relative to the clean signal
variance; partial observability drops ticks per slice and bridges the gaps
linearly, flagging them.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .attribution import AttackPath, Hop
from .errors import ValidationError
from .telemetry import (DEFAULT_METRIC, ModelConfig, TelemetryWindow, ingest_telemetry,
                        write_telemetry)

BURN_IN = 60
TEMPLATE_NOTE = ("template defaults (chain length, lag, strength and confounder "
                 "ranges) are arbitrary choices, not published corpus statistics")


@dataclass(frozen=True)
class Confounder:
    resource: int
    slices: tuple[int, int]
    gain: float = 0.8


@dataclass(frozen=True)
class Ramp:
    """Piecewise-linear level: ``start_value`` until ``start_s``, linear to ``end_value`` at ``end_s``."""
    index: int
    start_s: float
    end_s: float
    start_value: float
    end_value: float

    def profile(self, n_ticks: int, tick: float) -> np.ndarray:
        t = np.arange(n_ticks) * tick
        frac = np.clip((t - self.start_s) / max(self.end_s - self.start_s, 1e-12), 0.0, 1.0)
        return self.start_value + frac * (self.end_value - self.start_value)


@dataclass(frozen=True)
class Spike:
    slice: int
    tick: int
    amplitude: float


@dataclass(frozen=True)
class ScenarioSpec:
    n_slices: int = 6
    k_resources: int = 3
    ticks: int = 300
    tick_duration: float = 0.1
    chain: tuple[int, ...] = ()
    lags: tuple[int, ...] = ()
    strengths: tuple[float, ...] = ()
    hop_resources: tuple[int, ...] = ()
    confounders: tuple[Confounder, ...] = ()
    snr_db: float = 30.0
    observability: float = 1.0
    seed: int = 0
    max_in_degree: int = 2
    onset_tick: int = 0
    ar_coef: float = 0.5
    # bounds used by batch_generate when drawing random structures
    chain_nodes: tuple[int, int] = (3, 5)
    lag_range: tuple[int, int] = (1, 3)
    strength_range: tuple[float, float] = (0.3, 3.0)
    confounder_range: tuple[int, int] = (1, 3)
    hop_alloc_range: tuple[float, float] = (0.6, 0.95)
    alloc_range: tuple[float, float] = (0.0, 0.02)
    conf_alloc_range: tuple[float, float] = (0.05, 0.2)
    conf_gain_range: tuple[float, float] = (1.5, 2.5)
    distinct_hop_resources: bool = False
    log_uniform_strengths: bool = True
    conf_avoid_hop_resources: bool = True
    # deterministic overlays (case-study style)
    util_ramps: tuple[Ramp, ...] = ()
    signal_ramps: tuple[Ramp, ...] = ()
    spikes: tuple[Spike, ...] = ()
    base_levels: tuple[tuple[int, float], ...] = ()
    signal_scales: tuple[tuple[int, float], ...] = ()
    util_noise_sd: float = 0.03
    markers: tuple[tuple[str, float], ...] = ()
    slice_names: tuple[str, ...] = ()
    resource_names: tuple[str, ...] = ()
    metric: str = DEFAULT_METRIC

    def __post_init__(self):
        self.validate()

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        n, k = self.n_slices, self.k_resources
        if n < 2 or k < 1:
            raise ValidationError("need n_slices >= 2 and k_resources >= 1")
        if self.ticks < 20:
            raise ValidationError("ticks must be >= 20")
        if not self.tick_duration > 0:
            raise ValidationError("tick_duration must be positive")
        hops = len(self.chain) - 1 if self.chain else 0
        if self.chain:
            if len(self.chain) < 2:
                raise ValidationError("a chain needs at least two slices")
            if len(set(self.chain)) != len(self.chain):
                raise ValidationError("chain slices must be distinct")
            if not all(0 <= s < n for s in self.chain):
                raise ValidationError("chain slice out of range")
        for name in ("lags", "strengths", "hop_resources"):
            if len(getattr(self, name)) != hops:
                raise ValidationError(f"{name} needs one entry per hop ({hops})")
        if any(int(l) != l or l < 1 for l in self.lags):
            raise ValidationError("hop lags must be integers >= 1")
        if not all(0 <= r < k for r in self.hop_resources):
            raise ValidationError("hop resource out of range")
        chain_pairs = set(zip(self.chain, self.chain[1:]))
        for c in self.confounders:
            i, j = c.slices
            if i == j or not (0 <= i < n and 0 <= j < n) or not 0 <= c.resource < k:
                raise ValidationError(f"invalid confounder {c}")
            if (i, j) in chain_pairs or (j, i) in chain_pairs:
                raise ValidationError(f"confounder {c} duplicates a direct chain link")
        indeg: dict[int, int] = {}
        for _, b in chain_pairs:
            indeg[b] = indeg.get(b, 0) + 1
        if indeg and max(indeg.values()) > self.max_in_degree:
            raise ValidationError("in-degree bound exceeded")
        if not 0.0 < self.observability <= 1.0:
            raise ValidationError("observability must lie in (0, 1]")
        if self.onset_tick < 0 or self.onset_tick >= self.ticks:
            raise ValidationError("onset_tick outside the scenario")
        lo, hi = self.chain_nodes
        if not (lo == hi == 0 or 2 <= lo <= hi <= n):
            raise ValidationError("chain_nodes must be (0, 0) or satisfy 2 <= lo <= hi <= n_slices")
        if not 1 <= self.lag_range[0] <= self.lag_range[1]:
            raise ValidationError("lag_range must satisfy 1 <= lo <= hi")
        if not 0 <= self.confounder_range[0] <= self.confounder_range[1]:
            raise ValidationError("confounder_range must satisfy 0 <= lo <= hi")
        for name in ("hop_alloc_range", "alloc_range", "conf_alloc_range"):
            lo_a, hi_a = getattr(self, name)
            if not 0.0 <= lo_a <= hi_a <= 1.0:
                raise ValidationError(f"{name} must lie inside [0, 1]")
        if not 0.0 <= self.ar_coef < 1.0:
            raise ValidationError("ar_coef must lie in [0, 1)")

    # -- (de)serialisation ---------------------------------------------------

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown scenario keys: {sorted(unknown)}")
        kw = dict(data)
        conv = {
            "confounders": lambda v: tuple(Confounder(c["resource"], tuple(c["slices"]),
                                                      c.get("gain", 0.8)) for c in v),
            "util_ramps": lambda v: tuple(Ramp(**r) for r in v),
            "signal_ramps": lambda v: tuple(Ramp(**r) for r in v),
            "spikes": lambda v: tuple(Spike(**s) for s in v),
            "base_levels": lambda v: tuple((int(a), float(b)) for a, b in v),
            "signal_scales": lambda v: tuple((int(a), float(b)) for a, b in v),
            "markers": lambda v: tuple((str(a), float(b)) for a, b in v),
        }
        for key, value in list(kw.items()):
            if key in conv:
                kw[key] = conv[key](value)
            elif isinstance(value, list):
                kw[key] = tuple(value)
        try:
            return cls(**kw)
        except (TypeError, KeyError) as exc:
            raise ValidationError(f"bad scenario spec: {exc}") from None

    @property
    def truth_edges(self) -> frozenset[tuple[int, int]]:
        return frozenset(zip(self.chain, self.chain[1:]))


@dataclass(frozen=True, eq=False)
class Scenario:
    scenario_id: str
    spec: ScenarioSpec
    window: TelemetryWindow
    truth_edges: frozenset
    truth_path: AttackPath
    gaps: np.ndarray
    saturated: int = 0


@dataclass(eq=False)
class TrainingCorpus:
    scenarios: list = field(default_factory=list)
    template: ScenarioSpec | None = None
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def subset(self, indices: Sequence[int]) -> "TrainingCorpus":
        return TrainingCorpus([self.scenarios[i] for i in indices], self.template, self.seed)

    def validate(self) -> None:
        for sc in self.scenarios:
            n = sc.window.n_slices
            for i, j in sc.truth_edges:
                if i == j or not (0 <= i < n and 0 <= j < n):
                    raise ValidationError(f"{sc.scenario_id}: invalid truth edge {(i, j)}")


# -- generation ----------------------------------------------------------------------

def _ar1(rng, n: int, coef: float, sd: float) -> np.ndarray:
    """AR(1) path of length ``n`` with stationary standard deviation ``sd``."""
    e = rng.normal(0.0, sd * np.sqrt(1.0 - coef ** 2), size=n)
    out = np.empty(n)
    out[0] = rng.normal(0.0, sd)
    for t in range(1, n):
        out[t] = coef * out[t - 1] + e[t]
    return out


def _standardise(x: np.ndarray) -> np.ndarray:
    sd = x.std()
    return (x - x.mean()) / sd if sd > 0 else np.zeros_like(x)


def truth_path(spec: ScenarioSpec) -> AttackPath:
    if not spec.chain:
        return AttackPath()
    t = spec.onset_tick * spec.tick_duration
    hops = [Hop(spec.chain[0], t, 1.0)]
    for s, lag in zip(spec.chain[1:], spec.lags):
        t += lag * spec.tick_duration
        hops.append(Hop(s, t, 1.0))
    return AttackPath(tuple(hops), 1.0)


def generate(spec: ScenarioSpec, scenario_id: str = "scenario") -> Scenario:
    """Realise ``spec`` deterministically from ``spec.seed``."""
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence(int(spec.seed) & (2 ** 64 - 1)))
    n, k, T = spec.n_slices, spec.k_resources, spec.ticks
    Tb = T + BURN_IN
    onset = spec.onset_tick + BURN_IN
    dt = spec.tick_duration

    # allocations
    level = rng.uniform(*spec.alloc_range, size=(n, k))
    hop_levels = rng.uniform(*spec.hop_alloc_range, size=(max(len(spec.hop_resources), 1), 2))
    for h, r in enumerate(spec.hop_resources):
        a, b = spec.chain[h], spec.chain[h + 1]
        level[a, r] = max(level[a, r], hop_levels[h, 0])
        level[b, r] = max(level[b, r], hop_levels[h, 1])
    conf_levels = rng.uniform(*spec.conf_alloc_range, size=(max(len(spec.confounders), 1), 2))
    for c_idx, c in enumerate(spec.confounders):
        i, j = c.slices
        level[i, c.resource] = max(level[i, c.resource], conf_levels[c_idx, 0])
        level[j, c.resource] = max(level[j, c.resource], conf_levels[c_idx, 1])
    alloc = np.empty((n, k, Tb))
    for i in range(n):
        for r in range(k):
            alloc[i, r] = level[i, r] * (1.0 + _ar1(rng, Tb, 0.9, 0.05))

    # utilisation
    util_base = rng.uniform(0.2, 0.4, size=k)
    stress_level = rng.uniform(0.3, 0.5, size=k)
    conf_resources = {c.resource for c in spec.confounders}
    util = np.empty((k, Tb))
    ramped = {rp.index: rp for rp in spec.util_ramps}
    for r in range(k):
        sd = 0.1 if r in conf_resources else spec.util_noise_sd
        wobble = _ar1(rng, Tb, 0.9, sd)
        if r in ramped:
            base = np.concatenate([np.full(BURN_IN, ramped[r].start_value),
                                   ramped[r].profile(T, dt)])
        else:
            base = np.full(Tb, util_base[r])
            if r in spec.hop_resources:
                base[onset:] += stress_level[r]
        util[r] = base + wobble

    saturated = int(np.sum((alloc < 0) | (alloc > 1)) + np.sum((util < 0) | (util > 1)))
    alloc = np.clip(alloc, 0.0, 1.0)
    util = np.clip(util, 0.0, 1.0)
    util_std = np.vstack([_standardise(u) for u in util])

    # slice signals
    innov = rng.normal(size=(n, Tb))
    for sp in spec.spikes:
        innov[sp.slice, sp.tick + BURN_IN] += sp.amplitude
    drive = np.zeros((n, Tb))
    for c in spec.confounders:
        for s in c.slices:
            drive[s] += c.gain * util_std[c.resource]
    parent = {}
    for h in range(len(spec.lags)):
        parent[spec.chain[h + 1]] = h
    x = np.zeros((n, Tb))
    order = list(spec.chain) + [s for s in range(n) if s not in spec.chain]
    ar = spec.ar_coef
    for s in order:
        forcing = innov[s] + drive[s]
        if s in parent:
            h = parent[s]
            a, r, lag, c = spec.chain[h], spec.hop_resources[h], spec.lags[h], spec.strengths[h]
            src = _standardise(x[a])
            gate = alloc[a, r] * alloc[s, r]
            coupled = np.zeros(Tb)
            coupled[lag:] = c * gate[lag:] * src[:-lag]
            coupled[:onset] = 0.0
            forcing = forcing + coupled
        xs = np.empty(Tb)
        xs[0] = forcing[0]
        for t in range(1, Tb):
            xs[t] = ar * xs[t - 1] + forcing[t]
        x[s] = xs

    x = x[:, BURN_IN:]
    alloc = alloc[:, :, BURN_IN:]
    util = util[:, BURN_IN:]

    # raw metric units: base level + scale * standardised signal + ramps
    base = rng.uniform(5.0, 20.0, size=n)
    scale = rng.uniform(1.0, 3.0, size=n)
    for i, v in spec.base_levels:
        base[i] = v
    for i, v in spec.signal_scales:
        scale[i] = v
    clean = base[:, None] + scale[:, None] * np.vstack([_standardise(row) for row in x])
    for rp in spec.signal_ramps:
        clean[rp.index] += rp.profile(T, dt)
    noise_sd = clean.std(axis=1) * 10.0 ** (-spec.snr_db / 20.0)
    raw = clean + rng.normal(size=(n, T)) * noise_sd[:, None]

    gaps = np.zeros((n, T))
    if spec.observability < 1.0:
        ticks = np.arange(T)
        for i in range(n):
            keep = rng.random(T) < spec.observability
            keep[0] = keep[-1] = True
            gaps[i] = ~keep
            raw[i] = np.interp(ticks, ticks[keep], raw[i, keep])

    window = TelemetryWindow(raw, alloc, util, tick_duration=dt, window_start=0.0,
                             metric=spec.metric)
    return Scenario(scenario_id, spec, window, spec.truth_edges, truth_path(spec),
                    gaps, saturated)


# -- presets and batches ----------------------------------------------------------------

CASE_STUDY_NAMES = {
    2: "mMTC-iot-gateway", 7: "hybrid-edge-compute", 11: "eMBB-analytics",
    5: "URLLC-control", 9: "hybrid-safety",
}


def case_study_preset(seed: int = 0, snr_db: float = 30.0) -> ScenarioSpec:
    """Industrial IoT attack: mMTC gateway compromise reaching a URLLC controller.

    Each hop's source is a smoothed copy of the previous one, which its
    target's own lags partly anticipate; coupling grows along the chain so
    the hops end up with comparable F evidence.

    Injection at 0 s, cryptomining payload at 2.1 s drives CPU from 15% to 87%
    by 5.2 s, the URLLC slice latency climbs from 12 ms to 48 ms by 5.2 s and a
    safety shutdown follows at 6.7 s. Tick 100 ms, 30 s window, 15 slices.
    """
    chain = (2, 7, 11, 5, 9)
    names = tuple(CASE_STUDY_NAMES.get(i, f"background-{i}") for i in range(15))
    return ScenarioSpec(
        n_slices=15, k_resources=3, ticks=300, tick_duration=0.1,
        chain=chain, lags=(21, 15, 16, 15), strengths=(2.5, 2.5, 3.5, 5.5),
        hop_resources=(0, 1, 0, 2),
        confounders=(Confounder(2, (12, 13), 0.8),),
        snr_db=snr_db, observability=1.0, seed=seed, onset_tick=0,
        chain_nodes=(2, 5), hop_alloc_range=(0.85, 0.85),
        util_ramps=(Ramp(0, 2.1, 5.2, 0.15, 0.87),),
        signal_ramps=(Ramp(5, 2.1, 5.2, 0.0, 33.0),),
        spikes=(Spike(2, 0, 8.0),),
        base_levels=((5, 12.0),), signal_scales=((5, 3.0),),
        util_noise_sd=0.005,
        markers=(("injection", 0.0), ("payload_launch", 2.1),
                 ("latency_peak", 5.2), ("safety_shutdown", 6.7)),
        slice_names=names, resource_names=("cpu", "memory", "network"),
    )


def case_study_config(**overrides) -> ModelConfig:
    """Model configuration for the case study: the first hop lags 21 ticks, so q covers it."""
    base = dict(p=5, q=24, window_ticks=300)
    base.update(overrides)
    return ModelConfig(**base)


def derive_seeds(seed: int, count: int) -> list[int]:
    return [int(s.generate_state(1, np.uint64)[0])
            for s in np.random.SeedSequence(int(seed)).spawn(count)]


def random_structure(template: ScenarioSpec, sub_seed: int) -> ScenarioSpec:
    """Draw a chain and confounders within the template's bounds."""
    rng = np.random.default_rng(np.random.SeedSequence([int(sub_seed), 0x5EED]))
    n, k = template.n_slices, template.k_resources
    lo, hi = template.chain_nodes
    length = int(rng.integers(lo, hi + 1))
    chain = tuple(int(v) for v in rng.permutation(n)[:length])
    hops = max(length - 1, 0)
    lags = tuple(int(v) for v in rng.integers(template.lag_range[0], template.lag_range[1] + 1, size=hops))
    s_lo, s_hi = template.strength_range
    if template.log_uniform_strengths:
        strengths = tuple(float(v) for v in np.exp(rng.uniform(np.log(s_lo), np.log(s_hi), size=hops)))
    else:
        strengths = tuple(float(v) for v in rng.uniform(s_lo, s_hi, size=hops))
    if template.distinct_hop_resources:
        # consecutive hops cycle through a random resource order
        perm = rng.permutation(k)
        hop_res = tuple(int(perm[h % k]) for h in range(hops))
    else:
        hop_res = tuple(int(v) for v in rng.integers(0, k, size=hops))
    clo, chi = template.confounder_range
    n_conf = int(rng.integers(clo, chi + 1))
    chain_pairs = set(zip(chain, chain[1:])) | set(zip(chain[1:], chain))
    outside = [s for s in range(n) if s not in chain]
    confounders = []
    used: set = set()
    for _ in range(n_conf):
        pool = [s for s in outside if s not in used]
        if len(pool) < 2:
            pool = [s for s in range(n) if s not in used]
        if len(pool) < 2:
            break
        for _attempt in range(20):
            i, j = (int(v) for v in rng.choice(pool, size=2, replace=False))
            if (i, j) not in chain_pairs:
                break
        else:
            continue
        used.update((i, j))
        free = [r for r in range(k) if r not in hop_res]
        if template.conf_avoid_hop_resources and free:
            res = int(free[rng.integers(0, len(free))])
        else:
            res = int(rng.integers(0, k))
        confounders.append(Confounder(res, (min(i, j), max(i, j)),
                                      float(rng.uniform(*template.conf_gain_range))))
    return replace(template, chain=chain, lags=lags, strengths=strengths,
                   hop_resources=hop_res, confounders=tuple(confounders), seed=int(sub_seed))


def batch_generate(template: ScenarioSpec, count: int, seed: int,
                   out_dir: str | Path | None = None, *, randomize: bool = True) -> TrainingCorpus:
    """``count`` scenarios with independent sub-seeds.

    With ``randomize`` each scenario draws its own chain and confounders from
    the template bounds; otherwise the template structure is reused and only
    the noise realisation changes.
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    scenarios = []
    for idx, sub in enumerate(derive_seeds(seed, count)):
        spec = random_structure(template, sub) if randomize else replace(template, seed=sub)
        scenarios.append(generate(spec, f"scenario_{idx:04d}"))
    corpus = TrainingCorpus(scenarios, template, seed)
    if out_dir is not None:
        write_corpus(corpus, out_dir)
    return corpus


# -- on-disk layout ------------------------------------------------------------------------

SCENARIO_FILES = ("signals.csv", "allocations.csv", "ground_truth.json", "manifest.json")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _path_json(path: AttackPath) -> list:
    return [{"slice": h.slice, "time": h.time} for h in path.hops]


def write_scenario(scenario: Scenario, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_telemetry(scenario.window, out / "signals.csv", out / "allocations.csv",
                    extra_columns={"gap": scenario.gaps})
    truth = {
        "scenario_id": scenario.scenario_id,
        "seed": scenario.spec.seed,
        "edges": sorted([list(e) for e in scenario.truth_edges]),
        "path": _path_json(scenario.truth_path),
        "spec": scenario.spec.to_dict(),
    }
    (out / "ground_truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    manifest = {
        "scenario_id": scenario.scenario_id,
        "seed": scenario.spec.seed,
        "files": {name: _sha256(out / name) for name in SCENARIO_FILES[:3]},
        "tick_duration": scenario.window.tick_duration,
        "metric": scenario.window.metric,
        "saturated_entries": scenario.saturated,
        "saturation_flag": scenario.saturated > 0,
        "gap_ticks": int(scenario.gaps.sum()),
        "note": TEMPLATE_NOTE,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return out


def write_corpus(corpus: TrainingCorpus, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for sc in corpus.scenarios:
        write_scenario(sc, out / sc.scenario_id)
        entries.append({"id": sc.scenario_id, "dir": sc.scenario_id, "seed": sc.spec.seed,
                        "chain_nodes": len(sc.spec.chain),
                        "confounders": len(sc.spec.confounders)})
    doc = {"seed": corpus.seed,
           "template": None if corpus.template is None else corpus.template.to_dict(),
           "note": TEMPLATE_NOTE, "scenarios": entries}
    path = out / "corpus.json"
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def load_scenario(directory: str | Path, config: ModelConfig | None = None) -> Scenario:
    d = Path(directory)
    truth = json.loads((d / "ground_truth.json").read_text())
    spec = ScenarioSpec.from_dict(truth["spec"])
    config = config or ModelConfig()
    window = ingest_telemetry(d / "signals.csv", d / "allocations.csv",
                              replace(config, metric=spec.metric),
                              tick_duration=spec.tick_duration)
    edges = frozenset(tuple(e) for e in truth["edges"])
    hops = tuple(Hop(h["slice"], h["time"], 1.0) for h in truth["path"])
    gaps = np.zeros((window.n_slices, window.n_ticks))
    return Scenario(truth.get("scenario_id", d.name), spec, window, edges,
                    AttackPath(hops, 1.0 if hops else 0.0), gaps)


def load_corpus(manifest: str | Path, config: ModelConfig | None = None) -> TrainingCorpus:
    manifest = Path(manifest)
    try:
        doc = json.loads(manifest.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{manifest}:{exc.lineno}: {exc.msg}") from None
    root = manifest.parent
    scenarios = [load_scenario(root / e["dir"], config) for e in doc["scenarios"]]
    template = ScenarioSpec.from_dict(doc["template"]) if doc.get("template") else None
    corpus = TrainingCorpus(scenarios, template, doc.get("seed"))
    corpus.validate()
    return corpus
