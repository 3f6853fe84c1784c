"""Telemetry data model, normalisation, windowing and CSV ingestion.

Two CSV files describe a telemetry stream:

* signals: ``tick,slice_id,<metric>...`` -- one row per (tick, slice)
* allocations: ``tick,slice_id,resource_id,allocation,utilization`` -- one
  row per (tick, slice, resource); utilisation is repeated for every slice
  and must agree across slices at a tick.

Each slice is reduced to one scalar series through a configured metric
column (``latency_ms`` by default).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AlignmentError, RangeViolationError, ValidationError
from .theta import ThetaParams

DEFAULT_METRIC = "latency_ms"
SIGNAL_FIXED = ("tick", "slice_id")
ALLOCATION_HEADER = ("tick", "slice_id", "resource_id", "allocation", "utilization")


def fmt_decimal(x: float) -> str:
    """17 significant digits: always round-trips an IEEE double."""
    return np.format_float_positional(float(x), precision=17, unique=False,
                                      fractional=False, trim="k")


def zscore_normalize(series: Sequence[float]) -> np.ndarray:
    """Zero mean, unit sample standard deviation (ddof=1).

    A constant series maps to all zeros.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValidationError("zscore_normalize expects a 1-D series")
    if x.size < 2:
        raise ValidationError("need at least 2 samples to normalise")
    if not np.all(np.isfinite(x)):
        raise ValidationError("series contains non-finite values")
    centred = x - x.mean()
    sd = centred.std(ddof=1)
    scale = max(1.0, float(np.max(np.abs(x))))
    if sd <= 1e-12 * scale:
        return np.zeros_like(x)
    return centred / sd


def _zscore_rows(m: np.ndarray) -> np.ndarray:
    return np.vstack([zscore_normalize(row) for row in m]) if len(m) else m.copy()


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TelemetryWindow:
    """Aligned slice signals, allocations and utilisation over ``T`` ticks.

    ``raw_signals`` keeps the metric in its original units; ``slice_signals``
    is the per-slice z-scored version the regressions consume.
    """

    raw_signals: np.ndarray            # N x T
    allocations: np.ndarray            # N x K x T
    utilization: np.ndarray            # K x T
    tick_duration: float = 0.1         # seconds
    window_start: float = 0.0          # seconds
    slice_ids: tuple = ()
    resource_ids: tuple = ()
    metric: str = DEFAULT_METRIC
    slice_signals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        raw = np.asarray(self.raw_signals, dtype=float)
        alloc = np.asarray(self.allocations, dtype=float)
        util = np.asarray(self.utilization, dtype=float)
        if raw.ndim != 2:
            raise ValidationError("raw_signals must be N x T")
        n, t = raw.shape
        if alloc.ndim != 3 or util.ndim != 2:
            raise ValidationError("allocations must be N x K x T, utilization K x T")
        k = util.shape[0]
        if alloc.shape != (n, k, t) or util.shape != (k, t):
            raise AlignmentError(
                f"shape mismatch: signals {raw.shape}, allocations {alloc.shape}, "
                f"utilization {util.shape}")
        if n < 2:
            raise ValidationError(f"need N >= 2 slices, got {n}")
        if k < 1:
            raise ValidationError("need K >= 1 resources")
        for name, arr in (("raw_signals", raw), ("allocations", alloc),
                          ("utilization", util)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite values")
        for name, arr in (("allocation", alloc), ("utilization", util)):
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                bad = arr.min() if arr.min() < 0.0 else arr.max()
                raise RangeViolationError(f"{name} entry {bad!r} outside [0, 1]")
        if not self.tick_duration > 0:
            raise ValidationError("tick_duration must be positive")
        slice_ids = tuple(self.slice_ids) or tuple(range(n))
        resource_ids = tuple(self.resource_ids) or tuple(range(k))
        if len(slice_ids) != n or len(resource_ids) != k:
            raise ValidationError("id tuples do not match array shapes")
        object.__setattr__(self, "raw_signals", _frozen(raw))
        object.__setattr__(self, "allocations", _frozen(alloc))
        object.__setattr__(self, "utilization", _frozen(util))
        object.__setattr__(self, "slice_ids", slice_ids)
        object.__setattr__(self, "resource_ids", resource_ids)
        object.__setattr__(self, "tick_duration", float(self.tick_duration))
        object.__setattr__(self, "window_start", float(self.window_start))
        object.__setattr__(self, "slice_signals", _frozen(_zscore_rows(raw)))

    @property
    def n_slices(self) -> int:
        return self.raw_signals.shape[0]

    @property
    def n_resources(self) -> int:
        return self.utilization.shape[0]

    @property
    def n_ticks(self) -> int:
        return self.raw_signals.shape[1]

    def conditioning_regressors(self) -> np.ndarray:
        """Z-scored utilisation rows (K x T); constant rows become zeros."""
        return _zscore_rows(np.asarray(self.utilization))

    def validate_for(self, config: "ModelConfig") -> None:
        """Check the sample-size floor for the F-test at this config."""
        config.check_resources(self.n_resources)
        lag = max(config.p, config.q)
        dof = self.n_ticks - lag - config.p - config.q - self.n_resources - 1
        if dof < 1:
            raise ValidationError(
                f"T={self.n_ticks} too short for p={config.p}, q={config.q}, "
                f"K={self.n_resources}: F denominator dof would be {dof}")

    def reorder_slices(self, order: Sequence[int]) -> "TelemetryWindow":
        order = list(order)
        if sorted(order) != list(range(self.n_slices)):
            raise ValidationError("order must be a permutation of slice indices")
        return replace(self, raw_signals=self.raw_signals[order],
                       allocations=self.allocations[order],
                       slice_ids=tuple(self.slice_ids[i] for i in order))

    def equals(self, other: "TelemetryWindow") -> bool:
        """Exact equality on every numeric and identifying field."""
        return (self.slice_ids == other.slice_ids
                and self.resource_ids == other.resource_ids
                and self.tick_duration == other.tick_duration
                and self.window_start == other.window_start
                and self.metric == other.metric
                and np.array_equal(self.raw_signals, other.raw_signals)
                and np.array_equal(self.allocations, other.allocations)
                and np.array_equal(self.utilization, other.utilization))


@dataclass(frozen=True)
class ModelConfig:
    """Attribution hyper-parameters.

    ``theta=None`` means "defaults for the window's resource count"
    (uniform weights, thresholds 0.5, omega1 0.67).
    """

    p: int = 5
    q: int = 5
    window_ticks: int = 300
    tau_causal: float = 0.42
    alpha: float = 0.05
    theta: ThetaParams | None = None
    metric: str = DEFAULT_METRIC
    conditioned: bool = True
    bh_monotone: bool = False
    sigmoid_slope: float = 1.0
    bootstrap_reps: int = 200
    onset_threshold: float = 2.0
    seed: int = 0

    def __post_init__(self):
        for name in ("p", "q", "window_ticks"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if not 0.0 < self.tau_causal < 1.0:
            raise ValidationError(f"tau_causal must lie in (0, 1), got {self.tau_causal}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.sigmoid_slope > 0:
            raise ValidationError("sigmoid_slope must be positive")
        if self.bootstrap_reps < 0:
            raise ValidationError("bootstrap_reps must be >= 0")

    def check_resources(self, k: int) -> None:
        if self.window_ticks <= self.p + self.q + k + 1:
            raise ValidationError(
                f"window_ticks={self.window_ticks} must exceed p+q+K+1={self.p + self.q + k + 1}")
        if self.theta is not None and self.theta.k != k:
            raise ValidationError(f"theta has {self.theta.k} resources, window has {k}")

    def theta_for(self, k: int) -> ThetaParams:
        return self.theta if self.theta is not None else ThetaParams.default(k)

    def replace(self, **changes) -> "ModelConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "theta"}
        out["theta"] = None if self.theta is None else self.theta.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if kwargs.get("theta") is not None:
            kwargs["theta"] = ThetaParams.from_dict(kwargs["theta"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ValidationError(str(exc)) from None


# -- windowing ----------------------------------------------------------------

def extract_window(stream: TelemetryWindow, start_tick: int,
                   config: ModelConfig) -> TelemetryWindow:
    """Contiguous ``window_ticks`` slice of the stream, re-normalised."""
    w = config.window_ticks
    if start_tick < 0 or start_tick + w > stream.n_ticks:
        raise ValidationError(
            f"window [{start_tick}, {start_tick + w}) outside stream of "
            f"{stream.n_ticks} ticks")
    sl = slice(start_tick, start_tick + w)
    return replace(stream,
                   raw_signals=stream.raw_signals[:, sl],
                   allocations=stream.allocations[:, :, sl],
                   utilization=stream.utilization[:, sl],
                   window_start=stream.window_start + start_tick * stream.tick_duration)


# -- CSV ingestion ---------------------------------------------------------------

def _parse_id(value: str):
    try:
        return int(value)
    except ValueError:
        return value


def _parse_float(value: str, where: str) -> float:
    try:
        x = float(value)
    except ValueError:
        raise ValidationError(f"{where}: not a number: {value!r}") from None
    if not math.isfinite(x):
        raise ValidationError(f"{where}: non-finite value {value!r}")
    return x


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    return header, rows


def read_signals(path: str | Path, metric: str = DEFAULT_METRIC):
    """Return ``(slice_ids, values N x T)`` for one metric column."""
    path = Path(path)
    header, rows = _read_rows(path)
    if tuple(header[:2]) != SIGNAL_FIXED or len(header) < 3:
        raise ValidationError(
            f"{path}:1: signal header must start with 'tick,slice_id,<metric>', got {header}")
    if metric not in header[2:]:
        raise ValidationError(f"{path}:1: metric column {metric!r} not in {header[2:]}")
    col = header.index(metric)
    slice_order: dict = {}
    cells: dict = {}
    max_tick = -1
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields")
        tick = int(_parse_float(row[0], f"{path}:{lineno}"))
        sid = _parse_id(row[1].strip())
        slice_order.setdefault(sid, len(slice_order))
        key = (tick, sid)
        if key in cells:
            raise ValidationError(f"{path}:{lineno}: duplicate row for tick {tick}, slice {sid}")
        cells[key] = _parse_float(row[col], f"{path}:{lineno}")
        max_tick = max(max_tick, tick)
    n_ticks = max_tick + 1
    slices = tuple(slice_order)
    if len(cells) != n_ticks * len(slices):
        raise AlignmentError(f"{path}: ticks are not dense from 0 for every slice")
    values = np.empty((len(slices), n_ticks))
    for (tick, sid), v in cells.items():
        if tick < 0:
            raise AlignmentError(f"{path}: negative tick {tick}")
        values[slice_order[sid], tick] = v
    return slices, values


def read_allocations(path: str | Path):
    """Return ``(slice_ids, resource_ids, alloc N x K x T, util K x T)``."""
    path = Path(path)
    header, rows = _read_rows(path)
    if tuple(header) != ALLOCATION_HEADER:
        raise ValidationError(
            f"{path}:1: allocation header must be {','.join(ALLOCATION_HEADER)}, got {header}")
    slice_order: dict = {}
    res_order: dict = {}
    alloc_cells: dict = {}
    util_cells: dict = {}
    max_tick = -1
    for lineno, row in enumerate(rows, start=2):
        if len(row) != 5:
            raise ValidationError(f"{path}:{lineno}: expected 5 fields")
        where = f"{path}:{lineno}"
        tick = int(_parse_float(row[0], where))
        sid = _parse_id(row[1].strip())
        rid = _parse_id(row[2].strip())
        a = _parse_float(row[3], where)
        u = _parse_float(row[4], where)
        if not 0.0 <= a <= 1.0:
            raise RangeViolationError(f"{where}: allocation {a!r} outside [0, 1]")
        if not 0.0 <= u <= 1.0:
            raise RangeViolationError(f"{where}: utilization {u!r} outside [0, 1]")
        slice_order.setdefault(sid, len(slice_order))
        res_order.setdefault(rid, len(res_order))
        key = (tick, sid, rid)
        if key in alloc_cells:
            raise ValidationError(f"{where}: duplicate row {key}")
        alloc_cells[key] = a
        prev = util_cells.setdefault((tick, rid), u)
        if prev != u:
            raise ValidationError(
                f"{where}: utilization of resource {rid} at tick {tick} differs across slices")
        max_tick = max(max_tick, tick)
    n_ticks = max_tick + 1
    n, k = len(slice_order), len(res_order)
    if len(alloc_cells) != n * k * n_ticks:
        raise AlignmentError(f"{path}: rows are not dense over (tick, slice, resource)")
    alloc = np.empty((n, k, n_ticks))
    util = np.empty((k, n_ticks))
    for (tick, sid, rid), a in alloc_cells.items():
        alloc[slice_order[sid], res_order[rid], tick] = a
    for (tick, rid), u in util_cells.items():
        util[res_order[rid], tick] = u
    return tuple(slice_order), tuple(res_order), alloc, util


def ingest_telemetry(signal_file: str | Path, allocation_file: str | Path,
                     config: ModelConfig | None = None, *,
                     tick_duration: float = 0.1,
                     window_start: float = 0.0) -> TelemetryWindow:
    """Load and validate a telemetry stream from the two CSV files."""
    config = config or ModelConfig()
    slices, raw = read_signals(signal_file, config.metric)
    a_slices, resources, alloc, util = read_allocations(allocation_file)
    if raw.shape[1] != alloc.shape[2]:
        raise AlignmentError(
            f"signal file has {raw.shape[1]} ticks, allocation file has {alloc.shape[2]}")
    if set(slices) != set(a_slices):
        raise AlignmentError("slice ids differ between signal and allocation files")
    order = [a_slices.index(s) for s in slices]
    window = TelemetryWindow(raw, alloc[order], util, tick_duration=tick_duration,
                             window_start=window_start, slice_ids=slices,
                             resource_ids=resources, metric=config.metric)
    window.validate_for(config)
    return window


def write_telemetry(window: TelemetryWindow, signal_file: str | Path,
                    allocation_file: str | Path,
                    extra_columns: dict[str, np.ndarray] | None = None) -> None:
    """Serialise ``window`` (raw units) in the ingestion CSV schemas."""
    extra_columns = extra_columns or {}
    names = [window.metric, *extra_columns]
    with open(signal_file, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*SIGNAL_FIXED, *names])
        for t in range(window.n_ticks):
            for i, sid in enumerate(window.slice_ids):
                extras = []
                for col in extra_columns.values():
                    v = col[i, t]
                    extras.append(str(int(v)) if float(v).is_integer() else fmt_decimal(v))
                w.writerow([t, sid, fmt_decimal(window.raw_signals[i, t]), *extras])
    with open(allocation_file, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ALLOCATION_HEADER)
        for t in range(window.n_ticks):
            for i, sid in enumerate(window.slice_ids):
                for k, rid in enumerate(window.resource_ids):
                    w.writerow([t, sid, rid, fmt_decimal(window.allocations[i, k, t]),
                                fmt_decimal(window.utilization[k, t])])
