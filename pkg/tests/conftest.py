from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slicecause.simulator import ScenarioSpec, generate
from slicecause.telemetry import TelemetryWindow

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_window(raw, k=1, alloc=None, util=None, **kw) -> TelemetryWindow:
    raw = np.asarray(raw, dtype=float)
    n, t = raw.shape
    if util is None:
        util = np.full((k, t), 0.5)
    if alloc is None:
        alloc = np.full((n, np.shape(util)[0], t), 0.1)
    return TelemetryWindow(raw, alloc, util, **kw)


@pytest.fixture
def chain_window():
    """Three slices, planted 0 -> 1 -> 2 chain on two resources."""
    spec = ScenarioSpec(n_slices=4, k_resources=2, ticks=300, chain=(0, 1, 2), lags=(2, 3),
                        strengths=(2.0, 2.0), hop_resources=(0, 1), seed=11,
                        chain_nodes=(3, 3), hop_alloc_range=(0.9, 0.9))
    return generate(spec)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
