"""Resource-aware causal attack-path attribution across network slices."""
from __future__ import annotations

__version__ = "0.1.0"

from .attribution import (AttackPath, AttributionResult, CausalEdge, CausalGraph, Hop,
                          attribute, extract_path, to_report)
from .errors import (AlignmentError, DivergenceError, NumericalError, RangeViolationError,
                     RankDeficientError, SliceCauseError, ValidationError)
from .evaluation import (EvalReport, ablation_run, bench_latency, correlation_baseline,
                         robustness_sweep, score_edges, score_path)
from .learning import fit, log_likelihood, sensitivity_sweep
from .simulator import (Scenario, ScenarioSpec, TrainingCorpus, batch_generate,
                        case_study_preset, generate)
from .telemetry import ModelConfig, TelemetryWindow, ingest_telemetry
from .theta import ThetaParams

__all__ = [
    "AlignmentError", "AttackPath", "AttributionResult", "CausalEdge", "CausalGraph",
    "DivergenceError", "EvalReport", "Hop", "ModelConfig", "NumericalError",
    "RangeViolationError", "RankDeficientError", "Scenario", "ScenarioSpec",
    "SliceCauseError", "TelemetryWindow", "ThetaParams", "TrainingCorpus",
    "ValidationError", "ablation_run", "attribute", "batch_generate", "bench_latency",
    "case_study_preset", "correlation_baseline", "extract_path", "fit", "generate",
    "ingest_telemetry", "log_likelihood", "robustness_sweep", "score_edges", "score_path",
    "sensitivity_sweep", "to_report",
]
