"""Command-line entry point: ``slicecause {simulate,attribute,learn,evaluate,bench}``.

Exit codes: 0 success, 2 validation error, 3 IO error, 4 numerical failure.
Every JSON report embeds the effective configuration and seed; the only
run-to-run varying content lives under a top-level ``timing`` key.
"""
from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .attribution import attribute, extract_path, to_report
from .errors import DivergenceError, NumericalError, ValidationError
from .evaluation import (AXES, VARIANTS, ablation_run, bench_latency, corpus_evidence,
                         corpus_metrics, correlation_baseline, cross_fit_thetas,
                         score_edges, score_path, robustness_sweep, sweep_trend)
from .learning import DEFAULT_LAMBDA, fit_trace, sensitivity_sweep
from .simulator import (ScenarioSpec, batch_generate, case_study_config, case_study_preset,
                        generate, load_corpus, write_corpus, write_scenario)
from .telemetry import DEFAULT_METRIC, ModelConfig, ingest_telemetry
from .theta import ThetaParams

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4
SENSITIVITY_GRID = tuple(round(0.05 * i, 2) for i in range(21))


# -- config plumbing ---------------------------------------------------------------------

def _key_line(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for n, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return n
    return None


def load_json_document(path: str | Path) -> tuple[dict, str]:
    """Parse a JSON object; syntax errors carry ``path:line:col``."""
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}:1: expected a JSON object")
    return doc, text


def _anchored(path, text: str, doc: dict, exc: Exception) -> ValidationError:
    """Re-raise a schema error pointing at the line of the offending key."""
    msg = str(exc)
    hits = [(m.start(), key) for key in doc
            if (m := re.search(rf"\b{re.escape(key)}\b", msg))]
    line = _key_line(text, min(hits)[1]) or 1 if hits else 1
    return ValidationError(f"{path}:{line}: {msg}")


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_overrides(items: Sequence[str] | None) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = _parse_value(value)
    return out


def build_config(args, base: ModelConfig | None = None) -> ModelConfig:
    """Defaults < preset < config file < ``--set`` flags < ``--seed``."""
    data = (base or ModelConfig()).to_dict()
    if getattr(args, "config", None):
        doc, text = load_json_document(args.config)
        unknown = set(doc) - set(data)
        if unknown:
            key = sorted(unknown)[0]
            raise ValidationError(f"{args.config}:{_key_line(text, key) or 1}: unknown config key {key!r}")
        data.update(doc)
        try:
            ModelConfig.from_dict(data)
        except ValidationError as exc:
            raise _anchored(args.config, text, doc, exc) from None
    data.update(parse_overrides(getattr(args, "set", None)))
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    config = ModelConfig.from_dict(data)
    return config


def load_theta(path: str | None, k: int | None = None) -> ThetaParams | None:
    """Theta from file, or ``None`` (defaults) with a warning when absent."""
    if path is None or not Path(path).exists():
        what = "no theta file given" if path is None else f"theta file {path} not found"
        print(f"warning: {what}; using defaults (uniform weights, tau 0.5, omega1 0.67)",
              file=sys.stderr)
        return None
    theta = ThetaParams.load(path)
    if k is not None and theta.k != k:
        raise ValidationError(f"{path}: theta has {theta.k} resources, data has {k}")
    return theta


def echo_config(config: ModelConfig) -> None:
    print("effective config: " + json.dumps(config.to_dict(), sort_keys=True), file=sys.stderr)


def write_json(doc: dict, out: str | None) -> None:
    payload = json.dumps(doc, indent=2) + "\n"
    if out is None or out == "-":
        sys.stdout.write(payload)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(payload)


def write_csv(path: str | Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# -- simulate ----------------------------------------------------------------------------

def load_spec(path: str) -> ScenarioSpec:
    doc, text = load_json_document(path)
    try:
        return ScenarioSpec.from_dict(doc)
    except (ValidationError, TypeError, ValueError) as exc:
        raise _anchored(path, text, doc, exc) from None


def cmd_simulate(args) -> int:
    if args.preset == "case-study":
        spec = case_study_preset(seed=args.seed if args.seed is not None else 0)
    elif args.spec:
        spec = load_spec(args.spec)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
    else:
        spec = ScenarioSpec(seed=args.seed if args.seed is not None else 0)
    overrides = parse_overrides(args.set)
    if overrides:
        data = spec.to_dict()
        data.update(overrides)
        spec = ScenarioSpec.from_dict(data)
    if args.count is None:
        scenario = generate(spec, Path(args.out).name or "scenario")
        write_scenario(scenario, args.out)
        print(f"wrote scenario to {args.out} (seed {spec.seed})", file=sys.stderr)
    else:
        corpus = batch_generate(spec, args.count, spec.seed)
        path = write_corpus(corpus, args.out)
        print(f"wrote {len(corpus)} scenarios, manifest {path} (seed {spec.seed})", file=sys.stderr)
    return EXIT_OK


# -- attribute ---------------------------------------------------------------------------

def _scenario_meta(directory: Path) -> dict:
    manifest = directory / "manifest.json"
    if manifest.exists():
        doc, _ = load_json_document(manifest)
        return doc
    return {}


def _graph_json(graph, ids) -> list:
    return [{"source": ids[e.source], "target": ids[e.target], "gamma": e.gamma,
             "p_value": e.p_value, "lag": e.lag} for _, e in sorted(graph.edges.items())]


def timeline_rows(window, path) -> tuple[list, list]:
    """Per-tick raw signals of the path slices and every utilisation series."""
    nodes = list(path.nodes)
    header = ["time_s"] + [f"signal:{window.slice_ids[i]}" for i in nodes] + \
             [f"util:{r}" for r in window.resource_ids] + ["hop_marker"]
    marks = {}
    for h in path.hops:
        tick = int(round((h.time - window.window_start) / window.tick_duration))
        marks.setdefault(tick, window.slice_ids[h.slice])
    rows = []
    for t in range(window.n_ticks):
        rows.append([window.window_start + t * window.tick_duration,
                     *[window.raw_signals[i, t] for i in nodes],
                     *[window.utilization[k, t] for k in range(window.n_resources)],
                     marks.get(t, "")])
    return header, rows


def cmd_attribute(args) -> int:
    base = case_study_config() if args.preset == "case-study" else None
    config = build_config(args, base)
    directory = Path(args.scenario)
    if not directory.is_dir():
        raise FileNotFoundError(f"scenario directory {directory} does not exist")
    meta = _scenario_meta(directory)
    if "metric" in meta and config.metric == DEFAULT_METRIC:
        config = config.replace(metric=meta["metric"])
    window = ingest_telemetry(directory / "signals.csv", directory / "allocations.csv", config,
                              tick_duration=float(meta.get("tick_duration", args.tick_duration)))
    theta = load_theta(args.theta, window.n_resources)
    if theta is not None:
        config = config.replace(theta=theta)
    echo_config(config)
    result = attribute(window, config, with_confidence=not args.no_confidence)
    extra = {"scenario": str(directory.name)}
    truth_file = directory / "ground_truth.json"
    if truth_file.exists():
        truth, _ = load_json_document(truth_file)
        edges = {tuple(e) for e in truth.get("edges", [])}
        truth_nodes = [h["slice"] for h in truth.get("path", [])]
        score = score_edges(result.graph, edges)
        exact, overlap = score_path(result.path.nodes, truth_nodes)
        extra["ground_truth_comparison"] = {
            "path_exact_match": exact, "path_hop_overlap": overlap,
            "edge_counts": {"tp": score.tp, "fp": score.fp, "fn": score.fn, "tn": score.tn}}
    if args.compare_baseline == "correlation":
        graph = correlation_baseline(window, config)
        path = extract_path(graph)
        extra["baseline"] = {"method": "correlation", "edges": _graph_json(graph, window.slice_ids),
                             "path": [window.slice_ids[i] for i in path.nodes]}
    report = to_report(result, window, extra)
    write_json(report, args.out)
    if args.plot_data:
        header, rows = timeline_rows(window, result.path)
        write_csv(Path(args.plot_data) / "timeline.csv", header, rows)
    hops = " -> ".join(str(window.slice_ids[i]) for i in result.path.nodes) or "(no attack path)"
    print(f"path: {hops}", file=sys.stderr)
    return EXIT_OK


# -- learn -------------------------------------------------------------------------------

def cmd_learn(args) -> int:
    config = build_config(args)
    echo_config(config)
    corpus = load_corpus(args.manifest, config)
    out = Path(args.out)
    log = Path(args.log) if args.log else out.with_suffix(".log.csv")
    meta = {"config": config.to_dict(), "seed": config.seed, "lambda": args.lam,
            "max_iters": args.max_iters, "n_scenarios": len(corpus)}
    try:
        trace = fit_trace(corpus, args.lam, args.max_iters, config.seed, config=config)
    except DivergenceError as exc:
        if exc.last_finite is not None:
            write_json({**exc.last_finite.to_dict(), **meta, "diverged": True,
                        "error": str(exc)}, str(out))
        raise
    write_json({**trace.theta.to_dict(), **meta, "iterations": trace.iterations,
                "converged": trace.converged, "log_likelihood": trace.history[-1]}, str(out))
    write_csv(log, ["iteration", "log_likelihood"], list(enumerate(trace.history)))
    print(f"theta written to {out}; {trace.iterations} iterations, converged={trace.converged}",
          file=sys.stderr)
    return EXIT_OK


# -- evaluate ----------------------------------------------------------------------------

def _report_payload(rep, label: str) -> dict:
    d = rep.to_dict(include_timing=False)
    d["method"] = label
    return d


def _perf_row(label: str, rep) -> list:
    lat = rep.latency_summary()
    return [label, rep.accuracy, rep.precision, rep.recall, rep.fdr, lat.get("mean", 0.0)]


PERF_HEADER = ["method", "accuracy", "precision", "recall", "fdr", "latency_mean_ms"]


def cmd_evaluate(args) -> int:
    config = build_config(args)
    if args.sweep:
        return _evaluate_sweep(args, config)
    if not args.manifest:
        raise ValidationError("evaluate needs a corpus manifest unless --sweep is given")
    corpus = load_corpus(args.manifest, config)
    k = corpus.scenarios[0].window.n_resources
    doc: dict = {"manifest": str(args.manifest), "n_scenarios": len(corpus), "seed": config.seed}
    timing: dict = {}
    perf_rows = []
    if args.ablation:
        echo_config(config)
        fixed = load_theta(args.theta, k) if args.theta else None
        table = ablation_run(corpus, config, folds=args.folds or 5, seed=config.seed,
                             lam=args.lam, max_iters=args.max_iters, fixed_theta=fixed,
                             jobs=args.jobs)
        doc["config"] = config.to_dict()
        doc["ablation"] = table.to_dict(include_timing=False)
        timing["ablation"] = {v: table.reports[v].latency_summary() for v in VARIANTS}
        perf_rows += [_perf_row(v, table.reports[v]) for v in VARIANTS]
        theta = table.thetas[0] if table.thetas else ThetaParams.default(k)
        evidence = None
    else:
        evidence = corpus_evidence(corpus, config, args.jobs)
        if args.folds:
            per_sc, fold_thetas = cross_fit_thetas(corpus, config, evidence, args.folds,
                                                   config.seed, args.lam, args.max_iters)
            echo_config(config)
            rep = corpus_metrics(corpus, config, evidence,
                                 configs=[config.replace(theta=t) for t in per_sc])
            doc["folds"] = args.folds
            doc["learned_theta"] = [t.to_dict() for t in fold_thetas]
            theta = fold_thetas[0]
        else:
            theta = load_theta(args.theta, k)
            if theta is not None:
                config = config.replace(theta=theta)
            echo_config(config)
            rep = corpus_metrics(corpus, config, evidence)
            theta = config.theta_for(k)
        doc["config"] = config.to_dict()
        doc["theta"] = theta.to_dict()
        doc["attribution"] = _report_payload(rep, "attribution")
        timing["attribution"] = {"latency_ms": rep.latency_summary(),
                                 "per_phase_ms": rep.per_phase_timing}
        perf_rows.append(_perf_row("attribution", rep))
    if args.compare_baseline == "correlation" or args.plot_data:
        base = corpus_metrics(corpus, config, baseline=True)
        doc["baseline"] = _report_payload(base, "correlation")
        timing["baseline"] = {"latency_ms": base.latency_summary()}
        perf_rows.append(_perf_row("correlation", base))
    if args.sensitivity or args.plot_data:
        grid = args.omega1_grid or list(SENSITIVITY_GRID)
        sens = sensitivity_sweep(corpus, grid, theta, config.replace(theta=theta), evidence)
        doc["sensitivity"] = [{"omega1": om, "accuracy": acc} for om, acc in sens]
    doc["timing"] = timing
    write_json(doc, args.out)
    if args.plot_data:
        pd = Path(args.plot_data)
        write_csv(pd / "performance.csv", PERF_HEADER, perf_rows)
        write_csv(pd / "sensitivity.csv", ["omega1", "accuracy"],
                  [[s["omega1"], s["accuracy"]] for s in doc["sensitivity"]])
    return EXIT_OK


SWEEP_COLUMNS = ["axis", "level", "accuracy", "precision", "recall", "fdr", "path_exact",
                 "latency_mean_ms"]


def _evaluate_sweep(args, config: ModelConfig) -> int:
    if args.sweep not in AXES:
        raise ValidationError(f"unknown sweep axis {args.sweep!r}; choose from {AXES}")
    if not args.grid:
        raise ValidationError("--sweep needs --grid")
    template = load_spec(args.template) if args.template else ScenarioSpec()
    theta = load_theta(args.theta) if args.theta else None
    echo_config(config)
    rows = robustness_sweep(template, args.sweep, args.grid, count=args.count, seed=config.seed,
                            config=config, theta=theta, jobs=args.jobs)
    direction = "increasing" if args.sweep in ("snr", "observability") else "decreasing"
    rho, p = sweep_trend(rows, direction)
    doc = {"config": config.to_dict(), "seed": config.seed, "template": template.to_dict(),
           "axis": args.sweep, "count": args.count,
           "rows": [{k: r[k] for k in SWEEP_COLUMNS if k != "latency_mean_ms"} for r in rows],
           "trend": {"direction": f"accuracy {direction} in level", "spearman_rho": rho,
                     "p_value": p},
           "timing": {"latency_mean_ms": [r["latency_mean_ms"] for r in rows]}}
    write_json(doc, args.out)
    csv_rows = [[r[k] for k in SWEEP_COLUMNS] for r in rows]
    if args.csv:
        write_csv(args.csv, SWEEP_COLUMNS, csv_rows)
    if args.plot_data:
        write_csv(Path(args.plot_data) / f"sweep_{args.sweep}.csv", SWEEP_COLUMNS, csv_rows)
    return EXIT_OK


# -- bench -------------------------------------------------------------------------------

BENCH_COLUMNS = ["n", "ticks", "mean_ms", "sd_ms", "p95_ms", "pairwise_mean_ms", "pairwise_sd_ms"]


def cmd_bench(args) -> int:
    config = build_config(args)
    echo_config(config)
    res = bench_latency(args.n, config, args.repeats, ticks=args.ticks, seed=config.seed,
                        with_confidence=not args.no_confidence)
    doc = {"config": config.to_dict(), "seed": config.seed, "n_grid": args.n,
           "repeats": args.repeats, "ticks": args.ticks, "timing": res}
    write_json(doc, args.out)
    rows = [[r[c] for c in BENCH_COLUMNS] for r in res["rows"]]
    csv_path = args.csv or (Path(args.out).with_suffix(".csv") if args.out not in (None, "-") else None)
    if csv_path:
        write_csv(csv_path, BENCH_COLUMNS, rows)
    if args.plot_data:
        write_csv(Path(args.plot_data) / "scaling.csv", BENCH_COLUMNS, rows)
    for r in res["rows"]:
        print(f"N={r['n']:4d}  mean {r['mean_ms']:8.2f} ms  pairwise {r['pairwise_mean_ms']:8.2f} ms",
              file=sys.stderr)
    if "slope_pairwise" in res:
        print(f"log-log slope: pairwise {res['slope_pairwise']:.2f}, total {res['slope_total']:.2f}",
              file=sys.stderr)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, out_required: bool = False) -> None:
    p.add_argument("--config", help="JSON file of model configuration keys")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one configuration key (value parsed as JSON); repeatable")
    p.add_argument("--seed", type=int, help="master seed (recorded in every output)")
    p.add_argument("-o", "--out", required=out_required, help="output path ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slicecause",
                                     description="Causal attack-path attribution across network slices")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic scenario or corpus")
    p.add_argument("--spec", help="scenario spec JSON")
    p.add_argument("--preset", choices=["case-study"])
    p.add_argument("--count", type=int, help="generate a randomized corpus of this many scenarios")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one spec field")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attribute", help="attribute an attack path in one scenario directory")
    p.add_argument("scenario", help="directory holding signals.csv and allocations.csv")
    p.add_argument("--theta", help="theta JSON (defaults with a warning when absent)")
    p.add_argument("--preset", choices=["case-study"], help="start from the preset's model config")
    p.add_argument("--compare-baseline", choices=["correlation"])
    p.add_argument("--no-confidence", action="store_true", help="skip bootstrap hop intervals")
    p.add_argument("--tick-duration", type=float, default=0.1,
                   help="seconds per tick when the directory has no manifest")
    p.add_argument("--plot-data", metavar="DIR", help="write the timeline series as CSV")
    _common(p)
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("learn", help="fit theta on a labelled corpus")
    p.add_argument("manifest", help="corpus.json written by 'simulate --count'")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--log", help="per-iteration training log CSV (default: next to the output)")
    _common(p, out_required=True)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("evaluate", help="score a corpus, run ablations or robustness sweeps")
    p.add_argument("manifest", nargs="?", help="corpus.json")
    p.add_argument("--theta")
    p.add_argument("--ablation", action="store_true", help="four-variant ablation table")
    p.add_argument("--folds", type=int, help="learn-then-evaluate with this many folds")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--compare-baseline", choices=["correlation"])
    p.add_argument("--sensitivity", action="store_true", help="accuracy over an omega1 grid")
    p.add_argument("--omega1-grid", type=_float_list)
    p.add_argument("--sweep", choices=AXES, help="robustness sweep axis (no manifest needed)")
    p.add_argument("--grid", type=_float_list, help="comma-separated sweep levels")
    p.add_argument("--template", help="scenario spec JSON used as the sweep template")
    p.add_argument("--count", type=int, default=50, help="scenarios per sweep level")
    p.add_argument("--csv", help="flat CSV of the sweep table")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for corpus evaluation")
    p.add_argument("--plot-data", metavar="DIR")
    _common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="latency and scaling benchmark")
    p.add_argument("--n", type=_int_list, default=[8, 16, 32], help="comma-separated slice counts")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--ticks", type=int, default=300)
    p.add_argument("--no-confidence", action="store_true")
    p.add_argument("--csv", help="scaling CSV (default: output path with .csv)")
    p.add_argument("--plot-data", metavar="DIR")
    _common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except KeyError as exc:
        print(f"error: malformed input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
