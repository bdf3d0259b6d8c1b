"""Command-line entry point: ``hawkes-arrow {simulate,fit,sweep,empirical}``.

Every command prints a one-line JSON summary on stdout, human-readable
progress on stderr, and writes ``manifest.json`` into its output directory.

Exit codes: 0 success, 2 configuration or parse error, 3 invalid model,
4 fit failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .estimate import make_family, mle
from .events import EventFileError, EventSeries, file_digest, read_events_csv, reverse, write_events_csv
from .gof import gof_report
from .likelihood import compensators
from .model import KernelDivergenceError, NonStationaryError, load_model
from .pipeline import (PipelineConfig, SweepConfig, arrow_verdict, empirical_pipeline, intensity_trace,
                       run_sweep, synthetic_market_day)
from .simulate import BurnInError, simulate, simulate_stationary

EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_FIT = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _say(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_CONFIG) from None


def _load_model(path):
    try:
        return load_model(path)
    except (NonStationaryError, KernelDivergenceError) as exc:
        raise CliError(f"invalid model {path}: {exc}", EXIT_MODEL) from None
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CliError(f"cannot read model {path}: {exc}", EXIT_CONFIG) from None
    except ValueError as exc:
        raise CliError(f"invalid model {path}: {exc}", EXIT_MODEL) from None


def _read_events(path, horizon=None) -> EventSeries:
    try:
        return read_events_csv(path, horizon)
    except EventFileError as exc:
        raise CliError(f"{path}: {exc}", EXIT_CONFIG) from None
    except OSError as exc:
        raise CliError(f"cannot read events {path}: {exc}", EXIT_CONFIG) from None
    except ValueError as exc:
        raise CliError(f"{path}: {exc}", EXIT_CONFIG) from None


def write_manifest(out_dir, command, config, seed, inputs, outputs, started, warnings=()) -> str:
    """Record how an output directory was produced; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "config": config,
        "seed": seed,
        "version": __version__,
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": {os.path.relpath(p, out_dir): file_digest(p) for p in outputs},
        "duration_seconds": round(time.monotonic() - started, 3),
        "warnings": list(warnings),
    }
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")
    return str(path)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _flags(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _summary(d: dict) -> None:
    print(json.dumps(d, sort_keys=True, default=_json_default), flush=True)


# -- simulate --------------------------------------------------------------------

def cmd_simulate(args) -> int:
    started = time.monotonic()
    model = _load_model(args.model)
    if not model.is_stationary() and (args.expected_events is not None or args.burn_in):
        raise CliError("model is not stationary (spectral radius >= 1)", EXIT_MODEL)
    try:
        if args.burn_in:
            rec = simulate_stationary(model, horizon=args.horizon, expected_events=args.expected_events,
                                      seed=args.seed)
            series, t0, horizon = rec.series, rec.burn_in_time, rec.series.horizon + rec.burn_in_time
        else:
            from .model import horizon_for_expected_events
            horizon = args.horizon if args.horizon is not None else horizon_for_expected_events(
                model, args.expected_events)
            series, t0 = simulate(model, horizon, args.seed), None
    except BurnInError as exc:
        raise CliError(str(exc), EXIT_MODEL) from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_events_csv(series, out)
    config = {"model": model.to_dict(), "horizon": horizon, "expected_events": args.expected_events,
              "burn_in": bool(args.burn_in), "burn_in_time": t0, "events": len(series),
              "output_horizon": series.horizon}
    write_manifest(out.parent, "simulate", config, args.seed, [args.model],
                   [out, out.with_suffix(out.suffix + ".json")], started)
    _say(f"simulated {len(series)} events on [0, {series.horizon:g}]"
         + (f" after burn-in at t0={t0:g}" if t0 is not None else ""))
    _summary({"command": "simulate", "events": len(series), "horizon": horizon,
              "output_horizon": series.horizon, "burn_in_time": t0, "out": str(out)})
    return EXIT_OK


# -- fit ------------------------------------------------------------------------

def _fit_one(series, args, family, init):
    fit = mle(series, family, init=init, variant=args.mode, method=args.optimizer)
    report = None
    if fit.spectral_radius < 1 and len(series) > 12:
        comp = compensators(fit.model, series, args.mode)
        try:
            report = gof_report(comp, fit.loglik, family.n_params)
        except ValueError:
            report = None
    return fit, report


def cmd_fit(args) -> int:
    started = time.monotonic()
    series = _read_events(args.events, args.horizon)
    if args.structure == "univariate" and series.dimension > 1:
        series = EventSeries(series.times, series.horizon)
        _say("component labels ignored for a univariate fit")
    try:
        family = make_family(args.family, args.P, args.structure, max(series.dimension, 2))
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    init = None
    if args.init:
        init = _load_model(args.init)
    directions = ["forward", "backward"] if args.direction == "both" else [args.direction]
    results = {}
    try:
        for d in directions:
            s = series if d == "forward" else reverse(series)
            start = init
            if start is None and d == "backward" and "forward" in results:
                start = results["forward"][0].theta
            if start is None:
                from .estimate import default_init
                start = default_init(s, family)
            results[d] = _fit_one(s, args, family, start)
    except (ValueError, RuntimeError) as exc:
        raise CliError(f"fit failed: {exc}", EXIT_FIT) from None
    out = {"events": str(args.events), "N": len(series), "horizon": series.horizon, "mode": args.mode,
           "fits": {d: {"fit": f.to_dict(), "gof": None if r is None else r.to_dict()}
                    for d, (f, r) in results.items()}}
    verdict = None
    if len(results) == 2 and all(r is not None for _, r in results.values()):
        rows = [{"pKS": r.pKS, "logL": f.loglik} for f, r in results.values()]
        verdict = arrow_verdict(rows[0], rows[1])
        out["verdict"] = verdict
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")
    failed = [d for d, (f, _) in results.items() if not f.converged]
    warnings = [f"{d} fit did not converge" for d in failed]
    write_manifest(out_path.parent, "fit", _flags(args), None, [args.events], [out_path], started, warnings)
    for d, (f, r) in results.items():
        pks = "n/a" if r is None else f"{r.pKS:.3g}"
        _say(f"{d}: logL={f.loglik:.6g} rho={f.spectral_radius:.4g} pKS={pks} converged={f.converged}")
    if verdict:
        _say(f"verdict: {verdict}")
    _summary({"command": "fit", "out": str(out_path), "verdict": verdict,
              "loglik": {d: f.loglik for d, (f, _) in results.items()},
              "converged": {d: f.converged for d, (f, _) in results.items()}})
    if failed and not args.allow_nonconverged:
        _say("non-converged fit (use --allow-nonconverged to accept)")
        return EXIT_FIT
    return EXIT_OK


# -- sweep ---------------------------------------------------------------------

def cmd_sweep(args) -> int:
    started = time.monotonic()
    raw = _load_json(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if raw.get("kind") == "trace":
        try:
            model = load_model_dict(raw["model"])
            text = intensity_trace(model, horizon=raw.get("horizon"), expected_events=raw.get("expected_events"),
                                   seed=int(raw.get("seed", 0)), points=int(raw.get("points", 2000)),
                                   window=raw.get("window"))
        except KeyError as exc:
            raise CliError(f"trace config misses {exc}", EXIT_CONFIG) from None
        name = raw.get("output", "trace")
        path = out_dir / f"{name}.csv"
        path.write_text(text, encoding="utf-8")
        write_manifest(out_dir, "sweep", raw, raw.get("seed", 0), [args.config], [path], started)
        _summary({"command": "sweep", "kind": "trace", "outputs": [str(path)]})
        return EXIT_OK
    try:
        cfg = SweepConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid sweep config: {exc}", EXIT_CONFIG) from None
    total = len(cfg.endogeneity) * len(cfg.combos()) * cfg.runs
    _say(f"sweep {cfg.name}: {total} runs")
    step = max(1, total // 20)

    def progress(done, tot):
        if done % step == 0 or done == tot:
            _say(f"  {done}/{tot} runs")

    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
    report = run_sweep(cfg, jobs=jobs, progress=progress)
    written = report.write(out_dir)
    write_manifest(out_dir, "sweep", cfg.to_dict(), cfg.seed, [args.config], written, started, report.warnings)
    for w in report.warnings:
        _say(f"warning: {w}")
    _summary({"command": "sweep", "name": cfg.name, "runs": report.run_count,
              "outputs": [os.path.basename(p) for p in written], "warnings": len(report.warnings)})
    return EXIT_OK


def load_model_dict(d):
    from .model import HawkesModel
    try:
        return HawkesModel.from_dict(d)
    except (NonStationaryError, KernelDivergenceError, ValueError) as exc:
        raise CliError(f"invalid model: {exc}", EXIT_MODEL) from None


# -- empirical --------------------------------------------------------------------

def cmd_empirical(args) -> int:
    started = time.monotonic()
    raw_cfg = _load_json(args.config)
    try:
        cfg = PipelineConfig.from_dict(raw_cfg)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid pipeline config: {exc}", EXIT_CONFIG) from None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = [args.config]
    if args.events == "synthetic":
        if not cfg.synthetic:
            raise CliError("'synthetic' input needs a 'synthetic' block in the config", EXIT_CONFIG)
        syn = dict(cfg.synthetic)
        events = synthetic_market_day(**syn)
        _say(f"synthetic market day: {events.times.size} stamped events")
    else:
        events = args.events
        inputs.append(args.events)
    try:
        report = empirical_pipeline(events, cfg, progress=None)
    except EventFileError as exc:
        raise CliError(f"{args.events}: {exc}", EXIT_CONFIG) from None
    except OSError as exc:
        raise CliError(f"cannot read events {args.events}: {exc}", EXIT_CONFIG) from None
    except ValueError as exc:
        raise CliError(f"{args.events}: {exc}", EXIT_CONFIG) from None
    except RuntimeError as exc:
        raise CliError(f"fit failed: {exc}", EXIT_FIT) from None
    written = report.write(out_dir)
    write_manifest(out_dir, "empirical", cfg.to_dict(), cfg.seed, inputs, written, started, report.warnings)
    for w in report.warnings:
        _say(f"warning: {w}")
    verdict = report.verdict() if report.rows else None
    if verdict:
        _say(f"verdict (standard likelihood, all P and windows): {verdict}")
    _summary({"command": "empirical", "fits": len(report.rows), "verdict": verdict,
              "outputs": [os.path.basename(p) for p in written], "warnings": len(report.warnings)})
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hawkes-arrow",
                                description="Hawkes processes under time reversal: simulate, fit, compare arrows.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a model to an events CSV")
    s.add_argument("model", help="model JSON file")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--horizon", type=float, help="simulation horizon T")
    g.add_argument("--expected-events", type=float, help="size T so that E[N_T] equals this")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--burn-in", action=argparse.BooleanOptionalAction, default=True,
                   help="drop the initial non-stationary part (default: on)")
    s.add_argument("--out", required=True, help="events CSV to write")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="maximum-likelihood fit of an events CSV")
    f.add_argument("events")
    f.add_argument("--family", choices=("exp", "sumexp", "powerlaw"), default="exp")
    f.add_argument("--P", type=int, default=1, help="number of exponentials for --family sumexp")
    f.add_argument("--mode", choices=("standard", "modified"), default="standard", help="likelihood variant")
    f.add_argument("--direction", choices=("forward", "backward", "both"), default="forward")
    f.add_argument("--structure", choices=("univariate", "symmetric", "asymmetric", "general"),
                   default="univariate")
    f.add_argument("--optimizer", choices=("nelder-mead", "l-bfgs-b"), default="l-bfgs-b")
    f.add_argument("--init", help="model JSON used as the starting point")
    f.add_argument("--horizon", type=float, help="override the horizon (default: sidecar or last event)")
    f.add_argument("--allow-nonconverged", action="store_true")
    f.add_argument("--out", required=True, help="result JSON to write")
    f.set_defaults(func=cmd_fit)

    w = sub.add_parser("sweep", help="run a synthetic forward/backward study from a JSON config")
    w.add_argument("config")
    w.add_argument("--out-dir", required=True)
    w.add_argument("--jobs", type=int, default=0, help="worker processes (default: all cores)")
    w.set_defaults(func=cmd_sweep)

    e = sub.add_parser("empirical", help="windowed fits of an events file")
    e.add_argument("events", help="events CSV (time[,component][,price]) or 'synthetic'")
    e.add_argument("config", help="pipeline JSON")
    e.add_argument("--out-dir", required=True)
    e.set_defaults(func=cmd_empirical)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _say(f"error: {exc}")
        _summary({"command": args.command, "error": str(exc), "exit": exc.code})
        return exc.code
    except (NonStationaryError, KernelDivergenceError) as exc:
        _say(f"error: {exc}")
        _summary({"command": args.command, "error": str(exc), "exit": EXIT_MODEL})
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
