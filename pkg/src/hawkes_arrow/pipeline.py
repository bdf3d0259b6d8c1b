"""Experiment orchestration: synthetic forward/backward sweeps and windowed empirical fits.

``run_sweep`` simulates many stationary paths per parameter cell, reverses
them and compares likelihoods, maximum-likelihood estimates and
goodness-of-fit between the two arrows of time.  ``empirical_pipeline``
splits a (possibly millisecond-stamped) event file into non-overlapping
windows and fits sums of exponentials to each window in both directions.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from .estimate import (AsymmetricFamily, FitResult, PowerLawFamily, SumExpFamily, SymmetricFamily,
                       default_init, exp_from_nonparametric, mle, nonparametric_kernel)
from .events import EventSeries, RawEvents, read_raw_csv, reverse
from .gof import gof_report, ks_exp1, pvalue_histogram
from .likelihood import compensators, intensity, loglik
from .model import HawkesModel, PowerLawKernel, SumExpKernel
from .simulate import BurnInError, simulate, simulate_stationary, stream


STRUCTURES = ("univariate", "symmetric", "asymmetric")
REJECT_LEVEL = 0.05


# -- configuration ------------------------------------------------------------------

@dataclass
class SweepConfig:
    """Parameter grid and protocol of a synthetic forward/backward study.

    Grids by structure and family:

    * univariate ``exp``: every ``(lambda0, alpha)`` pair, ``beta = alpha / n``;
    * univariate ``powerlaw``: every ``lambda0`` with fixed ``u``, ``w`` and
      ``v`` solved from ``n``;
    * ``symmetric``: every ``(lambda0, alpha0)``, fixed ``beta``,
      ``alpha_m = rho * beta - alpha0``;
    * ``asymmetric``: every ``(lambda0, alpha0, alpha_m1)``, fixed ``beta``,
      ``alpha_m2 = (rho * beta - alpha0)^2 / alpha_m1``.

    ``runs`` is the number of paths per parameter permutation and target
    endogeneity (or spectral radius).
    """

    name: str = "sweep"
    family: str = "exp"
    structure: str = "univariate"
    lambda0: list = field(default_factory=lambda: [0.001])
    alpha: list = field(default_factory=lambda: [0.01])
    alpha0: list = field(default_factory=lambda: [0.049])
    alpha_m1: list = field(default_factory=lambda: [0.049])
    beta: float = 0.1
    u: float = 0.06
    w: float = -2.5
    endogeneity: list = field(default_factory=lambda: [0.5, 0.75, 0.9])
    runs: int = 10
    expected_events: float = 1e4
    seed: int = 0
    variant: str = "standard"
    optimizer: str = "nelder-mead"
    fit: bool = True
    gof: bool = True
    nonparametric: bool = False
    histogram_bins: int = 20
    invalid_error: float = 10.0
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"structure must be one of {STRUCTURES}")
        if self.family not in ("exp", "powerlaw"):
            raise ValueError("family must be 'exp' or 'powerlaw'")
        if self.family == "powerlaw" and self.structure != "univariate":
            raise ValueError("power-law sweeps are univariate")
        if self.runs < 0:
            raise ValueError("runs must be >= 0")
        if self.variant not in ("standard", "modified"):
            raise ValueError("variant must be 'standard' or 'modified'")
        if self.nonparametric and self.structure == "asymmetric":
            raise ValueError("the non-parametric estimate needs a symmetric process")
        for n in self.endogeneity:
            if not 0 < n < 1:
                raise ValueError(f"target endogeneity {n} outside (0, 1)")
        self.endogeneity = [float(x) for x in self.endogeneity]

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"kind", "description"}
        if unknown:
            raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
        return cls(**{k: v for k, v in d.items() if k in known})

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    # grid ---------------------------------------------------------------
    def combos(self) -> list:
        if self.structure == "univariate":
            if self.family == "powerlaw":
                return [(l0,) for l0 in self.lambda0]
            return list(itertools.product(self.lambda0, self.alpha))
        if self.structure == "symmetric":
            return list(itertools.product(self.lambda0, self.alpha0))
        return list(itertools.product(self.lambda0, self.alpha0, self.alpha_m1))

    def model(self, n: float, combo: tuple) -> HawkesModel:
        if self.structure == "univariate":
            if self.family == "powerlaw":
                return HawkesModel.univariate(combo[0], PowerLawKernel.from_endogeneity(n, self.u, self.w))
            l0, a = combo
            return HawkesModel.exponential(l0, a, a / n)
        if self.structure == "symmetric":
            l0, a0 = combo
            am = n * self.beta - a0
            if am <= 0:
                raise ValueError(f"alpha0={a0} leaves no cross excitation at rho={n}")
            return HawkesModel.symmetric(l0, a0, am, self.beta)
        l0, a0, am1 = combo
        rest = n * self.beta - a0
        if rest <= 0:
            raise ValueError(f"alpha0={a0} leaves no cross excitation at rho={n}")
        return HawkesModel.asymmetric(l0, a0, am1, rest * rest / am1, self.beta)

    def fit_family(self):
        if self.structure == "symmetric":
            return SymmetricFamily()
        if self.structure == "asymmetric":
            return AsymmetricFamily()
        if self.family == "powerlaw":
            return PowerLawFamily()
        return SumExpFamily(1)

    def warnings(self) -> list:
        out = []
        if self.structure == "asymmetric":
            for n in self.endogeneity:
                for combo in self.combos():
                    a = self.fit_family().from_model(self.model(n, combo))
                    if not a[2] < a[3]:
                        out.append(f"rho={n}, combo={combo}: alpha_m1 >= alpha_m2")
        return out


# -- one run ------------------------------------------------------------------------

def _pks(model, series, variant):
    try:
        return ks_exp1(compensators(model, series, variant))[1]
    except ValueError:
        return math.nan


def _fit_valid(fit: FitResult, truth: np.ndarray, limit: float) -> bool:
    if not fit.converged or not fit.spectral_radius < 1.0:
        return False
    rel = np.abs(fit.theta / truth - 1.0)
    return bool(np.all(rel <= limit))


def run_one(cfg: SweepConfig, i_n: int, combo_index: int, run: int) -> dict:
    """Simulate, reverse, evaluate and (optionally) fit one path; returns a flat record."""
    n = cfg.endogeneity[i_n]
    combo = cfg.combos()[combo_index]
    model = cfg.model(n, combo)
    family = cfg.fit_family()
    truth = family.from_model(model)
    run_key = (i_n * len(cfg.combos()) + combo_index) * max(cfg.runs, 1) + run
    rec = {"n": n, "combo": combo_index, "run": run, "ok": False}
    try:
        sim = simulate_stationary(model, expected_events=cfg.expected_events, seed=cfg.seed, run=run_key)
    except BurnInError as exc:
        rec["error"] = str(exc)
        return rec
    fwd = sim.series
    bwd = reverse(fwd)
    rec.update(N=len(fwd), T=fwd.horizon, burn_in=sim.burn_in_time)
    var = cfg.variant
    llf = loglik(model, fwd, var).value
    llb = loglik(model, bwd, var).value
    rec.update(ll_f=llf, ll_b=llb, rel_diff=(llf - llb) / abs(llf), diff_T=(llf - llb) / fwd.horizon)
    if cfg.gof:
        rec.update(pks_true_f=_pks(model, fwd, var), pks_true_b=_pks(model, bwd, var))
    if cfg.fit:
        for tag, series in (("f", fwd), ("b", bwd)):
            fit = mle(series, family, init=truth, variant=var, method=cfg.optimizer)
            rec[f"est_{tag}"] = [float(x) for x in fit.theta]
            rec[f"mle_ll_{tag}"] = fit.loglik
            rec[f"conv_{tag}"] = bool(fit.converged)
            rec[f"valid_{tag}"] = _fit_valid(fit, truth, cfg.invalid_error)
            rec[f"rho_{tag}"] = fit.spectral_radius
            if cfg.gof:
                rec[f"pks_mle_{tag}"] = _pks(fit.model, series, var) if fit.spectral_radius < 1 else math.nan
    if cfg.nonparametric:
        try:
            est = exp_from_nonparametric(nonparametric_kernel(fwd))
        except ValueError as exc:
            est = None
            rec["np_reason"] = str(exc)
        rec["np_valid"] = bool(est is not None and est.valid)
        if est is not None:
            rec.update(np_alpha=est.alpha, np_beta=est.beta, np_lambda0=est.lambda0)
            if not est.valid:
                rec["np_reason"] = est.reason
        if rec["np_valid"]:
            # fitted to a symmetric pooled kernel; for M = 2 split the exponential evenly
            if cfg.structure == "symmetric":
                npm = HawkesModel.symmetric(est.lambda0 / 2, est.alpha / 2, est.alpha / 2, est.beta)
            else:
                npm = est.model()
            rec.update(pks_np_f=_pks(npm, fwd, var), pks_np_b=_pks(npm, bwd, var))
    rec["truth"] = [float(x) for x in truth]
    rec["ok"] = True
    return rec


def _run_task(args):
    cfg_dict, i_n, c, r = args
    return run_one(SweepConfig.from_dict(cfg_dict), i_n, c, r)


# -- aggregation --------------------------------------------------------------------

def _mean_se(x) -> tuple:
    x = np.asarray([v for v in x if v is not None and np.isfinite(v)], dtype=float)
    if x.size == 0:
        return math.nan, math.nan, 0
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se, int(x.size)


def _finite(xs) -> list:
    return [float(x) for x in xs if x is not None and np.isfinite(x)]


def aggregate_cell(cfg: SweepConfig, n: float, recs: list) -> dict:
    ok = [r for r in recs if r.get("ok")]
    names = cfg.fit_family().names
    cell = {"n": n, "runs": len(recs), "completed": len(ok), "failed": len(recs) - len(ok)}
    for key in ("rel_diff", "diff_T"):
        m, se, k = _mean_se([r[key] for r in ok])
        cell[key] = {"mean": m, "se": se, "count": k}
    cell["true_backward_wins"] = float(np.mean([r["ll_b"] > r["ll_f"] for r in ok])) if ok else math.nan
    if cfg.fit:
        both = [r for r in ok if r["valid_f"] and r["valid_b"]]
        cell["nonconverged_f"] = sum(not r["conv_f"] for r in ok)
        cell["nonconverged_b"] = sum(not r["conv_b"] for r in ok)
        cell["invalid_f"] = sum(not r["valid_f"] for r in ok)
        cell["invalid_b"] = sum(not r["valid_b"] for r in ok)
        cell["mle_backward_wins"] = float(np.mean([r["mle_ll_b"] > r["mle_ll_f"] for r in both])) if both else math.nan
        cell["mle_pairs"] = len(both)
        errs = {}
        for tag in ("f", "b"):
            valid = [r for r in ok if r[f"valid_{tag}"]]
            for j, name in enumerate(names):
                rel = [r[f"est_{tag}"][j] / r["truth"][j] - 1.0 for r in valid]
                m, se, k = _mean_se(rel)
                ma, sea, _ = _mean_se(np.abs(rel))
                errs[f"{name}_{tag}"] = {"mean": m, "se": se, "abs_mean": ma, "abs_se": sea, "count": k}
            rho_err = [r[f"rho_{tag}"] / n - 1.0 for r in valid]
            m, se, k = _mean_se(rho_err)
            ma, sea, _ = _mean_se(np.abs(rho_err))
            errs[f"endogeneity_{tag}"] = {"mean": m, "se": se, "abs_mean": ma, "abs_se": sea, "count": k}
        cell["param_errors"] = errs
    if cfg.gof:
        pv = {}
        sources = ["true"] + (["mle"] if cfg.fit else []) + (["np"] if cfg.nonparametric else [])
        for src in sources:
            for tag in ("f", "b"):
                ps = _finite(r.get(f"pks_{src}_{tag}") for r in ok)
                pv[f"{src}_{tag}"] = {"values": ps, "count": len(ps),
                                      "rejection": float(np.mean(np.asarray(ps) < REJECT_LEVEL)) if ps else math.nan}
        cell["pvalues"] = pv
    if cfg.nonparametric:
        cell["np_valid"] = sum(bool(r.get("np_valid")) for r in ok)
    return cell


@dataclass
class ReversalReport:
    config: dict
    cells: list
    records: list
    warnings: list = field(default_factory=list)

    @property
    def run_count(self) -> int:
        return len(self.records)

    def cell(self, n: float) -> dict:
        for c in self.cells:
            if math.isclose(c["n"], n):
                return c
        raise KeyError(n)

    def to_dict(self, include_records: bool = False) -> dict:
        d = {"config": self.config, "cells": self.cells, "warnings": self.warnings, "run_count": self.run_count}
        if include_records:
            d["records"] = self.records
        return d

    def to_json(self, include_records: bool = False) -> str:
        return json.dumps(_jsonable(self.to_dict(include_records)), indent=1, sort_keys=True)

    # figure data --------------------------------------------------------
    def figure_tables(self) -> dict:
        """``{file stem: csv text}`` for every figure the sweep can feed."""
        cfg = SweepConfig.from_dict(self.config)
        names = {"loglik_rel": "loglik_rel", "loglik_T": "loglik_T", "params": "params",
                 "pvalues_true": "pvalues_true", "pvalues_mle": "pvalues_mle", "pvalues_np": "pvalues_np"}
        names.update(cfg.outputs)
        out = {}
        out[names["loglik_rel"]] = _xy_csv([(c["n"], c["rel_diff"]) for c in self.cells])
        out[names["loglik_T"]] = _xy_csv([(c["n"], c["diff_T"]) for c in self.cells])
        if cfg.fit:
            keys = list(cfg.fit_family().names) + ["endogeneity"]
            for k in keys:
                for tag, label in (("f", "forward"), ("b", "backward")):
                    rows = [(c["n"], c["param_errors"][f"{k}_{tag}"]) for c in self.cells]
                    out[f"{names['params']}_{k}_{label}"] = _xy_csv(rows)
        if cfg.gof:
            for src in ("true", "mle", "np"):
                if src == "mle" and not cfg.fit or src == "np" and not cfg.nonparametric:
                    continue
                out[names[f"pvalues_{src}"]] = self._histogram_csv(src, cfg.histogram_bins)
        return out

    def _histogram_csv(self, src, bins):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "direction", "bin_lo", "bin_hi", "count"])
        for c in self.cells:
            for tag, label in (("f", "forward"), ("b", "backward")):
                counts, edges = pvalue_histogram(c["pvalues"][f"{src}_{tag}"]["values"], bins)
                for k in range(bins):
                    w.writerow([repr(c["n"]), label, repr(float(edges[k])), repr(float(edges[k + 1])), int(counts[k])])
        return buf.getvalue()

    def write(self, out_dir) -> list:
        """Write figure CSVs, ``runs.csv`` and ``report.json``; returns written paths."""
        os.makedirs(out_dir, exist_ok=True)
        written = []
        for stem, text in self.figure_tables().items():
            p = os.path.join(out_dir, f"{stem}.csv")
            with open(p, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            written.append(p)
        p = os.path.join(out_dir, "runs.csv")
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(records_csv(self.records))
        written.append(p)
        p = os.path.join(out_dir, "report.json")
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
        written.append(p)
        return written


def _xy_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "ylo", "yhi", "count"])
    for x, agg in rows:
        m, se = agg["mean"], agg["se"]
        w.writerow([repr(float(x)), repr(m), repr(m - se), repr(m + se), agg["count"]])
    return buf.getvalue()


def records_csv(records: list) -> str:
    cols = []
    for r in records:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow([_cell(r.get(k, "")) for k in cols])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(repr(float(x)) for x in v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run_sweep(cfg: SweepConfig, jobs: int = 1, progress=None) -> ReversalReport:
    """Run every (target n, parameter permutation, run) of ``cfg``.

    Results do not depend on ``jobs``: every run draws from its own stream
    keyed by its position in the grid, and records are assembled in grid
    order.
    """
    combos = cfg.combos()
    tasks = [(i, c, r) for i in range(len(cfg.endogeneity)) for c in range(len(combos)) for r in range(cfg.runs)]
    warnings = cfg.warnings()
    cfg_dict = cfg.to_dict()
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, len(tasks) // (4 * jobs))
            records = []
            for k, rec in enumerate(pool.map(_run_task, [(cfg_dict, *t) for t in tasks], chunksize=chunk)):
                records.append(rec)
                if progress:
                    progress(k + 1, len(tasks))
    else:
        records = []
        for k, (i, c, r) in enumerate(tasks):
            records.append(run_one(cfg, i, c, r))
            if progress:
                progress(k + 1, len(tasks))
    cells = []
    for n in cfg.endogeneity:
        recs = [r for r in records if r["n"] == n]
        cell = aggregate_cell(cfg, n, recs)
        if cfg.fit and recs and cell["completed"] and cell["nonconverged_f"] == cell["completed"] \
                and cell["nonconverged_b"] == cell["completed"]:
            warnings.append(f"n={n}: no fit converged")
        if cell["failed"]:
            warnings.append(f"n={n}: {cell['failed']} runs never reached stationarity")
        cells.append(cell)
    return ReversalReport(cfg_dict, cells, records, warnings)


# -- intensity traces ---------------------------------------------------------------

def intensity_trace(model: HawkesModel, horizon: Optional[float] = None, expected_events: Optional[float] = None,
                    seed: int = 0, points: int = 2000, window: Optional[Sequence[float]] = None) -> str:
    """CSV of the intensity of one stationary path and of its reversal on a common grid.

    Columns: ``t, lambda_forward, lambda_backward, events_forward,
    events_backward`` where the event columns count events inside each grid step.
    """
    rec = simulate_stationary(model, horizon=horizon, expected_events=expected_events, seed=seed)
    fwd = rec.series
    bwd = reverse(fwd)
    lo, hi = (0.0, fwd.horizon) if window is None else (float(window[0]), float(window[1]))
    grid = np.linspace(lo, hi, int(points))
    lf = intensity(model, fwd.window(lo, hi) if window is not None else fwd, grid - (lo if window else 0.0))
    lb = intensity(model, bwd.window(lo, hi) if window is not None else bwd, grid - (lo if window else 0.0))
    cf = np.histogram(fwd.times, bins=np.append(grid, np.inf))[0]
    cb = np.histogram(bwd.times, bins=np.append(grid, np.inf))[0]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "lambda_forward", "lambda_backward", "events_forward", "events_backward"])
    for k in range(grid.size):
        w.writerow([repr(float(grid[k])), repr(float(lf[k].sum())), repr(float(lb[k].sum())), int(cf[k]), int(cb[k])])
    return buf.getvalue()


# -- empirical pipeline ---------------------------------------------------------------

WINDOW_LABELS = {3600.0: "1h", 1800.0: "30m", 900.0: "15m", 600.0: "10m", 300.0: "5m"}


def window_label(seconds: float) -> str:
    if float(seconds) in WINDOW_LABELS:
        return WINDOW_LABELS[float(seconds)]
    return f"{seconds:g}s"


@dataclass
class PipelineConfig:
    windows: list = field(default_factory=lambda: [3600.0, 1800.0, 900.0, 600.0, 300.0])
    P: list = field(default_factory=lambda: [1, 2, 3])
    min_events: int = 150
    jitter_resolution: float = 1e-3
    jitter: bool = True
    change_filter: bool = False
    variants: list = field(default_factory=lambda: ["standard", "modified"])
    optimizer: str = "l-bfgs-b"
    lb_lags: Optional[int] = None
    jitter_aware_lb: bool = False
    seed: int = 0
    synthetic: Optional[dict] = None

    def __post_init__(self):
        if not self.windows or any(w <= 0 for w in self.windows):
            raise ValueError("window sizes must be positive")
        if not self.P or any(int(p) < 1 for p in self.P):
            raise ValueError("P values must be >= 1")
        if self.jitter_resolution <= 0:
            raise ValueError("jitter resolution must be positive")
        for v in self.variants:
            if v not in ("standard", "modified"):
                raise ValueError(f"unknown variant {v!r}")
        self.P = sorted(int(p) for p in self.P)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"kind", "description"}
        if unknown:
            raise ValueError(f"unknown pipeline config keys: {sorted(unknown)}")
        return cls(**{k: v for k, v in d.items() if k in known})

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


def change_events(raw: RawEvents) -> RawEvents:
    """Keep rows whose price differs from the previous row's (the first row is kept)."""
    if raw.prices is None:
        if raw.times.size == 0:
            return raw
        raise ValueError("change filtering needs a price column")
    keep = np.ones(raw.times.size, dtype=bool)
    keep[1:] = raw.prices[1:] != raw.prices[:-1]
    return RawEvents(raw.times[keep], None if raw.components is None else raw.components[keep],
                     raw.prices[keep])


def jitter_times(times, resolution: float, rng: np.random.Generator):
    """Spread events uniformly inside their timestamp bucket, keeping their recorded order.

    Returns ``(jittered, bucket)``.  Every event gets a fresh uniform position
    within ``[bucket * res, (bucket + 1) * res)``; positions are sorted within
    each bucket and handed out in file order.
    """
    t = np.asarray(times, dtype=float)
    if t.size == 0:
        return t.copy(), np.zeros(0, dtype=np.int64)
    back = np.flatnonzero(np.diff(t) < 0)
    if back.size:
        # +3: header line, 1-based numbering, and the later row of the pair
        raise ValueError(f"line {back[0] + 3}: timestamp goes backwards")
    bucket = np.floor(np.round(t / resolution, 6)).astype(np.int64)
    u = rng.random(t.size)
    # sort draws within each bucket (buckets are already contiguous and ascending)
    order = np.lexsort((u, bucket))
    u = u[order]
    out = (bucket + u) * resolution
    # guard against equal neighbours after rounding
    for i in range(1, out.size):
        if out[i] <= out[i - 1]:
            out[i] = np.nextafter(out[i - 1], np.inf)
    return out, bucket


def split_windows(times, size: float, min_events: int, buckets=None):
    """Non-overlapping windows ``[t0 + k size, t0 + (k + 1) size)`` from the first event.

    The trailing partial window is dropped and windows with ``<= min_events``
    events are skipped.  Each window is returned as ``(index, start,
    EventSeries, buckets)`` with times relative to the window start and the
    horizon at the last event; ``buckets`` is the slice of raw timestamp
    buckets (None when not given).
    """
    t = np.asarray(times, dtype=float)
    out = []
    if t.size == 0:
        return out
    t0 = t[0]
    k_max = int(math.floor((t[-1] - t0) / size))
    edges = np.searchsorted(t, t0 + size * np.arange(k_max + 1), side="left")
    for k in range(k_max):
        a, b = edges[k], edges[k + 1]
        if b - a <= min_events:
            continue
        start = t0 + k * size
        rel = t[a:b] - start
        if rel[0] <= 0.0:
            # the first window opens on its first event; move the origin just before it
            start = np.nextafter(t[a], -np.inf)
            rel = t[a:b] - start
        series = EventSeries(rel, float(rel[-1]))
        out.append((k, float(start), series, None if buckets is None else buckets[a:b]))
    return out


def same_bucket_pairs(buckets) -> np.ndarray:
    """Lag-1 residual pairs whose events came from one raw timestamp.

    Residual ``j`` is the compensator ending at event ``j + 1``, so the pair
    ``(j, j + 1)`` is flagged when events ``j + 1`` and ``j + 2`` share a bucket.
    """
    bk = np.asarray(buckets)
    return bk[1:-1] == bk[2:]


def _nested_init(prev: np.ndarray, P: int) -> np.ndarray:
    """Extend a ``P - 1`` term solution with one faster exponential carrying 10% of the endogeneity."""
    lam0 = prev[0]
    a = np.asarray(prev[1:P], dtype=float)
    b = np.asarray(prev[P:], dtype=float)
    n = float(np.sum(a / b))
    b_new = 10.0 * float(b.max())
    a_new = 0.1 * max(n, 0.05) * b_new
    return np.concatenate([[lam0], 0.9 * a, [a_new], b, [b_new]])


def _fit_window(series: EventSeries, P: int, variant: str, inits: list, optimizer: str) -> FitResult:
    family = SumExpFamily(P)
    best = None
    for init in inits:
        try:
            fit = mle(series, family, init=init, variant=variant, method=optimizer)
        except ValueError:
            continue
        if best is None or fit.loglik > best.loglik:
            best = fit
    if best is None:
        raise RuntimeError("no admissible starting point")
    return best


@dataclass
class WindowReport:
    rows: list
    config: dict
    warnings: list = field(default_factory=list)
    input_events: int = 0

    TABLE_KEYS = ("P", "direction", "variant", "window", "n", "pKS", "pLB", "logL", "AIC", "N", "windows")

    def table(self) -> list:
        """Unweighted averages over windows, per (P, direction, variant, window size)."""
        groups = {}
        for r in self.rows:
            groups.setdefault((r["P"], r["direction"], r["variant"], r["window_seconds"]), []).append(r)
        out = []
        for (P, d, v, ws), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1] != "forward",
                                                                        kv[0][2], -kv[0][3])):
            out.append({"P": P, "direction": d, "variant": v, "window": window_label(ws),
                        "n": float(np.mean([r["n"] for r in rs])), "pKS": float(np.mean([r["pKS"] for r in rs])),
                        "pLB": float(np.mean([r["pLB"] for r in rs])),
                        "logL": float(np.mean([r["logL"] for r in rs])),
                        "AIC": float(np.mean([r["AIC"] for r in rs])), "N": float(np.mean([r["N"] for r in rs])),
                        "windows": len(rs)})
        return out

    def table_csv(self) -> str:
        return _dict_rows_csv(self.table(), self.TABLE_KEYS)

    def fits_csv(self) -> str:
        keys = ("P", "direction", "variant", "window_index", "start", "T", "converged", "window", "n", "pKS",
                "pLB", "logL", "AIC", "N")
        return _dict_rows_csv(self.rows, keys)

    def verdicts(self) -> dict:
        out = {}
        for P in sorted({r["P"] for r in self.rows}):
            for v in sorted({r["variant"] for r in self.rows}):
                f = [r for r in self.rows if r["P"] == P and r["variant"] == v and r["direction"] == "forward"]
                b = [r for r in self.rows if r["P"] == P and r["variant"] == v and r["direction"] == "backward"]
                if f and b:
                    out[f"P={P},{v}"] = arrow_verdict(f, b)
        return out

    def verdict(self, variant: str = "standard") -> str:
        f = [r for r in self.rows if r["variant"] == variant and r["direction"] == "forward"]
        b = [r for r in self.rows if r["variant"] == variant and r["direction"] == "backward"]
        if not f:
            return "indeterminate"
        return arrow_verdict(f, b)

    def to_dict(self) -> dict:
        return {"config": self.config, "table": self.table(), "verdict": self.verdict(),
                "verdicts": self.verdicts(), "warnings": self.warnings, "input_events": self.input_events,
                "fits": len(self.rows)}

    def write(self, out_dir) -> list:
        os.makedirs(out_dir, exist_ok=True)
        files = {"table2.csv": self.table_csv(), "fits.csv": self.fits_csv(),
                 "report.json": json.dumps(_jsonable(self.to_dict()), indent=1, sort_keys=True)}
        written = []
        for name, text in files.items():
            p = os.path.join(out_dir, name)
            with open(p, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            written.append(p)
        return written


def _dict_rows_csv(rows, keys) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow([_cell(r.get(k, "")) for k in keys])
    return buf.getvalue()


def prepare_events(raw: RawEvents, cfg: PipelineConfig):
    """Change-filter and jitter raw rows; returns ``(times, buckets)`` (buckets None without jitter)."""
    if cfg.change_filter:
        raw = change_events(raw)
    if not cfg.jitter:
        t = np.asarray(raw.times, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps are not strictly increasing; enable jitter")
        return t, None
    rng = stream(cfg.seed, 0x6A17)  # jitter has its own stream, independent of anything fitted
    return jitter_times(raw.times, cfg.jitter_resolution, rng)


def empirical_pipeline(events, cfg: PipelineConfig, progress=None) -> WindowReport:
    """Windowed forward/backward sum-of-exponentials fits of an event file or RawEvents.

    Per window and per ``P`` (ascending) the forward fit starts from the
    data-driven default and from the ``P - 1`` solution extended by one
    term; the better optimum is kept.  The backward fit starts from the
    forward estimate.  Both likelihood variants are fitted independently.
    """
    raw = events if isinstance(events, RawEvents) else read_raw_csv(events)
    warnings = []
    if raw.components is not None and np.unique(raw.components).size > 1:
        warnings.append("component labels ignored: events are pooled into one series")
    times, buckets = prepare_events(raw, cfg)
    rows = []
    if times.size == 0:
        warnings.append("input contains no events")
    for size in cfg.windows:
        wins = split_windows(times, float(size), cfg.min_events, buckets if cfg.jitter_aware_lb else None)
        if not wins:
            warnings.append(f"window {window_label(size)}: no window with more than {cfg.min_events} events")
        for k, start, fwd, bk in wins:
            bwd = reverse(fwd)
            masks = (None, None) if bk is None else (same_bucket_pairs(bk), same_bucket_pairs(bk[::-1]))
            for variant in cfg.variants:
                prev = None
                for P in cfg.P:
                    inits = [default_init(fwd, SumExpFamily(P))]
                    if prev is not None:
                        inits.append(_nested_init(prev, P))
                    ff = _fit_window(fwd, P, variant, inits, cfg.optimizer)
                    prev = ff.theta
                    fb = _fit_window(bwd, P, variant, [ff.theta, default_init(bwd, SumExpFamily(P))], cfg.optimizer)
                    for direction, fit, series, mask in (("forward", ff, fwd, masks[0]),
                                                         ("backward", fb, bwd, masks[1])):
                        comp = compensators(fit.model, series, variant)
                        rep = gof_report(comp, fit.loglik, 2 * P + 1, cfg.lb_lags, mask)
                        rows.append({"P": P, "direction": direction, "variant": variant,
                                     "window": window_label(size), "window_seconds": float(size),
                                     "window_index": k, "start": start, "T": series.horizon,
                                     "n": fit.endogeneity, "pKS": rep.pKS, "pLB": rep.pLB, "logL": fit.loglik,
                                     "AIC": rep.AIC, "N": len(series), "converged": fit.converged,
                                     "params": fit.params})
            if progress:
                progress(window_label(size), k)
    return WindowReport(rows, cfg.to_dict(), warnings, int(times.size))


def arrow_verdict(forward, backward) -> str:
    """Compare forward and backward fits on the same windows.

    ``forward-favoured`` when the forward mean pKS and mean log-likelihood
    both exceed the backward ones, ``backward-favoured`` when both are
    lower, ``indeterminate`` otherwise (ties included).  Inputs are row
    dicts with ``pKS`` and ``logL`` (or a single such dict each); rows that
    carry window identifiers must cover the same windows in both directions.
    """
    f = [forward] if isinstance(forward, dict) else list(forward)
    b = [backward] if isinstance(backward, dict) else list(backward)
    if not f or not b:
        raise ValueError("both directions need at least one fit")

    def key(r):
        return (r.get("P"), r.get("variant"), r.get("window"), r.get("window_index"))

    if sorted(map(key, f), key=repr) != sorted(map(key, b), key=repr):
        raise ValueError("forward and backward fits cover different windows")
    pf, pb = np.mean([r["pKS"] for r in f]), np.mean([r["pKS"] for r in b])
    lf, lb = np.mean([r["logL"] for r in f]), np.mean([r["logL"] for r in b])
    if pf > pb and lf > lb:
        return "forward-favoured"
    if pf < pb and lf < lb:
        return "backward-favoured"
    return "indeterminate"


# -- synthetic market day ----------------------------------------------------------------

DEFAULT_MARKET_MODEL = {"lambda0": 0.52, "alphas": [3.5, 0.025], "betas": [10.0, 0.1]}


def synthetic_market_day(duration: float = 23400.0, lambda0: float = 0.52, alphas=(3.5, 0.025),
                         betas=(10.0, 0.1), resolution: float = 1e-3, seed: int = 0) -> RawEvents:
    """Stationary sum-of-exponentials events stamped to ``resolution`` like an exchange feed.

    The path is burnt in before the day starts, so the file opens on a
    stationary process.  Timestamps are floored to the resolution, which
    creates the shared-bucket collisions the pipeline's jitter undoes.
    """
    model = HawkesModel.univariate(lambda0, SumExpKernel(tuple(alphas), tuple(betas)))
    warm = 50.0 / min(betas) / (1.0 - model.spectral_radius())
    path = simulate(model, duration + warm, stream(seed, 0x5EED))
    t = path.times[path.times >= warm] - warm
    stamped = np.floor(np.round(t / resolution, 6)) * resolution
    return RawEvents(stamped, None, None)


__all__ = ["SweepConfig", "ReversalReport", "run_sweep", "run_one", "aggregate_cell", "intensity_trace",
           "PipelineConfig", "WindowReport", "empirical_pipeline", "arrow_verdict", "jitter_times",
           "split_windows", "same_bucket_pairs", "change_events", "prepare_events", "synthetic_market_day", "window_label",
           "records_csv"]
