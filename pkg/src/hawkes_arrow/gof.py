"""Goodness-of-fit on compensator residuals.

Under a correctly specified model the compensators between consecutive events
are i.i.d. Exp(1).  Independence is probed with Ljung-Box, the marginal law
with a one-sample Kolmogorov-Smirnov test of ``1 - exp(-Lambda)`` against
Uniform(0, 1).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import special, stats

from .likelihood import CompensatorSeries, LogLikValue

TABLE_COLUMNS = ("window", "n", "pKS", "pLB", "logL", "AIC", "N")


def _residuals(lam) -> np.ndarray:
    if isinstance(lam, CompensatorSeries):
        return lam.values
    return np.asarray(lam, dtype=float).reshape(-1)


def ks_exp1(lam, min_size: int = 10):
    """KS distance of compensators to Exp(1) and its asymptotic p-value.

    Returns ``(D, p)`` with ``p = Q_KS((sqrt(n) + 0.12 + 0.11 / sqrt(n)) D)``.
    """
    x = _residuals(lam)
    n = x.size
    if n < min_size:
        raise ValueError(f"KS test needs at least {min_size} residuals, got {n}")
    u = np.sort(-np.expm1(-x))
    i = np.arange(1, n + 1)
    D = float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))
    sn = math.sqrt(n)
    p = float(special.kolmogorov((sn + 0.12 + 0.11 / sn) * D))
    return D, min(max(p, 0.0), 1.0)


def default_lags(n: int) -> int:
    return max(1, min(20, n // 10))


def ljung_box(lam, lags: Optional[int] = None, exclude_lag1=None):
    """Ljung-Box portmanteau test on residuals in event order.

    ``Q = n (n + 2) sum_h rho_h^2 / (n - h)`` against chi-square with
    ``lags`` degrees of freedom.  ``exclude_lag1`` is an optional boolean
    mask of length ``n - 1``: where True, the pair ``(i, i + 1)`` is left
    out of the lag-1 autocovariance (used for residual pairs whose events
    came from one raw timestamp and were spread apart by jitter).

    Returns ``(Q, p, lags)``.
    """
    x = _residuals(lam)
    n = x.size
    if lags is None:
        lags = default_lags(n)
    lags = int(lags)
    if lags < 1:
        raise ValueError("lags must be >= 1")
    if n <= lags + 1:
        raise ValueError(f"Ljung-Box needs more than {lags + 1} residuals, got {n}")
    y = x - x.mean()
    c0 = float(np.dot(y, y)) / n
    if c0 == 0.0:
        return math.inf, 0.0, lags
    Q = 0.0
    for h in range(1, lags + 1):
        prod = y[:-h] * y[h:]
        if h == 1 and exclude_lag1 is not None:
            keep = ~np.asarray(exclude_lag1, dtype=bool)
            if keep.size != n - 1:
                raise ValueError("exclude_lag1 must have one entry per consecutive residual pair")
            m = int(keep.sum())
            if m:
                # lag-1 autocorrelation from the retained pairs only, on the usual (n-1)/n scale;
                # its variance grows like 1/m, so the term is weighted by m/(n-1).  With every
                # pair retained this is the standard lag-1 term.
                rho = float(prod[keep].sum()) / m * (n - 1) / n / c0
                Q += rho * rho / (n - 1) * m / (n - 1)
            continue
        rho = float(prod.sum()) / n / c0
        Q += rho * rho / (n - h)
    Q *= n * (n + 2)
    p = float(stats.chi2.sf(Q, lags))
    return Q, p, lags


def aic(ll, k: int) -> float:
    """Akaike information criterion ``2k - 2 LL``."""
    if k < 1:
        raise ValueError("parameter count must be >= 1")
    return 2.0 * k - 2.0 * float(ll.value if isinstance(ll, LogLikValue) else ll)


def pvalue_histogram(ps: Iterable[float], bins: int = 20):
    """Counts of p-values in ``bins`` equal-width bins on [0, 1] (last bin closed).

    Returns ``(counts, edges)``.
    """
    ps = np.asarray(list(ps), dtype=float)
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if ps.size and (np.any(~np.isfinite(ps)) or ps.min() < 0.0 or ps.max() > 1.0):
        raise ValueError("p-values must lie in [0, 1]")
    counts, edges = np.histogram(ps, bins=bins, range=(0.0, 1.0))
    return counts, edges


def uniformity_pvalue(ps: Sequence[float]) -> float:
    """KS p-value of a collection of p-values against Uniform(0, 1)."""
    return float(stats.kstest(np.asarray(ps, dtype=float), "uniform").pvalue)


@dataclass(frozen=True)
class GofReport:
    pKS: float
    pLB: float
    AIC: float
    D: float
    Q: float
    lags: int
    n: int
    loglik: float = math.nan
    k: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def gof_report(lam, ll, k: int, lags: Optional[int] = None, exclude_lag1=None) -> GofReport:
    """KS, Ljung-Box and AIC in one record."""
    x = _residuals(lam)
    D, pks = ks_exp1(x)
    Q, plb, used = ljung_box(x, lags, exclude_lag1)
    llv = float(ll.value if isinstance(ll, LogLikValue) else ll)
    return GofReport(pks, plb, aic(llv, k), D, Q, used, int(x.size), llv, int(k))


def table_csv(rows: Iterable[dict], extra: Sequence[str] = ()) -> str:
    """Rows in the window/n/pKS/pLB/logL/AIC/N column order, with optional leading columns."""
    buf = io.StringIO()
    cols = list(extra) + list(TABLE_COLUMNS)
    w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: _fmt(r.get(c, "")) for c in cols})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


__all__ = ["GofReport", "ks_exp1", "ljung_box", "aic", "pvalue_histogram", "uniformity_pvalue",
           "gof_report", "table_csv", "default_lags", "TABLE_COLUMNS"]
