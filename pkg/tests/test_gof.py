"""KS, Ljung-Box, AIC and p-value histograms against reference formulas."""

import math

import numpy as np
import pytest
from scipy import stats

from hawkes_arrow.gof import (TABLE_COLUMNS, aic, gof_report, ks_exp1, ljung_box, pvalue_histogram, table_csv,
                              uniformity_pvalue)

from oracles import kolmogorov_series, ljung_box_reference


@pytest.mark.parametrize("x", [0.5, 1.0, 1.5])
def test_kolmogorov_distribution_matches_series(x):
    # u_i = max(i/n - D, 0) puts the largest CDF excess at exactly D
    n = 400
    sn = math.sqrt(n)
    D = x / (sn + 0.12 + 0.11 / sn)
    u = np.maximum(np.arange(1, n + 1) / n - D, 0.0)
    lam = -np.log1p(-u)
    d, p = ks_exp1(lam)
    assert d == pytest.approx(D, rel=1e-12)
    assert p == pytest.approx(kolmogorov_series(x), abs=1e-6)


def test_ks_quantile_grid():
    n = 100
    lam = -np.log(1 - (np.arange(1, n + 1) - 0.5) / n)
    D, p = ks_exp1(lam)
    assert D == pytest.approx(0.005, abs=1e-12)
    assert p == pytest.approx(1.0, abs=1e-12)


def test_ks_degenerate():
    D, p = ks_exp1(np.ones(100))
    assert D >= 0.36
    assert p < 1e-10


def test_ks_too_few():
    with pytest.raises(ValueError):
        ks_exp1(np.ones(5))


def test_ks_null_uniformity():
    rng = np.random.default_rng(0)
    ps = [ks_exp1(rng.exponential(size=500))[1] for _ in range(500)]
    assert uniformity_pvalue(ps) > 0.01


def test_ljung_box_reference():
    rng = np.random.default_rng(1)
    x = rng.exponential(size=300)
    Q, p, lags = ljung_box(x, 7)
    Qr, pr = ljung_box_reference(x, 7)
    assert Q == pytest.approx(Qr, rel=1e-10)
    assert p == pytest.approx(pr, rel=1e-8)
    assert lags == 7
    assert ljung_box(x)[2] == 20


def test_ljung_box_null_uniformity():
    rng = np.random.default_rng(2)
    ps = [ljung_box(rng.exponential(size=10_000), 20)[1] for _ in range(200)]
    assert stats.kstest(ps, "uniform").pvalue > 0.01


def test_ljung_box_alternating():
    x = np.tile([0.5, 1.5], 500)
    Q, p, _ = ljung_box(x, 20)
    assert p < 1e-10


def test_ljung_box_preconditions():
    with pytest.raises(ValueError):
        ljung_box(np.ones(100), 0)
    with pytest.raises(ValueError):
        ljung_box(np.ones(10), 20)


def test_ljung_box_lag1_exclusion():
    rng = np.random.default_rng(3)
    x = rng.exponential(size=1000)
    none = np.zeros(999, dtype=bool)
    assert ljung_box(x, 5, none)[0] == pytest.approx(ljung_box(x, 5)[0], rel=1e-12)
    # force strong lag-1 correlation only on flagged pairs; excluding them restores the null
    y = x.copy()
    flag = np.zeros(999, dtype=bool)
    flag[::2] = True
    y[1::2] = y[0::2]
    assert ljung_box(y, 5)[1] < 1e-6
    assert ljung_box(y, 5, flag)[1] > ljung_box(y, 5)[1]
    with pytest.raises(ValueError):
        ljung_box(x, 5, np.zeros(10, dtype=bool))


def test_aic_values():
    assert aic(2282.04, 3) == pytest.approx(-4558.08, abs=1e-9)
    assert aic(2438.63, 5) == pytest.approx(-4867.26, abs=1e-9)
    assert aic(0.0, 1) == 2.0
    with pytest.raises(ValueError):
        aic(1.0, 0)


def test_histogram():
    counts, edges = pvalue_histogram([0.05, 0.15, 0.95], 10)
    assert counts.tolist() == [1, 1, 0, 0, 0, 0, 0, 0, 0, 1]
    assert edges[0] == 0 and edges[-1] == 1
    assert pvalue_histogram([], 20)[0].sum() == 0
    assert pvalue_histogram([1.0], 4)[0].tolist() == [0, 0, 0, 1]
    with pytest.raises(ValueError):
        pvalue_histogram([1.5])
    rng = np.random.default_rng(4)
    counts, _ = pvalue_histogram(rng.uniform(size=10_000), 20)
    assert np.max(np.abs(counts - 500)) < 5 * math.sqrt(500)


def test_report_and_table():
    rng = np.random.default_rng(5)
    rep = gof_report(rng.exponential(size=400), -123.5, 3)
    assert 0 <= rep.pKS <= 1 and 0 <= rep.pLB <= 1
    assert rep.AIC == pytest.approx(2 * 3 + 2 * 123.5)
    assert rep.n == 400 and rep.lags == 20
    text = table_csv([{"window": "1h", "n": 0.3, "pKS": rep.pKS, "pLB": rep.pLB, "logL": -123.5, "AIC": rep.AIC,
                       "N": 400}], extra=("P",))
    assert text.splitlines()[0] == ",".join(("P",) + TABLE_COLUMNS)
