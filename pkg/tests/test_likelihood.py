"""Log-likelihoods and compensators against hand values, quadrature and pair sums."""

import math

import numpy as np
import pytest

from hawkes_arrow.events import EventSeries, reverse
from hawkes_arrow.likelihood import (compensators, intensity, loglik, loglik_modified, loglik_standard,
                                     sumexp_loglik_grad)
from hawkes_arrow.model import ExpKernel, HawkesModel, NonStationaryError, PowerLawKernel, SumExpKernel
from hawkes_arrow.simulate import simulate, simulate_stationary, stream

from oracles import compensators_quadrature, loglik_double_sum, loglik_quadrature


def test_poisson_hand_value():
    m = HawkesModel.exponential(2.0, 0.0, 1.0)
    s = EventSeries([0.5, 1.0], 2.0)
    assert loglik_standard(m, s).value == pytest.approx(-4 + 2 * math.log(2), rel=1e-14)


def test_exponential_hand_value():
    m = HawkesModel.exponential(1.0, 1.0, 1.0)
    s = EventSeries([1.0, 2.0], 2.0)
    expect = -2 - (1 - math.exp(-1)) + 0 + math.log(1 + math.exp(-1))
    assert loglik_standard(m, s).value == pytest.approx(expect, rel=1e-14)
    assert expect == pytest.approx(-2.3188589, abs=5e-8)
    assert loglik_quadrature(m, s) == pytest.approx(expect, rel=1e-10)


def test_modified_hand_value():
    m = HawkesModel.exponential(1.0, 0.5, 1.0)  # n = 0.5, mu = 2
    s = EventSeries([1.0, 2.0], 2.0)
    integral = 2 + 0.5 * (1 - math.exp(-1)) + (2 - 1) * (1 - math.exp(-2))
    logs = math.log(1 + math.exp(-1)) + math.log(1 + math.exp(-2) + 0.5 * math.exp(-1))
    assert loglik_modified(m, s).value == pytest.approx(-integral + logs, rel=1e-14)
    assert loglik_quadrature(m, s, "modified") == pytest.approx(-integral + logs, rel=1e-10)


def test_modified_equals_standard_for_poisson():
    m = HawkesModel.exponential(0.7, 0.0, 1.0)
    s = simulate(m, 500.0, 1)
    assert loglik_modified(m, s).value == loglik_standard(m, s).value


def test_modified_needs_stationarity():
    with pytest.raises(NonStationaryError):
        loglik_modified(HawkesModel.exponential(1.0, 1.0, 1.0), EventSeries([1.0], 2.0))


MODELS = {
    "exp": HawkesModel.exponential(0.5, 0.8, 1.6),
    "sumexp": HawkesModel.univariate(0.5, SumExpKernel((0.8, 0.05), (4.0, 0.2))),
    "powerlaw": HawkesModel.univariate(0.5, PowerLawKernel.from_endogeneity(0.6, 0.06, -2.5)),
    "bivariate": HawkesModel.from_exp_matrices([0.3, 0.2], [[0.4, 0.2], [0.3, 0.5]], [[1.0, 2.0], [1.5, 1.2]]),
    "mixed": HawkesModel((0.3, 0.2), ((ExpKernel(0.4, 1.0), PowerLawKernel.from_endogeneity(0.2, 0.5, -2.0)),
                                      (SumExpKernel((0.2, 0.1), (2.0, 0.5)), ExpKernel(0.3, 1.0)))),
}


@pytest.mark.parametrize("name", sorted(MODELS))
@pytest.mark.parametrize("variant", ["standard", "modified"])
def test_quadrature_oracle(name, variant):
    m = MODELS[name]
    s = simulate(m, 60.0 if m.dimension == 1 else 80.0, stream(11, len(name)))
    s = EventSeries(s.times[:100], s.horizon, None if s.components is None else s.components[:100], m.dimension)
    ll = loglik(m, s, variant)
    assert ll.value == pytest.approx(loglik_quadrature(m, s, variant), rel=1e-6)
    assert ll.value == pytest.approx(sum(ll.components), rel=1e-12)
    lam = compensators(m, s, variant)
    for got, ref in zip(lam.per_component, compensators_quadrature(m, s, variant)):
        np.testing.assert_allclose(got, ref, rtol=1e-6)


@pytest.mark.parametrize("name", ["exp", "sumexp", "bivariate"])
def test_recursion_equals_double_sum(name):
    m = MODELS[name]
    s = simulate(m, 2000.0, stream(12, len(name)))
    s = EventSeries(s.times[:1000], s.horizon, None if s.components is None else s.components[:1000], m.dimension)
    for variant in ("standard", "modified"):
        assert loglik(m, s, variant).value == pytest.approx(loglik_double_sum(m, s, variant), rel=1e-9)


def test_compensator_examples():
    m = HawkesModel.exponential(2.0, 0.0, 1.0)
    np.testing.assert_allclose(compensators(m, EventSeries([0.5, 1.0, 1.25], 2.0)).values, [1.0, 0.5])
    m = HawkesModel.exponential(1.0, 1.0, 1.0)
    lam = compensators(m, EventSeries([1.0, 2.0], 2.0)).values
    assert lam[0] == pytest.approx(1 + (1 - math.exp(-1)), rel=1e-14)
    assert lam[0] == pytest.approx(1.632121, abs=5e-7)


def test_compensators_plus_boundary_equal_integral():
    m = HawkesModel.symmetric(0.01, 0.03, 0.04, 0.1)
    s = simulate_stationary(m, expected_events=1000, seed=13).series
    for variant in ("standard", "modified"):
        lam = compensators(m, s, variant)
        integral = sum(v.sum() for v in lam.per_component) + lam.boundary.sum()
        lam_left = intensity(m, s, s.times, variant)[np.arange(len(s)), s.labels]
        assert loglik(m, s, variant).value == pytest.approx(np.log(lam_left).sum() - integral, rel=1e-9)


def test_mean_compensator_is_one():
    m = HawkesModel.exponential(0.001, 0.01, 0.02)
    lam = compensators(m, simulate_stationary(m, expected_events=1e4, seed=14).series, "modified").values
    assert lam.size > 9000
    assert abs(lam.mean() - 1) < 3 * lam.std() / math.sqrt(lam.size)


def test_powerlaw_pairwise_cap():
    m = MODELS["powerlaw"]
    s = EventSeries(np.arange(1, 21, dtype=float), 21.0)
    with pytest.raises(ValueError):
        loglik(m, s, max_pairwise_events=10)


def test_intensity_matches_left_limit_oracle():
    from oracles import intensity_left
    m = MODELS["mixed"]
    s = simulate(m, 30.0, 15)
    grid = np.linspace(0, 30, 37)
    got = intensity(m, s, grid, "modified")
    for j, t in enumerate(grid):
        for c in range(2):
            assert got[j, c] == pytest.approx(intensity_left(m, s, c, t, "modified"), rel=1e-12)


def _fd_check(s, lam0, a, b, variant):
    theta = np.concatenate([[lam0], a, b])
    P = len(a)
    ll, g = sumexp_loglik_grad(s, lam0, a, b, variant)
    ref = loglik(HawkesModel.univariate(lam0, SumExpKernel(tuple(a), tuple(b))), s, variant).value
    assert ll == pytest.approx(ref, rel=1e-12)
    for i in range(theta.size):
        h = 1e-5 * theta[i]
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        fu = sumexp_loglik_grad(s, up[0], up[1:1 + P], up[1 + P:], variant)[0]
        fd = sumexp_loglik_grad(s, dn[0], dn[1:1 + P], dn[1 + P:], variant)[0]
        num = (fu - fd) / (2 * h)
        assert g[i] == pytest.approx(num, rel=1e-4, abs=1e-6 * abs(ll) / theta[i])


@pytest.mark.parametrize("P", [1, 2])
@pytest.mark.parametrize("variant", ["standard", "modified"])
def test_analytic_gradient(P, variant):
    rng = np.random.default_rng(16 + P)
    m = HawkesModel.univariate(0.05, SumExpKernel((0.3, 0.02)[:P], (1.0, 0.1)[:P]))
    s = simulate_stationary(m, expected_events=2000, seed=17).series
    for _ in range(5):
        b = rng.uniform(0.05, 2.0, P)
        a = b * rng.uniform(0.1, 0.8, P) / P
        _fd_check(s, rng.uniform(0.01, 0.2), a, b, variant)


def test_reversal_inequality_true_parameters():
    m = HawkesModel.exponential(0.001, 0.01, 0.01 / 0.75)
    for r in range(10):
        s = simulate_stationary(m, expected_events=1e5, seed=18, run=r).series
        assert loglik(m, s).value > loglik(m, reverse(s)).value
