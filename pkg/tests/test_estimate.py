"""Maximum likelihood and non-parametric estimation on simulated data."""

import math

import numpy as np
import pytest
from scipy import stats

from hawkes_arrow.estimate import (SampledKernel, SumExpFamily, default_init, exp_from_nonparametric, make_family,
                                   mle, mle_multivariate, nonparametric_kernel)
from hawkes_arrow.events import EventSeries, reverse
from hawkes_arrow.likelihood import loglik
from hawkes_arrow.model import HawkesModel, PowerLawKernel, SumExpKernel
from hawkes_arrow.simulate import simulate, simulate_stationary


def test_poisson_fit():
    m = HawkesModel.exponential(2.0, 0.0, 1.0)
    s = simulate(m, 5000.0, 1)
    fit = mle(s, "exp", init=[2.0, 0.1, 1.0])
    rate = len(s) / s.horizon
    assert fit.params["alpha"] < 1e-3
    assert abs(fit.params["lambda0"] - rate) < 3 * math.sqrt(len(s)) / s.horizon
    assert fit.loglik >= fit.init_loglik


@pytest.mark.parametrize("method", ["nelder-mead", "l-bfgs-b"])
def test_optimum_beats_truth(method):
    m = HawkesModel.exponential(0.05, 0.05, 0.1)
    for r in range(5):
        s = simulate_stationary(m, expected_events=500, seed=2, run=r).series
        for variant in ("standard", "modified"):
            fit = mle(s, "exp", init=m, variant=variant, method=method)
            assert fit.loglik >= loglik(m, s, variant).value - 1e-9
            assert fit.loglik >= fit.init_loglik
            assert fit.spectral_radius < 1


def test_optimizers_agree():
    m = HawkesModel.exponential(0.001, 0.01, 0.02)
    s = simulate_stationary(m, expected_events=1e4, seed=3).series
    a = mle(s, "exp", init=m, method="nelder-mead")
    b = mle(s, "exp", init=m, method="l-bfgs-b")
    assert a.converged and b.converged
    assert b.loglik == pytest.approx(a.loglik, abs=1e-4)
    np.testing.assert_allclose(b.theta, a.theta, rtol=2e-3)


def test_forward_accuracy_modified_likelihood():
    m = HawkesModel.exponential(0.001, 0.01, 0.02)
    errs = []
    for r in range(30):
        s = simulate_stationary(m, expected_events=1e5, seed=4, run=r).series
        fit = mle(s, "exp", init=m, variant="modified", method="l-bfgs-b")
        errs.append(np.abs(fit.theta / np.array([0.001, 0.01, 0.02]) - 1))
    mean = np.mean(errs, axis=0)
    # within 3x the reference accuracies 1.056%, 0.661%, 0.656% at this size
    assert np.all(mean <= 3 * np.array([0.01056, 0.00661, 0.00656]))


def test_sumexp_two_terms():
    m = HawkesModel.univariate(0.2, SumExpKernel((2.0, 0.02), (5.0, 0.1)))
    s = simulate_stationary(m, expected_events=3e4, seed=5).series
    fam = SumExpFamily(2)
    fit = mle(s, fam, init=default_init(s, fam), method="l-bfgs-b")
    truth = fam.from_model(m)
    order = np.argsort(truth[3:])  # compare terms in order of decay rate
    truth = np.concatenate([truth[:1], truth[1:3][order], truth[3:][order]])
    assert fit.converged
    assert fit.loglik >= loglik(m, s).value
    np.testing.assert_allclose(fit.theta, truth, rtol=0.3)
    one = mle(s, "exp", method="l-bfgs-b")
    assert fit.loglik > one.loglik


def test_powerlaw_fit():
    m = HawkesModel.univariate(0.05, PowerLawKernel.from_endogeneity(0.5, 0.06, -2.5))
    s = simulate_stationary(m, expected_events=1500, seed=6).series
    fam = make_family("powerlaw")
    fit = mle(s, fam, init=m, method="l-bfgs-b")
    assert fit.loglik >= loglik(m, s).value - 1e-9
    assert fit.endogeneity == pytest.approx(0.5, abs=0.2)


def test_symmetric_forward_accuracy():
    rho = 0.75
    m = HawkesModel.symmetric(0.001, 0.049, rho * 0.1 - 0.049, 0.1)
    fam = make_family("exp", structure="symmetric")
    truth = fam.from_model(m)
    errs = []
    for r in range(50):
        s = simulate_stationary(m, expected_events=1e5, seed=7, run=r).series
        fit = mle_multivariate(s, "symmetric", init=m, method="l-bfgs-b")
        errs.append(fit.theta / truth - 1)
    assert np.all(np.abs(np.mean(errs, axis=0)) <= 0.05)


def test_symmetric_permutation_invariance():
    m = HawkesModel.symmetric(0.001, 0.049, 0.026, 0.1)
    s = simulate_stationary(m, expected_events=2e4, seed=8).series
    a = mle_multivariate(s, "symmetric", init=m, method="l-bfgs-b")
    b = mle_multivariate(s.relabel([1, 0]), "symmetric", init=m, method="l-bfgs-b")
    np.testing.assert_allclose(a.theta, b.theta, rtol=1e-4)
    assert a.loglik == pytest.approx(b.loglik, rel=1e-9)


def test_fit_errors():
    with pytest.raises(ValueError):
        mle(EventSeries([1.0], 2.0), "exp", init=[1.0, 0.1, 1.0])
    with pytest.raises(ValueError):
        mle(EventSeries([1.0, 2.0, 3.0], 4.0), "exp", init=[1.0, 0.1])
    with pytest.raises(ValueError):
        mle_multivariate(EventSeries([1.0, 2.0, 3.0], 4.0), "symmetric", init=[0.1, 0.1, 0.1, 1.0])


def test_fit_result_serialises():
    s = simulate(HawkesModel.exponential(1.0, 0.3, 1.0), 300.0, 9)
    d = mle(s, "exp", method="l-bfgs-b").to_dict()
    assert set(d["params"]) == {"lambda0", "alpha", "beta"}
    assert d["variant"] == "standard" and d["optimizer"] == "l-bfgs-b"


# -- non-parametric -------------------------------------------------------------

def test_nonparametric_reversal_invariance():
    m = HawkesModel.exponential(0.01, 0.05, 0.1)
    for r in range(5):
        s = simulate_stationary(m, expected_events=2e4, seed=10, run=r).series
        assert nonparametric_kernel(s).equals(nonparametric_kernel(reverse(s)))


def test_nonparametric_recovers_exponential():
    m = HawkesModel.exponential(0.001, 0.01, 0.02)
    a, b = [], []
    for r in range(20):
        s = simulate_stationary(m, expected_events=1e6, seed=11, run=r).series
        est = exp_from_nonparametric(nonparametric_kernel(s))
        assert est.valid
        a.append(est.alpha)
        b.append(est.beta)
    assert np.median(a) == pytest.approx(0.01, rel=0.2)
    assert np.median(b) == pytest.approx(0.02, rel=0.2)


def test_nonparametric_poisson_is_zero():
    s = simulate(HawkesModel.exponential(2.0, 0.0, 1.0), 5000.0, 12)
    g = nonparametric_kernel(s)
    z = g.values / g.stderr
    # joint test plus a Bonferroni bound over the grid
    assert stats.chi2.sf(np.sum(z * z), z.size) > 0.01
    assert np.max(np.abs(z)) < stats.norm.isf(0.005 / z.size)


def test_nonparametric_too_short():
    with pytest.raises(ValueError):
        nonparametric_kernel(EventSeries([1.0, 2.0], 3.0))


def _sampled(values, grid):
    return SampledKernel(grid, values, np.ones_like(grid), grid[1] - grid[0], grid[-1], 5e8, 10**6)


def test_exact_loglinear_readout():
    grid = 0.7 * np.arange(1, 201)
    est = exp_from_nonparametric(_sampled(0.01 * np.exp(-0.02 * grid), grid))
    assert est.valid
    assert est.alpha == pytest.approx(0.01, rel=1e-12)
    assert est.beta == pytest.approx(0.02, rel=1e-12)
    assert est.lambda0 == pytest.approx(0.001, rel=1e-12)  # N / T * (1 - 0.5)


def test_readout_invalid_markers():
    grid = np.arange(1, 101, dtype=float)
    assert not exp_from_nonparametric(_sampled(-np.ones(100), grid)).valid
    assert not exp_from_nonparametric(_sampled(0.1 * np.exp(0.01 * grid), grid)).valid
    bad = exp_from_nonparametric(_sampled(0.5 * np.exp(-0.1 * grid), grid))
    assert not bad.valid and "endogeneity" in bad.reason
    with pytest.raises(ValueError):
        bad.model()


def test_lbfgsb_stall_at_stationary_point_counts_as_converged():
    from types import SimpleNamespace

    from hawkes_arrow.estimate import _lbfgsb_converged

    stall = "ABNORMAL_TERMINATION_IN_LNSRCH"
    assert _lbfgsb_converged(SimpleNamespace(success=True, message="CONVERGENCE", fun=1.0, jac=np.ones(3)))
    assert _lbfgsb_converged(SimpleNamespace(success=False, message=stall, fun=5e5, jac=np.array([4e-3, 1e-3])))
    assert not _lbfgsb_converged(SimpleNamespace(success=False, message=stall, fun=5e5, jac=np.array([1.0, 0.0])))
    assert not _lbfgsb_converged(SimpleNamespace(success=False, message="STOP: TOTAL NO. OF ITERATIONS",
                                                 fun=5e5, jac=np.zeros(2)))
