"""Kernel and model algebra against closed forms, quadrature and matrix inverses."""

import json
import math

import numpy as np
import pytest
from scipy import integrate

from hawkes_arrow.model import (ExpKernel, HawkesModel, KernelDivergenceError, NonStationaryError,
                                PowerLawKernel, SumExpKernel, branching_matrix, endogeneity,
                                horizon_for_expected_events, kernel_value, load_model, mean_intensity,
                                save_model, spectral_radius, spectral_radius_asymmetric,
                                spectral_radius_symmetric)


def test_exponential_value():
    k = ExpKernel(0.8, 1.2)
    assert kernel_value(k, 0.0) == 0.8
    assert kernel_value(k, 1.0) == pytest.approx(0.8 * math.exp(-1.2), rel=1e-15)
    assert kernel_value(k, 1.0) == pytest.approx(0.2409554, abs=5e-8)


def test_powerlaw_value():
    k = PowerLawKernel(0.06, 0.2, -2.5)
    assert kernel_value(k, 0.0) == pytest.approx(3.35410, abs=5e-6)


def test_negative_lag_rejected():
    with pytest.raises(ValueError):
        kernel_value(ExpKernel(1.0, 1.0), -0.1)


def test_endogeneity_examples():
    assert endogeneity(ExpKernel(0.8, 1.2)) == pytest.approx(2 / 3, rel=1e-15)
    assert endogeneity(ExpKernel(0.0, 1.0)) == 0.0
    k = PowerLawKernel.from_endogeneity(0.5, 0.06, -2.5)
    assert k.v == pytest.approx(0.185664, abs=1e-6)
    quad = integrate.quad(k.value, 0, 1e6, limit=500, points=[1, 10, 100, 1000])[0]
    assert quad == pytest.approx(0.5, rel=1e-6)


def test_powerlaw_divergent_exponent():
    with pytest.raises(KernelDivergenceError):
        PowerLawKernel(0.06, 0.2, -1.0)


def test_endogeneity_matches_quadrature_random():
    rng = np.random.default_rng(0)
    for _ in range(10):
        a, b = rng.uniform(0.1, 2, 2), rng.uniform(0.1, 3, 2)
        k = SumExpKernel(tuple(a), tuple(b))
        quad = integrate.quad(k.value, 0, np.inf)[0]
        assert endogeneity(k) == pytest.approx(quad, rel=1e-6)
        p = PowerLawKernel(rng.uniform(0.01, 1), rng.uniform(0.1, 2), rng.uniform(-3.5, -1.5))
        quad = integrate.quad(p.value, 0, np.inf, limit=500)[0]
        assert endogeneity(p) == pytest.approx(quad, rel=1e-6)


def test_spectral_radius_examples():
    m = HawkesModel.symmetric(0.001, 0.049, 0.041, 0.1)
    assert m.spectral_radius() == pytest.approx(0.9, abs=1e-12)
    assert np.max(np.linalg.eigvals(branching_matrix(m)).real) == pytest.approx(0.9, abs=1e-12)
    assert HawkesModel.exponential(0.001, 0.01, 0.02).spectral_radius() == pytest.approx(0.5, rel=1e-15)
    bad = HawkesModel.asymmetric(0.001, 0.049, 0.049, 0.064, 0.1)
    assert bad.spectral_radius() == pytest.approx((0.049 + math.sqrt(0.049 * 0.064)) / 0.1, abs=1e-10)
    assert bad.spectral_radius() > 1
    assert not bad.is_stationary()
    with pytest.raises(NonStationaryError):
        mean_intensity(bad)


def test_spectral_radius_closed_forms_agree_with_eigensolve():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a0, am, am2, b = rng.uniform(0.001, 0.05, 3).tolist() + [rng.uniform(0.05, 0.2)]
        G = np.array([[a0, am], [am, a0]]) / b
        assert spectral_radius(G) == pytest.approx(spectral_radius_symmetric(a0, am, b), abs=1e-10)
        G = np.array([[a0, am], [am2, a0]]) / b
        assert spectral_radius(G) == pytest.approx(spectral_radius_asymmetric(a0, am, am2, b), abs=1e-10)


def test_spectral_radius_power_iteration_larger_matrix():
    rng = np.random.default_rng(2)
    G = rng.uniform(0, 0.2, (5, 5))
    assert spectral_radius(G) == pytest.approx(np.max(np.abs(np.linalg.eigvals(G))), abs=1e-10)


def test_mean_intensity_examples():
    assert mean_intensity(HawkesModel.exponential(0.3, 0.8, 1.2))[0] == pytest.approx(0.9, rel=1e-14)
    assert mean_intensity(HawkesModel.exponential(0.001, 0.0, 1.0))[0] == 0.001
    m = HawkesModel.symmetric(0.001, 0.025, 0.025, 0.1)
    mu = mean_intensity(m)
    np.testing.assert_allclose(mu, [0.002, 0.002], rtol=1e-12)
    np.testing.assert_allclose(mu, np.linalg.inv(np.eye(2) - branching_matrix(m)) @ [0.001, 0.001], rtol=1e-12)


def test_mean_intensity_fixed_point():
    m = HawkesModel.from_exp_matrices([0.002, 0.001], [[0.01, 0.03], [0.05, 0.02]], [[0.1, 0.2], [0.15, 0.1]])
    mu = mean_intensity(m)
    np.testing.assert_allclose(mu, m.baseline_array + branching_matrix(m) @ mu, rtol=1e-10)


def test_horizon_examples():
    assert horizon_for_expected_events(HawkesModel.exponential(0.001, 0.01, 0.02), 1e4) == pytest.approx(5e6)
    assert horizon_for_expected_events(HawkesModel.exponential(0.001, 0.01, 0.02), 1e6) == pytest.approx(5e8)
    assert horizon_for_expected_events(HawkesModel.symmetric(0.001, 0.025, 0.025, 0.1), 1e6) == pytest.approx(2.5e8)


def test_invalid_parameters_unrepresentable():
    with pytest.raises(ValueError):
        ExpKernel(-0.1, 1.0)
    with pytest.raises(ValueError):
        ExpKernel(0.1, 0.0)
    with pytest.raises(ValueError):
        HawkesModel.exponential(0.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        PowerLawKernel(0.0, 1.0, -2.0)


def test_json_round_trip_is_bit_exact(tmp_path):
    m = HawkesModel((0.1 + 0.2, 1 / 3), ((SumExpKernel((0.1, 2 / 7), (1 / 3, 5.0)), ExpKernel(1e-17, 1.1)),
                                          (PowerLawKernel(0.06, 0.185664, -2.5), ExpKernel(0.7, 3.0))))
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert back == m
    d = json.loads((tmp_path / "m.json").read_text())
    assert d["dimension"] == 2 and d["kernels"][1][0]["type"] == "powerlaw"
