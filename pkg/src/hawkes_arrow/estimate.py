"""Maximum-likelihood and non-parametric kernel estimation.

Two optimizer modes are provided:

* ``"nelder-mead"`` works on log-parameters, starts from a caller-supplied
  point (the true parameters in synthetic studies) and treats
  non-stationary points as infeasible.
* ``"l-bfgs-b"`` is a bound-constrained quasi-Newton search.  For univariate
  sums of exponentials the search runs on ``(log lambda0, logit n, weight
  logits, log beta)`` with analytic gradients, which keeps the endogeneity
  below ``1 - eps`` by construction.  Other families use log-parameters,
  finite-difference gradients and a radial projection onto ``rho <= 1 - eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, optimize

from . import _engine
from .events import EventSeries
from .likelihood import loglik, sumexp_loglik_grad
from .model import (HawkesModel, PowerLawKernel, SumExpKernel,
                    branching_matrix, spectral_radius)

STATIONARITY_EPS = 1e-4
NM_TOL = 1e-8
NM_MAX_EVALS = 50_000
LOG_BOUND = 40.0


# -- parameter maps ---------------------------------------------------------

class Family:
    """Map between a flat positive parameter vector and a HawkesModel."""

    names: tuple = ()
    dimension = 1

    def to_model(self, theta) -> HawkesModel:
        raise NotImplementedError

    def from_model(self, model: HawkesModel) -> np.ndarray:
        raise NotImplementedError

    # all parameters are positive unless a family overrides these
    def to_free(self, theta) -> np.ndarray:
        return np.log(np.asarray(theta, dtype=float))

    def from_free(self, z) -> np.ndarray:
        return np.exp(np.asarray(z, dtype=float))

    def scale_excitation(self, theta, factor) -> np.ndarray:
        """Multiply every kernel weight by ``factor`` (scales Gamma by ``factor``)."""
        raise NotImplementedError

    @property
    def n_params(self) -> int:
        return len(self.names)

    def describe(self) -> dict:
        return {"family": type(self).__name__}


class SumExpFamily(Family):
    """Univariate ``lambda0`` plus ``P`` exponentials: ``(lambda0, alpha_1..P, beta_1..P)``."""

    def __init__(self, P: int = 1):
        if P < 1:
            raise ValueError("P must be >= 1")
        self.P = int(P)
        if P == 1:
            self.names = ("lambda0", "alpha", "beta")
        else:
            self.names = ("lambda0",) + tuple(f"alpha{j + 1}" for j in range(P)) + tuple(
                f"beta{j + 1}" for j in range(P))

    def to_model(self, theta):
        theta = np.asarray(theta, dtype=float)
        P = self.P
        return HawkesModel.univariate(theta[0], SumExpKernel(tuple(theta[1:1 + P]), tuple(theta[1 + P:])))

    def from_model(self, model):
        k = model.kernels[0][0]
        if not isinstance(k, SumExpKernel) or k.n_terms != self.P:
            raise ValueError(f"model kernel does not match a {self.P}-term exponential family")
        return np.array([model.baseline[0], *k.alphas, *k.betas])

    def scale_excitation(self, theta, factor):
        out = np.array(theta, dtype=float)
        out[1:1 + self.P] *= factor
        return out

    def describe(self):
        return {"family": "exp" if self.P == 1 else "sumexp", "P": self.P}


class PowerLawFamily(Family):
    """``(lambda0, u, v, w)`` with ``w < -1`` mapped through ``log(-1 - w)``."""

    names = ("lambda0", "u", "v", "w")

    def to_model(self, theta):
        l0, u, v, w = np.asarray(theta, dtype=float)
        return HawkesModel.univariate(l0, PowerLawKernel(u, v, w))

    def from_model(self, model):
        k = model.kernels[0][0]
        if not isinstance(k, PowerLawKernel):
            raise ValueError("model kernel is not a power law")
        return np.array([model.baseline[0], k.u, k.v, k.w])

    def to_free(self, theta):
        l0, u, v, w = np.asarray(theta, dtype=float)
        return np.array([math.log(l0), math.log(u), math.log(v), math.log(-1.0 - w)])

    def from_free(self, z):
        z = np.asarray(z, dtype=float)
        return np.array([math.exp(z[0]), math.exp(z[1]), math.exp(z[2]), -1.0 - math.exp(z[3])])

    def scale_excitation(self, theta, factor):
        out = np.array(theta, dtype=float)
        out[1] *= factor
        return out

    def describe(self):
        return {"family": "powerlaw"}


class SymmetricFamily(Family):
    """Bivariate ``[[a0, am], [am, a0]]`` with shared baseline and decay."""

    names = ("lambda0", "alpha0", "alpha_m", "beta")
    dimension = 2

    def to_model(self, theta):
        return HawkesModel.symmetric(*np.asarray(theta, dtype=float))

    def from_model(self, model):
        a = np.array([[k.alphas[0] for k in row] for row in model.kernels])
        b = np.array([[k.betas[0] for k in row] for row in model.kernels])
        return np.array([np.mean(model.baseline), 0.5 * (a[0, 0] + a[1, 1]), 0.5 * (a[0, 1] + a[1, 0]),
                         np.mean(b)])

    def scale_excitation(self, theta, factor):
        out = np.array(theta, dtype=float)
        out[1:3] *= factor
        return out

    def describe(self):
        return {"family": "exp", "structure": "symmetric"}


class AsymmetricFamily(Family):
    """Bivariate ``[[a0, am1], [am2, a0]]`` with shared baseline and decay."""

    names = ("lambda0", "alpha0", "alpha_m1", "alpha_m2", "beta")
    dimension = 2

    def to_model(self, theta):
        return HawkesModel.asymmetric(*np.asarray(theta, dtype=float))

    def from_model(self, model):
        a = np.array([[k.alphas[0] for k in row] for row in model.kernels])
        b = np.array([[k.betas[0] for k in row] for row in model.kernels])
        return np.array([np.mean(model.baseline), 0.5 * (a[0, 0] + a[1, 1]), a[0, 1], a[1, 0], np.mean(b)])

    def scale_excitation(self, theta, factor):
        out = np.array(theta, dtype=float)
        out[1:4] *= factor
        return out

    def describe(self):
        return {"family": "exp", "structure": "asymmetric"}


class GeneralExpFamily(Family):
    """``M`` baselines, ``M x M`` weights and ``M x M`` decays, all free."""

    def __init__(self, M: int):
        self.dimension = int(M)
        idx = [(m, n) for m in range(M) for n in range(M)]
        self.names = tuple(f"lambda0_{m + 1}" for m in range(M)) + tuple(
            f"alpha_{m + 1}{n + 1}" for m, n in idx) + tuple(f"beta_{m + 1}{n + 1}" for m, n in idx)

    def to_model(self, theta):
        M = self.dimension
        theta = np.asarray(theta, dtype=float)
        return HawkesModel.from_exp_matrices(theta[:M], theta[M:M + M * M].reshape(M, M),
                                             theta[M + M * M:].reshape(M, M))

    def from_model(self, model):
        a = np.array([[k.alphas[0] for k in row] for row in model.kernels])
        b = np.array([[k.betas[0] for k in row] for row in model.kernels])
        return np.concatenate([model.baseline_array, a.ravel(), b.ravel()])

    def scale_excitation(self, theta, factor):
        M = self.dimension
        out = np.array(theta, dtype=float)
        out[M:M + M * M] *= factor
        return out

    def describe(self):
        return {"family": "exp", "structure": "general", "M": self.dimension}


def make_family(kind: str = "exp", P: int = 1, structure: str = "univariate", M: int = 2) -> Family:
    if structure == "univariate":
        if kind in ("exp", "sumexp"):
            return SumExpFamily(P if kind == "sumexp" else 1)
        if kind == "powerlaw":
            return PowerLawFamily()
        raise ValueError(f"unknown kernel family {kind!r}")
    if kind not in ("exp",):
        raise ValueError("multivariate fits support the exponential family only")
    if structure == "symmetric":
        return SymmetricFamily()
    if structure == "asymmetric":
        return AsymmetricFamily()
    if structure == "general":
        return GeneralExpFamily(M)
    raise ValueError(f"unknown structure {structure!r}")


# -- results ------------------------------------------------------------------

@dataclass
class FitResult:
    params: dict
    model: Optional[HawkesModel]
    loglik: float
    variant: str
    converged: bool
    iterations: int
    optimizer: str
    spectral_radius: float
    init_loglik: float
    message: str = ""
    family: dict = field(default_factory=dict)

    @property
    def theta(self) -> np.ndarray:
        return np.array(list(self.params.values()))

    @property
    def endogeneity(self) -> float:
        """Spectral radius of the fitted branching matrix (the endogeneity when ``M = 1``)."""
        return self.spectral_radius

    @property
    def n_free(self) -> int:
        return len(self.params)

    def to_dict(self) -> dict:
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "model": None if self.model is None else self.model.to_dict(),
            "loglik": self.loglik,
            "variant": self.variant,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "optimizer": self.optimizer,
            "endogeneity": self.spectral_radius,
            "spectral_radius": self.spectral_radius,
            "init_loglik": self.init_loglik,
            "message": self.message,
            "family": self.family,
        }


# -- objective ------------------------------------------------------------------

class _Objective:
    """Negative log-likelihood on free coordinates with an evaluation counter."""

    def __init__(self, series, family, variant, project=False):
        self.series = series
        self.family = family
        self.variant = variant
        self.project = project
        self.nfev = 0
        self.fast = isinstance(family, SumExpFamily)

    def theta(self, z):
        theta = self.family.from_free(z)
        if self.project:
            rho = self.rho(theta)
            if math.isfinite(rho) and rho > 1.0 - STATIONARITY_EPS:
                theta = self.family.scale_excitation(theta, (1.0 - STATIONARITY_EPS) / rho)
        return theta

    def rho(self, theta):
        """Spectral radius, ``inf`` where the parameters overflow or leave the family."""
        if isinstance(self.family, SumExpFamily):
            P = self.family.P
            return float(np.sum(theta[1:1 + P] / theta[1 + P:]))
        try:
            return spectral_radius(branching_matrix(self.family.to_model(theta)))
        except (ValueError, OverflowError, ZeroDivisionError, FloatingPointError):
            return math.inf

    def loglik_theta(self, theta) -> float:
        if not np.all(np.isfinite(theta)):
            return -np.inf
        if self.rho(theta) >= 1.0:
            return -np.inf
        try:
            if self.fast:
                P = self.family.P
                ll, _ = sumexp_loglik_grad(self.series, theta[0], theta[1:1 + P], theta[1 + P:], self.variant)
                return ll
            return loglik(self.family.to_model(theta), self.series, self.variant).value
        except (ValueError, FloatingPointError, ZeroDivisionError, OverflowError):
            return -np.inf

    def __call__(self, z) -> float:
        self.nfev += 1
        ll = self.loglik_theta(self.theta(z))
        return -ll if np.isfinite(ll) else np.inf


def _nelder_mead(fun, z0, max_evals):
    f0 = fun(z0)
    simplex = np.vstack([z0] + [z0 + 0.1 * e for e in np.eye(z0.size)])
    fatol = NM_TOL * (1.0 + abs(f0)) if np.isfinite(f0) else NM_TOL
    return optimize.minimize(fun, z0, method="Nelder-Mead",
                             options={"initial_simplex": simplex, "xatol": NM_TOL, "fatol": fatol,
                                      "maxfev": max_evals, "adaptive": False})


def mle(series: EventSeries, family: Family | str = "exp", init=None, variant: str = "standard",
        method: str = "nelder-mead", P: int = 1, max_evals: int = NM_MAX_EVALS) -> FitResult:
    """Maximise the chosen log-likelihood variant over a kernel family.

    ``init`` is a parameter vector in the family's order, a HawkesModel, or
    None (a data-driven starting point for univariate exponential families).
    """
    if isinstance(family, str):
        family = make_family(family, P)
    if len(series) < 2:
        raise ValueError("maximum likelihood needs at least 2 events")
    if series.dimension > family.dimension:
        raise ValueError("series has more components than the fitted family")
    if init is None:
        init = default_init(series, family)
    elif isinstance(init, HawkesModel):
        init = family.from_model(init)
    theta0 = np.asarray(init, dtype=float)
    if theta0.size != family.n_params or np.any(~np.isfinite(theta0)):
        raise ValueError(f"init must have {family.n_params} finite entries")

    if method == "nelder-mead":
        return _fit_nelder_mead(series, family, theta0, variant, max_evals)
    if method == "l-bfgs-b":
        if isinstance(family, SumExpFamily):
            return _fit_lbfgsb_sumexp(series, family, theta0, variant)
        return _fit_lbfgsb_generic(series, family, theta0, variant)
    raise ValueError(f"unknown optimizer {method!r}")


def mle_multivariate(series: EventSeries, structure: str = "symmetric", init=None, variant: str = "standard",
                     method: str = "nelder-mead", max_evals: int = NM_MAX_EVALS) -> FitResult:
    if series.dimension < 2 and structure != "general":
        raise ValueError("multivariate fits need a labelled series with M >= 2")
    family = make_family("exp", structure=structure, M=max(series.dimension, 2))
    if init is None:
        raise ValueError("multivariate fits need an initial parameter set")
    return mle(series, family, init, variant, method, max_evals=max_evals)


def _result(family, theta, ll, variant, converged, nfev, optimizer, init_ll, message):
    model = family.to_model(theta)
    return FitResult(dict(zip(family.names, map(float, theta))), model, float(ll), variant, bool(converged),
                     int(nfev), optimizer, spectral_radius(branching_matrix(model)), float(init_ll), message,
                     family.describe())


def _fit_nelder_mead(series, family, theta0, variant, max_evals):
    obj = _Objective(series, family, variant)
    z0 = family.to_free(theta0)
    init_ll = obj.loglik_theta(theta0)
    first = _nelder_mead(obj, z0, max_evals)
    second = _nelder_mead(obj, first.x, max(max_evals - obj.nfev, 1))
    best = second if second.fun <= first.fun else first
    converged = bool(first.success and second.success and np.isfinite(best.fun))
    z = best.x
    ll = -best.fun
    if not (ll >= init_ll) and np.isfinite(init_ll):
        # never report a point worse than the start
        z, ll, converged = z0, init_ll, False
    msg = second.message if isinstance(second.message, str) else str(second.message)
    return _result(family, family.from_free(z), ll, variant, converged, obj.nfev, "nelder-mead", init_ll, msg)


class _SumExpTransform:
    """Unconstrained coordinates for a stationary univariate sum of exponentials.

    ``z = (log lambda0, s, l_1..l_{P-1}, log beta_1..P)`` with
    ``n = (1 - eps) * sigmoid(s)``, weights ``softmax(l, 0)`` and
    ``alpha_j = n * pi_j * beta_j``.
    """

    def __init__(self, P):
        self.P = P
        self.cap = 1.0 - STATIONARITY_EPS

    def theta(self, z):
        P = self.P
        lam0 = math.exp(z[0])
        sig = 1.0 / (1.0 + math.exp(-z[1]))
        n = self.cap * sig
        logits = np.append(z[2:2 + P - 1], 0.0)
        pi = np.exp(logits - logits.max())
        pi /= pi.sum()
        betas = np.exp(z[1 + P:])
        alphas = n * pi * betas
        return lam0, alphas, betas, n, sig, pi

    def from_theta(self, theta):
        P = self.P
        lam0, alphas, betas = theta[0], np.asarray(theta[1:1 + P]), np.asarray(theta[1 + P:])
        gam = np.maximum(alphas / betas, 1e-12)
        n = min(gam.sum(), self.cap * (1 - 1e-9))
        sig = n / self.cap
        s = math.log(sig / (1.0 - sig))
        pi = gam / gam.sum()
        logits = np.log(pi) - math.log(pi[-1])
        return np.concatenate([[math.log(lam0), s], logits[:-1], np.log(betas)])

    def grad(self, z, g):
        """Chain rule from ``d/d(lambda0, alpha, beta)`` to ``d/dz``."""
        P = self.P
        lam0, alphas, betas, n, sig, pi = self.theta(z)
        ga = g[1:1 + P]
        gb = g[1 + P:]
        out = np.empty_like(z)
        out[0] = lam0 * g[0]
        out[1] = np.sum(ga * betas * pi) * self.cap * sig * (1.0 - sig)
        v = ga * betas * n  # d ll / d pi_j
        for k in range(P - 1):
            out[2 + k] = np.sum(v * pi * ((np.arange(P) == k) - pi[k]))
        out[1 + P:] = betas * (gb + ga * n * pi)
        return out


def _lbfgsb_converged(res) -> bool:
    """L-BFGS-B success, or a line-search stall at a numerically stationary point.

    With ``|LL|`` of order 1e5 the line search can run out of representable
    decrease before ``ftol`` triggers; an exit gradient below ``1e-7 |f|`` in the
    log coordinates means no step of order one changes the fit.
    """
    if res.success:
        return True
    msg = res.message if isinstance(res.message, str) else str(res.message)
    if not msg.startswith("ABNORMAL") or not np.isfinite(res.fun):
        return False
    return bool(np.max(np.abs(res.jac)) <= 1e-7 * max(1.0, abs(res.fun)))


def _fit_lbfgsb_sumexp(series, family, theta0, variant):
    P = family.P
    tr = _SumExpTransform(P)
    nfev = [0]

    def fun(z):
        nfev[0] += 1
        lam0, alphas, betas, *_ = tr.theta(z)
        try:
            ll, g = sumexp_loglik_grad(series, lam0, alphas, betas, variant)
        except (ValueError, OverflowError):
            return np.inf, np.zeros_like(z)
        if not np.isfinite(ll):
            return np.inf, np.zeros_like(z)
        return -ll, -tr.grad(z, g)

    z0 = tr.from_theta(theta0)
    lam0, a0, b0, *_ = tr.theta(z0)
    init_ll = -fun(z0)[0]
    bounds = [(-LOG_BOUND, LOG_BOUND)] * z0.size
    res = optimize.minimize(fun, z0, jac=True, method="L-BFGS-B", bounds=bounds,
                            options={"maxiter": 15_000, "maxfun": 30_000, "ftol": 1e-12, "gtol": 1e-8})
    z, ll, ok = res.x, -res.fun, _lbfgsb_converged(res)
    if not (ll >= init_ll) and np.isfinite(init_ll):
        z, ll, ok = z0, init_ll, False
    lam0, alphas, betas, *_ = tr.theta(z)
    theta = np.concatenate([[lam0], alphas, betas])
    msg = res.message if isinstance(res.message, str) else str(res.message)
    return _result(family, theta, ll, variant, ok and np.isfinite(ll), nfev[0], "l-bfgs-b", init_ll, msg)


def _fit_lbfgsb_generic(series, family, theta0, variant):
    obj = _Objective(series, family, variant, project=True)
    z0 = family.to_free(theta0)
    init_ll = obj.loglik_theta(obj.theta(z0))
    big = abs(init_ll) * 10 + 1e6 if np.isfinite(init_ll) else 1e12

    def fun(z):
        f = obj(z)
        return f if np.isfinite(f) else big

    res = optimize.minimize(fun, z0, method="L-BFGS-B", bounds=[(-LOG_BOUND, LOG_BOUND)] * z0.size,
                            options={"maxiter": 15_000, "maxfun": 30_000, "ftol": 1e-12, "gtol": 1e-8})
    theta = obj.theta(res.x)
    ll = obj.loglik_theta(theta)
    ok = _lbfgsb_converged(res) and np.isfinite(ll)
    if not (ll >= init_ll) and np.isfinite(init_ll):
        theta, ll, ok = obj.theta(z0), init_ll, False
    msg = res.message if isinstance(res.message, str) else str(res.message)
    return _result(family, theta, ll, variant, ok, obj.nfev, "l-bfgs-b", init_ll, msg)


def default_init(series: EventSeries, family: Family, target_n: float = 0.5) -> np.ndarray:
    """Data-driven starting point.

    The baseline takes ``1 - target_n`` of the empirical rate and the decay
    scale comes from the mean inter-arrival time.  With ``P > 1`` exponentials
    the decays are spread by factors of 10 around that scale and the target
    endogeneity is split evenly.  Power laws start at ``w = -2.5`` with ``v``
    equal to the mean gap; bivariate families split the excitation evenly
    between self and cross terms.
    """
    N, T = len(series), series.horizon
    if N < 2:
        raise ValueError("a data-driven start needs at least 2 events")
    rate = N / T
    gap = float(np.mean(np.diff(series.times)))
    beta0 = 1.0 / gap
    if isinstance(family, SumExpFamily):
        P = family.P
        betas = beta0 * 10.0 ** (np.arange(P) - (P - 1) / 2.0)
        alphas = target_n / P * betas
        return np.concatenate([[(1.0 - target_n) * rate], alphas, betas])
    if isinstance(family, PowerLawFamily):
        w = -2.5
        k = PowerLawKernel(target_n * (-1.0 - w) / gap ** (w + 1.0), gap, w)
        return np.array([(1.0 - target_n) * rate, k.u, k.v, k.w])
    M = family.dimension
    lam0 = (1.0 - target_n) * rate / M
    beta_c = beta0 / M  # per-component event rate sets the decay scale
    half = 0.5 * target_n * beta_c
    if isinstance(family, SymmetricFamily):
        return np.array([lam0, half, half, beta_c])
    if isinstance(family, AsymmetricFamily):
        return np.array([lam0, half, half, half, beta_c])
    if isinstance(family, GeneralExpFamily):
        a = np.full(M * M, target_n * beta_c / M)
        return np.concatenate([np.full(M, lam0), a, np.full(M * M, beta_c)])
    raise ValueError(f"no default starting point for {type(family).__name__}")


# -- non-parametric estimation ---------------------------------------------------

@dataclass(frozen=True)
class SampledKernel:
    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    delta: float
    tau_max: float
    window: float
    total_count: int
    regularization: float = 0.0
    condition: float = 1.0
    beta_guess: float = math.nan

    def to_dict(self) -> dict:
        return {"grid": self.grid.tolist(), "values": self.values.tolist(), "stderr": self.stderr.tolist(),
                "delta": self.delta, "tau_max": self.tau_max, "window": self.window,
                "total_count": self.total_count, "regularization": self.regularization,
                "condition": self.condition, "beta_guess": self.beta_guess}

    def equals(self, other: "SampledKernel") -> bool:
        """Bitwise equality of every array and scalar."""
        return (np.array_equal(self.grid, other.grid) and np.array_equal(self.values, other.values)
                and np.array_equal(self.stderr, other.stderr)
                and (self.delta, self.tau_max, self.window, self.total_count, self.regularization)
                == (other.delta, other.tau_max, other.window, other.total_count, other.regularization))


def binned_autocovariance(series: EventSeries, n_bins: int, max_lag: int):
    """Autocovariance of pooled bin counts at lags ``0..max_lag``.

    Bins tile ``[0, horizon]`` exactly so that the bins of the reversed series
    are the mirror image.  Lag products and edge sums are accumulated in
    integers, which makes the result bitwise invariant under reversal.
    """
    T = series.horizon
    idx = np.floor(series.times * (n_bins / T)).astype(np.int64)
    np.clip(idx, 0, n_bins - 1, out=idx)
    N = idx.size
    mean = N / n_bins
    S2 = _engine.lag_pair_counts(idx, max_lag)
    lags = np.arange(max_lag + 1)
    L = n_bins - lags
    # events in bins [0, L) and in bins [k, n_bins)
    head = np.searchsorted(idx, L, side="left")
    tail = N - np.searchsorted(idx, lags, side="left")
    edges = head + tail
    cov = (S2 - mean * edges + L * mean * mean) / L
    return cov, mean


def _guess_decay(series: EventSeries) -> float:
    """Inverse median inter-arrival time, rounded to 3 significant digits.

    The median gap tracks the within-cluster time scale of a self-exciting
    series much better than the mean gap.  Rounding makes the guess identical
    for a series and its reversal, whose gaps agree only up to rounding error.
    """
    med = float(np.median(np.diff(series.times)))
    if not med > 0:
        med = series.horizon / len(series)
    return float(f"{1.0 / med:.3g}")


def _kernel_on_grid(series, delta, tau_max, beta_guess, cond_limit):
    N = len(series)
    T = series.horizon
    K = int(round(tau_max / delta))
    n_bins = int(round(T / delta))
    if K < 3 or n_bins < 4 * K:
        raise ValueError(f"series too short: {n_bins} bins for {K} lags")
    d = T / n_bins  # exact tiling of the window
    rate = N / T
    cov, mean = binned_autocovariance(series, n_bins, K)
    g = cov[1:] / (rate * d * d)
    g_full = np.concatenate([[g[0]], g])  # lag 0 carries the Poisson delta; use the first lag
    A = np.eye(K) + d * linalg.toeplitz(g_full[:K])
    cond = float(np.linalg.cond(A))
    reg = 0.0
    if cond > cond_limit:
        AtA = A.T @ A
        reg = 1e-8 * float(np.trace(AtA))
        phi = linalg.solve(AtA + reg * np.eye(K), A.T @ g, assume_a="pos")
    else:
        phi = linalg.solve(A, g)
    L = n_bins - np.arange(1, K + 1)
    stderr = mean / np.sqrt(L) / (rate * d * d)
    grid = d * np.arange(1, K + 1)
    return SampledKernel(grid, phi, stderr, d, K * d, T, N, reg, cond, beta_guess)


def nonparametric_kernel(series: EventSeries, delta: Optional[float] = None, tau_max: Optional[float] = None,
                         beta_guess: Optional[float] = None, refine: int = 2,
                         cond_limit: float = 1e10) -> SampledKernel:
    """Kernel on a uniform lag grid from the autocovariance of binned counts.

    Solves the discretised Wiener-Hopf relation ``g = phi + phi * g`` on
    ``tau_k = k * delta`` (``k = 1..K``), with ``g`` the normalised
    conditional excess rate read off the count autocovariance.  A multivariate
    series is pooled, which is exact for symmetric excitation with a shared
    decay.  Only time-symmetric statistics enter, so a series and its
    reversal give the same kernel.

    Unset ``delta`` and ``tau_max`` default to ``0.1 / beta_guess`` and
    ``10 / beta_guess``.  Without an explicit ``beta_guess`` the decay is
    first guessed from the median gap and then replaced up to ``refine``
    times by the decay read off the previous estimate (as long as that
    readout is valid).
    """
    N = len(series)
    T = series.horizon
    if N < 10 or T <= 0:
        raise ValueError("series too short for non-parametric estimation")
    auto = beta_guess is None and delta is None and tau_max is None
    if beta_guess is None:
        beta_guess = _guess_decay(series)

    def run(bg):
        return _kernel_on_grid(series, 0.1 / bg if delta is None else delta,
                               10.0 / bg if tau_max is None else tau_max, bg, cond_limit)

    g = run(beta_guess)
    if auto:
        for _ in range(refine):
            est = exp_from_nonparametric(g)
            if not est.valid:
                break
            bg = float(f"{est.beta:.3g}")
            try:
                g = run(bg)
            except ValueError:
                break
    return g


@dataclass(frozen=True)
class NonParametricExp:
    lambda0: float
    alpha: float
    beta: float
    valid: bool
    reason: str = ""
    n_points: int = 0

    @property
    def endogeneity(self) -> float:
        return self.alpha / self.beta if self.beta > 0 else math.inf

    def model(self) -> HawkesModel:
        if not self.valid:
            raise ValueError(f"invalid non-parametric estimate: {self.reason}")
        return HawkesModel.exponential(self.lambda0, self.alpha, self.beta)


def exp_from_nonparametric(g: SampledKernel, total_count: Optional[int] = None,
                           horizon: Optional[float] = None) -> NonParametricExp:
    """Log-linear least squares of the positive kernel samples on ``tau <= tau_max / 2``."""
    N = g.total_count if total_count is None else total_count
    T = g.window if horizon is None else horizon
    keep = (g.values > 0) & (g.grid <= 0.5 * g.tau_max + 1e-12 * g.tau_max)
    npts = int(keep.sum())
    if npts < 3:
        return NonParametricExp(math.nan, math.nan, math.nan, False, "fewer than 3 positive samples", npts)
    x = g.grid[keep]
    y = np.log(g.values[keep])
    X = np.column_stack([np.ones_like(x), x])
    (intercept, slope), *_ = np.linalg.lstsq(X, y, rcond=None)
    beta = -slope
    alpha = math.exp(intercept)
    if not beta > 0:
        return NonParametricExp(math.nan, alpha, beta, False, "nonpositive decay", npts)
    n = alpha / beta
    if not n < 1:
        return NonParametricExp(math.nan, alpha, beta, False, "endogeneity >= 1", npts)
    return NonParametricExp(N / T * (1.0 - n), alpha, beta, True, "", npts)


__all__ = ["Family", "SumExpFamily", "PowerLawFamily", "SymmetricFamily", "AsymmetricFamily",
           "GeneralExpFamily", "make_family", "FitResult", "mle", "mle_multivariate", "default_init",
           "SampledKernel", "nonparametric_kernel", "exp_from_nonparametric", "NonParametricExp",
           "binned_autocovariance"]
