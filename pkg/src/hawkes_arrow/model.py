"""Kernels, Hawkes model containers and their stationarity algebra.

A model of dimension ``M`` holds a baseline vector and an ``M x M`` matrix of
kernels where entry ``(m, n)`` is the excitation of component ``m`` caused by
events of component ``n``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np


class NonStationaryError(ValueError):
    """Raised when an operation needs ``rho(Gamma) < 1`` and the model violates it."""


class KernelDivergenceError(ValueError):
    """Raised for a kernel whose integral over ``[0, inf)`` diverges."""


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("kernel evaluated at negative lag")
    return t


@dataclass(frozen=True)
class SumExpKernel:
    """``K(t) = sum_j alpha_j exp(-beta_j t)``.

    A zero weight is allowed and gives a Poisson component.
    """

    alphas: tuple
    betas: tuple

    def __post_init__(self):
        alphas = tuple(float(a) for a in np.atleast_1d(self.alphas))
        betas = tuple(float(b) for b in np.atleast_1d(self.betas))
        if len(alphas) == 0 or len(alphas) != len(betas):
            raise ValueError("alphas and betas must be non-empty and of equal length")
        if any(not math.isfinite(a) or a < 0 for a in alphas):
            raise ValueError(f"kernel weights must be >= 0, got {alphas}")
        if any(not math.isfinite(b) or b <= 0 for b in betas):
            raise ValueError(f"decay rates must be > 0, got {betas}")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)

    @property
    def n_terms(self) -> int:
        return len(self.alphas)

    @property
    def n_params(self) -> int:
        return 2 * self.n_terms

    def value(self, t):
        t = _check_time(t)
        a = np.asarray(self.alphas)
        b = np.asarray(self.betas)
        out = np.sum(a * np.exp(-np.multiply.outer(t, b)), axis=-1)
        return float(out) if out.ndim == 0 else out

    def integral(self, a, b):
        """Integral of the kernel over ``[a, b]`` with ``0 <= a <= b``."""
        a, b = _check_time(a), _check_time(b)
        al = np.asarray(self.alphas)
        be = np.asarray(self.betas)
        out = np.sum(al / be * (np.exp(-np.multiply.outer(a, be)) - np.exp(-np.multiply.outer(b, be))), axis=-1)
        return float(out) if out.ndim == 0 else out

    def tail_integral(self, t):
        """Integral over ``[t, inf)``."""
        t = _check_time(t)
        al = np.asarray(self.alphas)
        be = np.asarray(self.betas)
        out = np.sum(al / be * np.exp(-np.multiply.outer(t, be)), axis=-1)
        return float(out) if out.ndim == 0 else out

    def endogeneity(self) -> float:
        return float(sum(a / b for a, b in zip(self.alphas, self.betas)))

    def to_dict(self) -> dict:
        if self.n_terms == 1:
            return {"type": "exp", "alpha": self.alphas[0], "beta": self.betas[0]}
        return {"type": "sumexp", "alphas": list(self.alphas), "betas": list(self.betas)}


def ExpKernel(alpha: float, beta: float) -> SumExpKernel:
    """Single exponential kernel ``alpha * exp(-beta t)``."""
    return SumExpKernel((alpha,), (beta,))


@dataclass(frozen=True)
class PowerLawKernel:
    """``K(t) = u (t + v)^w`` with ``u > 0``, ``v > 0`` and ``w < -1``."""

    u: float
    v: float
    w: float

    def __post_init__(self):
        for name in ("u", "v", "w"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.u > 0 and self.v > 0):
            raise ValueError(f"power-law kernel needs u > 0 and v > 0, got u={self.u}, v={self.v}")
        if not self.w < -1:
            raise KernelDivergenceError(f"power-law exponent must be < -1 for integrability, got w={self.w}")

    n_params = 3

    def value(self, t):
        t = _check_time(t)
        out = self.u * (t + self.v) ** self.w
        return float(out) if np.ndim(out) == 0 else out

    def integral(self, a, b):
        a, b = _check_time(a), _check_time(b)
        w1 = self.w + 1.0
        out = self.u / w1 * ((b + self.v) ** w1 - (a + self.v) ** w1)
        return float(out) if np.ndim(out) == 0 else out

    def tail_integral(self, t):
        t = _check_time(t)
        out = -self.u / (self.w + 1.0) * (t + self.v) ** (self.w + 1.0)
        return float(out) if np.ndim(out) == 0 else out

    def endogeneity(self) -> float:
        return -self.u / (self.w + 1.0) * self.v ** (self.w + 1.0)

    @classmethod
    def from_endogeneity(cls, n: float, u: float, w: float) -> "PowerLawKernel":
        """Solve ``n = -u v^(w+1) / (w+1)`` for the shift ``v``."""
        if w >= -1:
            raise KernelDivergenceError(f"w must be < -1, got {w}")
        v = (-n * (w + 1.0) / u) ** (1.0 / (w + 1.0))
        return cls(u, v, w)

    def to_dict(self) -> dict:
        return {"type": "powerlaw", "u": self.u, "v": self.v, "w": self.w}


Kernel = Union[SumExpKernel, PowerLawKernel]


def kernel_value(k: Kernel, t):
    return k.value(t)


def endogeneity(k: Kernel) -> float:
    return k.endogeneity()


def kernel_from_dict(d: dict) -> Kernel:
    kind = d.get("type")
    if kind == "exp":
        return ExpKernel(d["alpha"], d["beta"])
    if kind == "sumexp":
        return SumExpKernel(tuple(d["alphas"]), tuple(d["betas"]))
    if kind == "powerlaw":
        return PowerLawKernel(d["u"], d["v"], d["w"])
    raise ValueError(f"unknown kernel type {kind!r}")


@dataclass(frozen=True)
class HawkesModel:
    """Constant-baseline Hawkes process of dimension ``M``.

    Parameters
    ----------
    baseline : sequence of float
        Exogenous rates, one per component, all > 0.
    kernels : M x M nested sequence of kernels
        ``kernels[m][n]`` is the response of component ``m`` to an event of
        component ``n``.
    """

    baseline: tuple
    kernels: tuple

    def __post_init__(self):
        base = tuple(float(x) for x in np.atleast_1d(self.baseline))
        rows = tuple(tuple(row) for row in self.kernels)
        M = len(base)
        if M < 1:
            raise ValueError("model needs at least one component")
        if len(rows) != M or any(len(r) != M for r in rows):
            raise ValueError(f"kernel matrix must be {M}x{M}")
        if any(not math.isfinite(x) or x <= 0 for x in base):
            raise ValueError(f"baseline intensities must be > 0, got {base}")
        for row in rows:
            for k in row:
                if not isinstance(k, (SumExpKernel, PowerLawKernel)):
                    raise TypeError(f"not a kernel: {k!r}")
        object.__setattr__(self, "baseline", base)
        object.__setattr__(self, "kernels", rows)

    # -- constructors -----------------------------------------------------
    @classmethod
    def univariate(cls, lambda0: float, kernel: Kernel) -> "HawkesModel":
        return cls((lambda0,), ((kernel,),))

    @classmethod
    def exponential(cls, lambda0: float, alpha: float, beta: float) -> "HawkesModel":
        return cls.univariate(lambda0, ExpKernel(alpha, beta))

    @classmethod
    def from_exp_matrices(cls, lambda0, alpha, beta) -> "HawkesModel":
        alpha = np.asarray(alpha, dtype=float)
        beta = np.broadcast_to(np.asarray(beta, dtype=float), alpha.shape)
        M = alpha.shape[0]
        base = np.broadcast_to(np.asarray(lambda0, dtype=float), (M,))
        kernels = tuple(tuple(ExpKernel(alpha[m, n], beta[m, n]) for n in range(M)) for m in range(M))
        return cls(tuple(base), kernels)

    @classmethod
    def symmetric(cls, lambda0: float, alpha0: float, alpha_m: float, beta: float) -> "HawkesModel":
        """Bivariate model with excitation ``[[a0, am], [am, a0]]`` and shared rates."""
        return cls.from_exp_matrices(lambda0, [[alpha0, alpha_m], [alpha_m, alpha0]], beta)

    @classmethod
    def asymmetric(cls, lambda0: float, alpha0: float, alpha_m1: float, alpha_m2: float,
                   beta: float) -> "HawkesModel":
        """Bivariate model with excitation ``[[a0, am1], [am2, a0]]``."""
        return cls.from_exp_matrices(lambda0, [[alpha0, alpha_m1], [alpha_m2, alpha0]], beta)

    # -- queries ----------------------------------------------------------
    @property
    def dimension(self) -> int:
        return len(self.baseline)

    @property
    def baseline_array(self) -> np.ndarray:
        return np.array(self.baseline)

    @property
    def n_params(self) -> int:
        return self.dimension + sum(k.n_params for row in self.kernels for k in row)

    def is_exponential_family(self) -> bool:
        return all(isinstance(k, SumExpKernel) for row in self.kernels for k in row)

    def branching_matrix(self) -> np.ndarray:
        return branching_matrix(self)

    def spectral_radius(self) -> float:
        return spectral_radius(self.branching_matrix())

    def is_stationary(self) -> bool:
        return self.spectral_radius() < 1.0

    def mean_intensity(self) -> np.ndarray:
        return mean_intensity(self)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "baseline": list(self.baseline),
            "kernels": [[k.to_dict() for k in row] for row in self.kernels],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HawkesModel":
        model = cls(tuple(d["baseline"]), tuple(tuple(kernel_from_dict(k) for k in row) for row in d["kernels"]))
        if "dimension" in d and int(d["dimension"]) != model.dimension:
            raise ValueError(f"dimension {d['dimension']} does not match baseline length {model.dimension}")
        return model

    def to_json(self) -> str:
        # repr-based float formatting round-trips doubles exactly
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HawkesModel":
        return cls.from_dict(json.loads(text))


def branching_matrix(m: HawkesModel) -> np.ndarray:
    """``Gamma[m, n] = integral of G^{mn}`` over ``[0, inf)``."""
    return np.array([[k.endogeneity() for k in row] for row in m.kernels])


def _power_iteration(G: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000) -> float | None:
    # shift by I so that periodic nonnegative matrices still converge
    A = G + np.eye(G.shape[0])
    x = np.ones(G.shape[0]) / G.shape[0]
    lam = 0.0
    for _ in range(max_iter):
        y = A @ x
        new = np.linalg.norm(y, 1)
        if new == 0:
            return 0.0
        y /= new
        if abs(new - lam) <= tol * max(1.0, new) and np.max(np.abs(y - x)) <= tol:
            return new - 1.0
        x, lam = y, new
    return None


def spectral_radius(gamma: np.ndarray) -> float:
    """Largest eigenvalue modulus of a nonnegative branching matrix.

    Closed form for ``M <= 2``; shifted power iteration above that, falling
    back to a dense eigen-solve if the iteration stalls.
    """
    G = np.atleast_2d(np.asarray(gamma, dtype=float))
    if G.shape[0] == 1:
        return float(abs(G[0, 0]))
    if G.shape[0] == 2:
        a, b, c, d = G[0, 0], G[0, 1], G[1, 0], G[1, 1]
        half = 0.5 * (a - d)
        return float(0.5 * (a + d) + math.sqrt(half * half + b * c))
    rho = _power_iteration(G)
    if rho is None:
        rho = float(np.max(np.abs(np.linalg.eigvals(G))))
    return float(rho)


def spectral_radius_symmetric(alpha0: float, alpha_m: float, beta: float) -> float:
    return (alpha0 + alpha_m) / beta


def spectral_radius_asymmetric(alpha0: float, alpha_m1: float, alpha_m2: float, beta: float) -> float:
    return (alpha0 + math.sqrt(alpha_m1 * alpha_m2)) / beta


def mean_intensity(m: HawkesModel) -> np.ndarray:
    """Stationary mean rate ``(I - Gamma)^{-1} lambda0``."""
    G = branching_matrix(m)
    rho = spectral_radius(G)
    if not rho < 1.0:
        raise NonStationaryError(f"spectral radius {rho:.6g} >= 1, no stationary mean")
    base = m.baseline_array
    if m.dimension == 1:
        return np.array([base[0] / (1.0 - G[0, 0])])
    return np.linalg.solve(np.eye(m.dimension) - G, base)


def horizon_for_expected_events(m: HawkesModel, n_target: float) -> float:
    """Horizon ``T`` for which the expected total event count equals ``n_target``."""
    if not n_target > 0:
        raise ValueError("target event count must be positive")
    return float(n_target / np.sum(mean_intensity(m)))


def load_model(path) -> HawkesModel:
    with open(path, encoding="utf-8") as fh:
        return HawkesModel.from_json(fh.read())


def save_model(m: HawkesModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(m.to_json())
        fh.write("\n")


def kernel_tables(m: HawkesModel):
    """Flatten the kernel matrix into the term tables used by the compiled loops.

    Returns ``(exp_target, exp_source, exp_alpha, exp_beta, pl_target,
    pl_source, pl_u, pl_v, pl_w)``.  Zero-weight exponential terms are dropped.
    """
    e_t, e_s, e_a, e_b = [], [], [], []
    p_t, p_s, p_u, p_v, p_w = [], [], [], [], []
    for i, row in enumerate(m.kernels):
        for j, k in enumerate(row):
            if isinstance(k, SumExpKernel):
                for a, b in zip(k.alphas, k.betas):
                    if a > 0:
                        e_t.append(i)
                        e_s.append(j)
                        e_a.append(a)
                        e_b.append(b)
            else:
                p_t.append(i)
                p_s.append(j)
                p_u.append(k.u)
                p_v.append(k.v)
                p_w.append(k.w)
    ia = lambda x: np.array(x, dtype=np.int64)
    fa = lambda x: np.array(x, dtype=np.float64)
    return ia(e_t), ia(e_s), fa(e_a), fa(e_b), ia(p_t), ia(p_s), fa(p_u), fa(p_v), fa(p_w)


def kernel_row_at_zero(m: HawkesModel) -> np.ndarray:
    """``sum_n G^{mn}(0)`` per target component."""
    return np.array([sum(k.value(0.0) for k in row) for row in m.kernels])


def as_model(obj: Union[HawkesModel, dict, str]) -> HawkesModel:
    if isinstance(obj, HawkesModel):
        return obj
    if isinstance(obj, dict):
        return HawkesModel.from_dict(obj)
    return HawkesModel.from_json(obj)


__all__ = [
    "NonStationaryError", "KernelDivergenceError", "SumExpKernel", "ExpKernel", "PowerLawKernel",
    "Kernel", "HawkesModel", "kernel_value", "endogeneity", "branching_matrix", "spectral_radius",
    "spectral_radius_symmetric", "spectral_radius_asymmetric", "mean_intensity",
    "horizon_for_expected_events", "kernel_from_dict", "load_model", "save_model",
]
