"""Log-likelihoods and compensators of Hawkes models.

Two variants are supported.  ``"standard"`` assumes the process starts empty
at time 0 with constant baseline.  ``"modified"`` assumes the observation
window opens on an already stationary process and replaces the baseline of
component ``m`` by

    lambda0_m + (mu_m - lambda0_m) * sum_n G^{mn}(t) / sum_n G^{mn}(0),

which is integrable in closed form for every kernel family, so the same
correction enters the likelihood and the compensators.

Intensities inside ``log`` are left limits: an event does not excite itself.
Exponential kernels run in O(N * terms) through the decay recursion; power-law
kernels are O(N^2) and guarded by ``max_pairwise_events``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _engine
from .events import EventSeries
from .model import (HawkesModel, NonStationaryError, PowerLawKernel, kernel_row_at_zero,
                    kernel_tables, mean_intensity)

VARIANTS = ("standard", "modified")
MAX_PAIRWISE_EVENTS = 200_000


class ScanResult(NamedTuple):
    lam_own: np.ndarray
    lam_total: np.ndarray
    integral: np.ndarray
    compensators: np.ndarray
    log_sum: np.ndarray
    n_clamped: int


@dataclass(frozen=True)
class LogLikValue:
    value: float
    variant: str
    components: tuple = ()
    n_clamped: int = 0

    def __float__(self) -> float:
        return self.value

    def to_dict(self) -> dict:
        return {"value": self.value, "variant": self.variant,
                "components": list(self.components), "n_clamped": self.n_clamped}


@dataclass(frozen=True)
class CompensatorSeries:
    """Integrated intensity between consecutive events of each component.

    ``per_component[m]`` has one value per event of ``m`` after its first.
    """

    per_component: tuple
    variant: str = "standard"
    boundary: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def values(self) -> np.ndarray:
        """All residuals pooled in component order."""
        if len(self.per_component) == 1:
            return self.per_component[0]
        return np.concatenate(self.per_component)

    def __len__(self) -> int:
        return int(sum(len(v) for v in self.per_component))


def _check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return variant


def _has_powerlaw(model: HawkesModel) -> bool:
    return any(isinstance(k, PowerLawKernel) for row in model.kernels for k in row)


def scan(model: HawkesModel, series: EventSeries, variant: str = "standard",
         max_pairwise_events: int = MAX_PAIRWISE_EVENTS) -> ScanResult:
    """Run the compiled pass and return intensities, integrals and compensators."""
    _check_variant(variant)
    M = model.dimension
    if series.dimension > M:
        raise ValueError(f"series has {series.dimension} components, model has {M}")
    if _has_powerlaw(model) and len(series) > max_pairwise_events:
        raise ValueError(f"power-law evaluation is O(N^2); {len(series)} events exceeds the cap "
                         f"{max_pairwise_events} (pass max_pairwise_events to override)")
    base = model.baseline_array
    excess = np.zeros(M)
    inv_c0 = np.zeros(M)
    if variant == "modified":
        excess = mean_intensity(model) - base
        c0 = kernel_row_at_zero(model)
        nz = c0 > 0
        inv_c0[nz] = 1.0 / c0[nz]
    tables = kernel_tables(model)
    out = _engine.scan(series.times, series.labels, series.horizon, base, excess, inv_c0, *tables)
    return ScanResult(*out)


def loglik(model: HawkesModel, series: EventSeries, variant: str = "standard", **kw) -> LogLikValue:
    r = scan(model, series, variant, **kw)
    parts = r.log_sum - r.integral
    return LogLikValue(float(np.sum(parts)), variant, tuple(float(x) for x in parts), int(r.n_clamped))


def loglik_standard(model: HawkesModel, series: EventSeries, **kw) -> LogLikValue:
    return loglik(model, series, "standard", **kw)


def loglik_modified(model: HawkesModel, series: EventSeries, **kw) -> LogLikValue:
    """Stationary-start likelihood; raises NonStationaryError when ``rho >= 1``."""
    return loglik(model, series, "modified", **kw)


def compensators(model: HawkesModel, series: EventSeries, variant: str = "standard", **kw) -> CompensatorSeries:
    r = scan(model, series, variant, **kw)
    labels = series.labels
    per = []
    for m in range(model.dimension):
        c = r.compensators[labels == m]
        per.append(c[1:] if c.size else c)
    # integral pieces not covered by any compensator: [0, first event] and [last event, T]
    boundary = r.integral - np.array([np.sum(p) for p in per])
    return CompensatorSeries(tuple(per), variant, boundary)


def intensity(model: HawkesModel, series: EventSeries, grid, variant: str = "standard") -> np.ndarray:
    """Intensity ``lambda^m(t)`` on ``grid`` from events strictly before each grid time.

    Direct O(N * len(grid)) evaluation meant for plotting traces.  Returns an
    array of shape ``(len(grid), M)``.
    """
    grid = np.asarray(grid, dtype=float)
    M = model.dimension
    out = np.tile(model.baseline_array, (grid.size, 1))
    if variant == "modified":
        excess = mean_intensity(model) - model.baseline_array
        c0 = kernel_row_at_zero(model)
        for m in range(M):
            if c0[m] > 0:
                out[:, m] += excess[m] / c0[m] * sum(k.value(grid) for k in model.kernels[m])
    labels = series.labels
    for src in range(M):
        tk = series.times[labels == src]
        lag = grid[:, None] - tk[None, :]
        mask = lag > 0
        lag = np.where(mask, lag, 0.0)
        for m in range(M):
            vals = model.kernels[m][src].value(lag)
            out[:, m] += np.sum(np.where(mask, vals, 0.0), axis=1)
    return out


def sumexp_loglik_grad(series: EventSeries, lambda0: float, alphas, betas, variant: str = "standard"):
    """Univariate sum-of-exponentials log-likelihood with its analytic gradient.

    Gradient order is ``(lambda0, alpha_1..P, beta_1..P)``.
    """
    _check_variant(variant)
    alphas = np.asarray(alphas, dtype=float).reshape(-1)
    betas = np.asarray(betas, dtype=float).reshape(-1)
    if variant == "modified" and np.sum(alphas / betas) >= 1:
        raise NonStationaryError("modified likelihood needs endogeneity < 1")
    ll, grad, _ = _engine.sumexp_loglik_grad(series.times, series.horizon, float(lambda0),
                                             alphas, betas, variant == "modified")
    return float(ll), grad
