"""Ogata thinning simulation, burn-in truncation and reproducible RNG streams."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _engine
from .events import EventSeries, reverse
from .model import HawkesModel, horizon_for_expected_events, kernel_tables, mean_intensity

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


class BurnInError(RuntimeError):
    """The intensity never reached its stationary mean inside the horizon."""


class ThinningBoundError(AssertionError):
    """A thinning candidate exceeded its dominating rate."""


def stream(master_seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the run identified by ``(master_seed, *keys)``.

    Streams are derived by hashing the key tuple, so a sweep gives the same
    draws for a run regardless of execution order or worker count.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(master_seed), *map(int, keys)])))


def _generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    if seed is None:
        return np.random.Generator(np.random.Philox())
    return stream(seed)


@dataclass(frozen=True)
class SimulationRecord:
    series: EventSeries
    burn_in_time: float
    raw_count: int
    seed: Optional[int] = None


def simulate(model: HawkesModel, horizon: float, seed: SeedLike = None, check_bound: bool = True) -> EventSeries:
    """Draw one path on ``[0, horizon]`` by thinning."""
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    rng = _generator(seed)
    tables = kernel_tables(model)
    try:
        expected = float(np.sum(mean_intensity(model))) * horizon
    except ValueError:
        expected = float(np.sum(model.baseline)) * horizon
    capacity = int(min(max(1.2 * expected + 64, 64), 5e7))
    times, comps, _, n_viol = _engine.thin(rng, float(horizon), model.baseline_array, *tables, capacity)
    if check_bound and n_viol:
        raise ThinningBoundError(f"{n_viol} thinning candidates exceeded the dominating rate")
    return EventSeries(times, float(horizon), comps if model.dimension > 1 else None, model.dimension)


def burn_in_time(series: EventSeries, model: HawkesModel) -> float:
    """First event time where the left-limit total intensity reaches the total stationary mean."""
    threshold = float(np.sum(mean_intensity(model)))
    idx = _engine.first_crossing(series.times, series.labels, model.baseline_array,
                                 *kernel_tables(model), threshold)
    if idx < 0:
        raise BurnInError(f"total intensity never reached its stationary mean {threshold:.6g} "
                          f"over {len(series)} events")
    return float(series.times[idx])


def burn_in_trim(series: EventSeries, model: HawkesModel, seed: Optional[int] = None) -> SimulationRecord:
    """Discard events up to and including the burn-in time and shift the origin there."""
    t0 = burn_in_time(series, model)
    return SimulationRecord(series.shifted(t0), t0, len(series), seed)


def simulate_stationary(model: HawkesModel, horizon: Optional[float] = None, seed: int = 0,
                        expected_events: Optional[float] = None, run: int = 0,
                        max_attempts: int = 10) -> SimulationRecord:
    """Simulate and burn in, redrawing with a fresh sub-stream if the mean is never reached."""
    if horizon is None:
        if expected_events is None:
            raise ValueError("give a horizon or an expected event count")
        horizon = horizon_for_expected_events(model, expected_events)
    last = None
    for attempt in range(max_attempts):
        s = simulate(model, horizon, stream(seed, run, attempt))
        try:
            return burn_in_trim(s, model, seed)
        except BurnInError as exc:
            last = exc
    raise BurnInError(f"no stationarity reached in {max_attempts} attempts: {last}")


__all__ = ["BurnInError", "ThinningBoundError", "SimulationRecord", "stream", "simulate",
           "burn_in_time", "burn_in_trim", "simulate_stationary", "reverse"]
