"""Event series container, time reversal and the shared CSV format."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


class EventFileError(ValueError):
    """Malformed event file; ``line`` is the 1-based line number when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True, eq=False)
class EventSeries:
    """Strictly increasing event times on ``[0, horizon]``.

    ``components`` holds 0-based labels for multivariate series (the CSV
    format uses 1-based labels).  ``dimension`` defaults to ``max(label)+1``.
    """

    times: np.ndarray
    horizon: float
    components: Optional[np.ndarray] = None
    dimension: int = 0
    _mirror: Optional["EventSeries"] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        t = np.array(self.times, dtype=np.float64).reshape(-1)
        T = float(self.horizon)
        if not np.isfinite(T):
            raise ValueError("horizon must be finite")
        if t.size:
            if not np.all(np.isfinite(t)):
                raise ValueError("event times must be finite")
            if t[0] < 0:
                raise ValueError("event times must be >= 0")
            if np.any(np.diff(t) <= 0):
                raise ValueError("event times must be strictly increasing")
            if t[-1] > T:
                raise ValueError(f"last event {t[-1]!r} exceeds horizon {T!r}")
        elif T < 0:
            raise ValueError("horizon must be >= 0")
        comps = self.components
        dim = int(self.dimension)
        if comps is not None:
            comps = np.array(comps, dtype=np.int64).reshape(-1)
            if comps.size != t.size:
                raise ValueError("components must align with times")
            if comps.size and comps.min() < 0:
                raise ValueError("component labels must be >= 0")
            need = int(comps.max()) + 1 if comps.size else 1
            dim = max(dim, need)
            comps.setflags(write=False)
        else:
            dim = max(dim, 1)
            if dim > 1:
                raise ValueError("multivariate dimension given without component labels")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "horizon", T)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "dimension", dim)

    def __len__(self) -> int:
        return int(self.times.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventSeries):
            return NotImplemented
        same_comps = (self.components is None and other.components is None) or (
            self.components is not None and other.components is not None
            and np.array_equal(self.components, other.components))
        return (self.horizon == other.horizon and self.dimension == other.dimension
                and np.array_equal(self.times, other.times) and same_comps)

    __hash__ = None

    @property
    def labels(self) -> np.ndarray:
        """Component labels, zeros for a univariate series."""
        if self.components is None:
            return np.zeros(self.times.size, dtype=np.int64)
        return self.components

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.dimension)

    def component_times(self, m: int) -> np.ndarray:
        return self.times[self.labels == m]

    def shifted(self, t0: float) -> "EventSeries":
        """Drop events at or before ``t0`` and move the origin to ``t0``."""
        keep = self.times > t0
        comps = None if self.components is None else self.components[keep]
        return EventSeries(self.times[keep] - t0, self.horizon - t0, comps, self.dimension)

    def window(self, start: float, stop: float) -> "EventSeries":
        """Events in ``[start, stop)`` re-based to ``start`` with horizon ``stop - start``."""
        keep = (self.times >= start) & (self.times < stop)
        comps = None if self.components is None else self.components[keep]
        return EventSeries(self.times[keep] - start, stop - start, comps, self.dimension)

    def relabel(self, perm) -> "EventSeries":
        """Map component ``m`` to ``perm[m]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return EventSeries(self.times, self.horizon, perm[self.labels], self.dimension)


def reverse(s: EventSeries) -> EventSeries:
    """Time-reversed series ``t_i^b = T - t_{N+1-i}``; labels travel with events.

    Floating-point subtraction is not an exact involution, so the reversed
    series remembers its source and reversing it again returns the source.
    """
    if s._mirror is not None and s._mirror.horizon == s.horizon:
        return s._mirror
    T = s.horizon
    times = T - s.times[::-1]
    comps = None if s.components is None else s.components[::-1]
    return EventSeries(times, T, comps, s.dimension, _mirror=s)


# -- CSV ------------------------------------------------------------------

def format_time(t: float) -> str:
    """Shortest round-trip decimal with at least nine fractional digits."""
    return np.format_float_positional(float(t), unique=True, trim="k", min_digits=9)


def write_events_csv(s: EventSeries, path, horizon_sidecar: bool = True) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_events_csv_text(s))
    if horizon_sidecar:
        sidecar = path.with_suffix(path.suffix + ".json")
        with open(sidecar, "w", encoding="utf-8") as fh:
            json.dump({"horizon": s.horizon, "dimension": s.dimension, "count": len(s)}, fh, indent=2)
            fh.write("\n")


def _events_csv_text(s: EventSeries) -> str:
    buf = io.StringIO()
    multi = s.components is not None
    buf.write("time,component\n" if multi else "time\n")
    if multi:
        for t, c in zip(s.times, s.components):
            buf.write(f"{format_time(t)},{int(c) + 1}\n")
    else:
        for t in s.times:
            buf.write(f"{format_time(t)}\n")
    return buf.getvalue()


@dataclass
class RawEvents:
    """Parsed CSV columns before any series invariants are enforced."""

    times: np.ndarray
    components: Optional[np.ndarray]
    prices: Optional[np.ndarray]


def read_raw_csv(path) -> RawEvents:
    """Parse ``time[,component][,price]`` rows without ordering checks."""
    times, comps, prices = [], [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return RawEvents(np.empty(0), None, None)
        header = [h.strip().lower() for h in header]
        if not header or header[0] != "time":
            raise EventFileError(f"expected header starting with 'time', got {header}", 1)
        unknown = set(header) - {"time", "component", "price"}
        if unknown:
            raise EventFileError(f"unknown columns {sorted(unknown)}", 1)
        ci = header.index("component") if "component" in header else None
        pi = header.index("price") if "price" in header else None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not x.strip() for x in row):
                continue
            if len(row) != len(header):
                raise EventFileError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                times.append(float(row[0]))
                if ci is not None:
                    c = int(row[ci])
                    if c < 1:
                        raise ValueError("component labels start at 1")
                    comps.append(c - 1)
                if pi is not None:
                    prices.append(float(row[pi]))
            except ValueError as exc:
                raise EventFileError(f"cannot parse {row!r}: {exc}", lineno) from None
            if not np.isfinite(times[-1]):
                raise EventFileError(f"non-finite time {row[0]!r}", lineno)
    return RawEvents(
        np.array(times, dtype=np.float64),
        None if ci is None else np.array(comps, dtype=np.int64),
        None if pi is None else np.array(prices, dtype=np.float64),
    )


def _sidecar(path) -> dict:
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        return {}
    with open(sidecar, encoding="utf-8") as fh:
        return json.load(fh)


def read_horizon_sidecar(path) -> Optional[float]:
    h = _sidecar(path).get("horizon")
    return None if h is None else float(h)


def read_events_csv(path, horizon: Optional[float] = None) -> EventSeries:
    """Read an event file; the horizon comes from the argument, the sidecar, or the last event."""
    raw = read_raw_csv(path)
    if raw.times.size > 1:
        bad = np.flatnonzero(np.diff(raw.times) <= 0)
        if bad.size:
            raise EventFileError("event times must be strictly increasing", int(bad[0]) + 3)
    meta = _sidecar(path)
    if horizon is None and meta.get("horizon") is not None:
        horizon = float(meta["horizon"])
    if horizon is None:
        horizon = float(raw.times[-1]) if raw.times.size else 0.0
    dim = int(meta.get("dimension", 0)) if raw.components is not None else 0
    return EventSeries(raw.times, horizon, raw.components, dim)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


__all__ = ["EventSeries", "EventFileError", "reverse", "read_events_csv", "write_events_csv",
           "read_raw_csv", "format_time", "file_digest"]
