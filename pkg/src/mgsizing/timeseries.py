"""Hourly input traces: CSV ingestion, PV conversion, synthetic years, windowing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HOURS_PER_YEAR = 8760
WEEK = 168
STC_IRRADIANCE = 1000.0  # W/m^2

# synthetic tariff: peak hours [PEAK_START, PEAK_END) are priced above diesel
OFFPEAK_PRICE = 0.12
PEAK_PRICE = 0.38
PEAK_START, PEAK_END = 12, 22

CSV_COLUMNS = ("hour", "load_kw", "grid_price", "pv_availability")


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class HourlyTrace:
    load_kw: np.ndarray
    grid_price: np.ndarray
    pv_availability: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("load_kw", "grid_price", "pv_availability"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise TraceError(f"{name} must be one-dimensional")
            arr.setflags(write=False)
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        H = arrays["load_kw"].shape[0]
        if H < 1:
            raise TraceError("trace must contain at least one hour")
        for name, arr in arrays.items():
            if arr.shape[0] != H:
                raise TraceError(f"{name} has {arr.shape[0]} rows, expected {H}")
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise TraceError(f"non-finite {name} at row {int(bad[0])}")
        for name in ("load_kw", "grid_price"):
            bad = np.flatnonzero(arrays[name] < 0)
            if bad.size:
                raise TraceError(f"negative {name} at row {int(bad[0])}")
        avail = arrays["pv_availability"]
        bad = np.flatnonzero((avail < 0) | (avail > 1))
        if bad.size:
            raise TraceError(f"pv_availability outside [0, 1] at row {int(bad[0])}")

    @property
    def H(self) -> int:
        return self.load_kw.shape[0]

    @property
    def timestamps(self) -> np.ndarray:
        return np.arange(self.H)

    @property
    def peak_load(self) -> float:
        return float(self.load_kw.max())

    @property
    def energy(self) -> float:
        """Total load energy in kWh (one-hour steps)."""
        return float(self.load_kw.sum())

    def slice(self, window: Window) -> HourlyTrace:
        s = slice(window.start, window.stop)
        return HourlyTrace(self.load_kw[s], self.grid_price[s], self.pv_availability[s])

    def head(self, hours: int) -> HourlyTrace:
        return self.slice(Window(0, min(hours, self.H)))

    def __eq__(self, other):
        if not isinstance(other, HourlyTrace):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("load_kw", "grid_price", "pv_availability"))

    __hash__ = None


@dataclass(frozen=True)
class Window:
    start: int
    length: int = WEEK

    def __post_init__(self):
        if self.length < 1 or self.start < 0:
            raise ValueError("window needs start >= 0 and length >= 1")

    @property
    def stop(self) -> int:
        return self.start + self.length


def windows(trace: HourlyTrace, length: int = WEEK) -> list[Window]:
    """Consecutive, non-overlapping windows covering the trace; the last may be short."""
    if length < 1:
        raise ValueError("window length must be >= 1")
    return [Window(s, min(length, trace.H - s)) for s in range(0, trace.H, length)]


def irradiance_to_availability(irradiance_wm2, stc_irradiance: float = STC_IRRADIANCE,
                               derate: float = 1.0) -> np.ndarray:
    """Per-unit PV output from plane-of-array irradiance: min(1, derate * G / G_stc)."""
    g = np.asarray(irradiance_wm2, dtype=float)
    if not np.all(np.isfinite(g)):
        raise TraceError("irradiance contains non-finite values")
    if not np.isfinite(stc_irradiance) or stc_irradiance <= 0:
        raise TraceError("stc_irradiance must be positive")
    if not 0 < derate <= 1:
        raise TraceError("derate must lie in (0, 1]")
    if np.any(g < 0):
        raise TraceError(f"negative irradiance at row {int(np.flatnonzero(g < 0)[0])}")
    return np.clip(derate * g / stc_irradiance, 0.0, 1.0)


def load_trace(path, columns: dict[str, str] | None = None, stc_irradiance: float = STC_IRRADIANCE,
               derate: float = 1.0) -> HourlyTrace:
    """Read a trace CSV with a header row.

    ``columns`` maps canonical names (``load_kw``, ``grid_price``,
    ``pv_availability`` or ``irradiance_wm2``) to header names in the file.
    An irradiance column is converted to availability.
    """
    path = Path(path)
    if not path.is_file():
        raise TraceError(f"trace file not found: {path}")
    mapping = {"load_kw": "load_kw", "grid_price": "grid_price",
               "pv_availability": "pv_availability", "irradiance_wm2": "irradiance_wm2"}
    mapping.update(columns or {})
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TraceError(f"{path} is empty") from None
        rows = [r for r in reader if any(cell.strip() for cell in r)]
    index = {name: i for i, name in enumerate(header)}

    def column(canonical: str) -> np.ndarray | None:
        name = mapping[canonical]
        if name not in index:
            return None
        i = index[name]
        out = np.empty(len(rows))
        for k, row in enumerate(rows):
            if len(row) != len(header):
                raise TraceError(f"row {k} has {len(row)} fields, header has {len(header)}")
            try:
                out[k] = float(row[i])
            except ValueError:
                raise TraceError(f"row {k}: cannot parse {name}={row[i]!r}") from None
            if not math.isfinite(out[k]):
                raise TraceError(f"row {k}: non-finite {name}")
        return out

    load = column("load_kw")
    price = column("grid_price")
    if load is None or price is None:
        raise TraceError(f"{path} needs '{mapping['load_kw']}' and '{mapping['grid_price']}' columns")
    avail = column("pv_availability")
    if avail is None:
        irr = column("irradiance_wm2")
        if irr is None:
            raise TraceError(f"{path} needs a pv_availability or irradiance_wm2 column")
        avail = irradiance_to_availability(irr, stc_irradiance, derate)
    return HourlyTrace(load, price, avail)


def write_trace(trace: HourlyTrace, path) -> None:
    # repr() round-trips floats exactly
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for t in range(trace.H):
            w.writerow([t, repr(float(trace.load_kw[t])), repr(float(trace.grid_price[t])),
                        repr(float(trace.pv_availability[t]))])


def synth_trace(seed: int = 0, H: int = HOURS_PER_YEAR) -> HourlyTrace:
    """Deterministic synthetic year (or part of one) for a ~1 MW residential feeder.

    PV follows a half-sine between sunrise and sunset whose day length and
    height vary with the season, scaled by a per-day clearness draw. Load has
    a morning and a larger evening peak plus Gaussian noise. The grid tariff
    has two tiers, with the afternoon/evening peak priced above diesel.
    """
    if H < 1:
        raise ValueError("H must be >= 1")
    rng = np.random.default_rng(seed)
    t = np.arange(H)
    hour = t % 24
    day = t // 24
    n_days = int(day[-1]) + 1

    season = np.sin(2 * np.pi * (np.arange(n_days) - 80) / 365.0)
    day_len = 12.0 + 3.0 * season
    sunrise = 12.0 - day_len / 2
    clearness = rng.uniform(0.45, 1.0, n_days)
    peak = (0.78 + 0.12 * season) * clearness
    phase = (hour + 0.5 - sunrise[day]) / day_len[day]
    pv = np.where((phase > 0) & (phase < 1), peak[day] * np.sin(np.pi * np.clip(phase, 0, 1)), 0.0)
    pv = np.clip(pv, 0.0, 1.0)

    morning = 260.0 * np.exp(-0.5 * ((hour - 8.0) / 1.5) ** 2)
    evening = 420.0 * np.exp(-0.5 * ((hour - 19.5) / 2.0) ** 2)
    seasonal = 90.0 * np.cos(2 * np.pi * day / 365.0)
    load = 380.0 + morning + evening + seasonal + rng.normal(0.0, 30.0, H)
    load = np.maximum(load, 0.0)

    price = np.where((hour >= PEAK_START) & (hour < PEAK_END), PEAK_PRICE, OFFPEAK_PRICE)
    return HourlyTrace(load, price, pv)
