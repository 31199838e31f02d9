"""Classic threshold ramp definitions, evaluated per time step.

Every detector fires on a strict ``>`` comparison. A step whose inputs
include an absent value is "not evaluable" and carries no flag. Flags are
aligned to the source index; positions where the window overruns the series
are also not evaluable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from rampcast.core import SeriesError, UniformSeries


@dataclass(frozen=True)
class BinaryRampConfig:
    delta_t: int = 6
    p_val: float = 1000.0
    p_rr: float = 100.0
    n_nam: int = 6

    def __post_init__(self) -> None:
        if self.delta_t <= 0 or self.n_nam <= 0:
            raise SeriesError("delta_t and n_nam must be positive")
        if not (self.p_val > 0 and self.p_rr > 0):
            raise SeriesError("thresholds must be strictly positive")


@dataclass(frozen=True)
class BinaryDetection:
    """Per-step flags. ``direction`` is 0 where the definition is unsigned."""

    method: str
    flags: np.ndarray
    direction: np.ndarray
    evaluable: np.ndarray

    def __len__(self) -> int:
        return self.flags.shape[0]

    @property
    def count(self) -> int:
        return int(self.flags.sum())

    @property
    def frequency(self) -> float:
        """Share of evaluable steps flagged as ramp."""
        n = int(self.evaluable.sum())
        return self.count / n if n else 0.0

    @property
    def positions(self) -> set[int]:
        return set(np.flatnonzero(self.flags).tolist())


def _values(series: UniformSeries | np.ndarray) -> np.ndarray:
    if isinstance(series, UniformSeries):
        return series.values
    return np.asarray(series, dtype=float)


def _finish(method: str, n: int, lo: int, stat: np.ndarray, threshold: float, signed: np.ndarray | None) -> BinaryDetection:
    flags = np.zeros(n, dtype=bool)
    direction = np.zeros(n, dtype=np.int8)
    evaluable = np.zeros(n, dtype=bool)
    ok = ~np.isnan(stat)
    hi = lo + stat.shape[0]
    evaluable[lo:hi] = ok
    with np.errstate(invalid="ignore"):
        fired = ok & (stat > threshold)
    flags[lo:hi] = fired
    if signed is not None:
        direction[lo:hi] = np.where(fired, np.sign(signed), 0).astype(np.int8)
    return BinaryDetection(method, flags, direction, evaluable)


def _check_window(n: int, delta_t: int) -> None:
    if delta_t < 1:
        raise SeriesError("delta_t must be >= 1")
    if delta_t >= n:
        raise SeriesError(f"delta_t={delta_t} must be shorter than the series ({n})")


def detect_endpoint(series, delta_t: int, p_val: float) -> BinaryDetection:
    """Flag ``t`` when ``|y[t + delta_t] - y[t]| > p_val``."""
    y = _values(series)
    _check_window(y.shape[0], delta_t)
    change = y[delta_t:] - y[:-delta_t]
    return _finish("endpoint", y.shape[0], 0, np.abs(change), p_val, change)


def detect_minmax(series, delta_t: int, p_val: float) -> BinaryDetection:
    """Flag ``t`` when the range of ``y[t .. t + delta_t]`` exceeds ``p_val``."""
    y = _values(series)
    _check_window(y.shape[0], delta_t)
    win = sliding_window_view(y, delta_t + 1)
    # max/min would silently skip NaN under nan-aware reductions; plain ones propagate
    spread = win.max(axis=1) - win.min(axis=1)
    return _finish("minmax", y.shape[0], 0, spread, p_val, None)


def detect_rate(series, delta_t: int, p_rr: float) -> BinaryDetection:
    """Flag ``t`` when the mean rate over ``delta_t`` samples exceeds ``p_rr`` per sample."""
    y = _values(series)
    _check_window(y.shape[0], delta_t)
    rate = (y[delta_t:] - y[:-delta_t]) / delta_t
    return _finish("rate", y.shape[0], 0, np.abs(rate), p_rr, rate)


def filtered_signal(series, n_nam: int) -> np.ndarray:
    """Mean of ``y[t + h] - y[t + h - n_nam]`` over ``h = 1 .. n_nam``.

    Defined for ``n_nam - 1 <= t <= len - 1 - n_nam``; ``NaN`` elsewhere.
    """
    y = _values(series)
    n = y.shape[0]
    if n_nam < 1:
        raise SeriesError("n_nam must be >= 1")
    if n < 2 * n_nam:
        raise SeriesError(f"series length {n} is below 2 * n_nam = {2 * n_nam}")
    lag = y[n_nam:] - y[:-n_nam]  # lag[j] = y[j + n] - y[j]
    # P^f_t averages lag[t + 1 - n .. t]
    means = sliding_window_view(lag, n_nam).sum(axis=1) / n_nam
    m = means.shape[0]
    out = np.full(n, np.nan)
    out[n_nam - 1 : n_nam - 1 + m] = means
    return out


def detect_filtered(series, n_nam: int, p_val: float) -> BinaryDetection:
    """Flag ``t`` when the filtered signal satisfies ``|P^f_t| > p_val``."""
    pf = filtered_signal(series, n_nam)
    n = pf.shape[0]
    lo = n_nam - 1
    m = n - 2 * n_nam + 1
    core = pf[lo : lo + m]
    return _finish("filtered", n, lo, np.abs(core), p_val, core)


DETECTORS = {
    "endpoint": lambda y, cfg: detect_endpoint(y, cfg.delta_t, cfg.p_val),
    "minmax": lambda y, cfg: detect_minmax(y, cfg.delta_t, cfg.p_val),
    "rate": lambda y, cfg: detect_rate(y, cfg.delta_t, cfg.p_rr),
    "filtered": lambda y, cfg: detect_filtered(y, cfg.n_nam, cfg.p_val),
}


def detect(method: str, series, config: BinaryRampConfig) -> BinaryDetection:
    try:
        return DETECTORS[method](series, config)
    except KeyError:
        raise SeriesError(f"unknown detector {method!r}; choose from {sorted(DETECTORS)}") from None
