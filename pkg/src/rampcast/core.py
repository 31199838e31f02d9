"""Evenly sampled series and the small set of transforms every module shares.

Missing observations are stored as ``NaN`` in the float value array and are
never imputed here; each operation documents how they propagate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Sequence

import numpy as np


class SeriesError(ValueError):
    """Raised when a series operation receives inputs it cannot honour."""


def _as_utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True, eq=False)
class UniformSeries:
    """Scalar series on a fixed grid ``start + i * interval``.

    Parameters
    ----------
    start
        Timestamp of index 0, normalised to UTC.
    interval
        Grid spacing in whole seconds.
    values
        Float array; ``NaN`` marks an absent observation.
    unit
        Free-form unit label carried as metadata.
    """

    start: datetime
    interval: int
    values: np.ndarray
    unit: str = ""
    name: str = ""

    def __post_init__(self) -> None:
        if int(self.interval) != self.interval or self.interval <= 0:
            raise SeriesError(f"interval must be a positive whole number of seconds, got {self.interval!r}")
        vals = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if np.isinf(vals).any():
            raise SeriesError("series values must be finite or NaN (absent)")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "interval", int(self.interval))
        object.__setattr__(self, "start", _as_utc(self.start))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UniformSeries):
            return NotImplemented
        return (
            self.start == other.start
            and self.interval == other.interval
            and self.unit == other.unit
            and len(self) == len(other)
            and bool(np.array_equal(self.values, other.values, equal_nan=True))
        )

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)

    @property
    def end(self) -> datetime:
        """Timestamp one interval past the last point."""
        return self.timestamp(len(self))

    def timestamp(self, i: int) -> datetime:
        return self.start + timedelta(seconds=int(i) * self.interval)

    def timestamps(self) -> list[datetime]:
        return [self.timestamp(i) for i in range(len(self))]

    def index_of(self, ts: datetime) -> int:
        """Grid index of ``ts``; raises if it is not on the grid."""
        offset = (_as_utc(ts) - self.start).total_seconds()
        i, rem = divmod(offset, self.interval)
        if rem != 0:
            raise SeriesError(f"{ts.isoformat()} is not on the {self.interval}s grid starting {self.start.isoformat()}")
        return int(i)

    def with_values(self, values: np.ndarray, start: datetime | None = None) -> "UniformSeries":
        return replace(self, values=values, start=self.start if start is None else start)

    def slice(self, lo: int, hi: int | None = None) -> "UniformSeries":
        hi = len(self) if hi is None else hi
        return self.with_values(self.values[lo:hi], start=self.timestamp(lo))


def concatenate(first: UniformSeries, second: UniformSeries) -> UniformSeries:
    """Join two adjacent series on the same grid."""
    if first.interval != second.interval:
        raise SeriesError("cannot concatenate series with different intervals")
    if first.end != second.start:
        raise SeriesError(
            f"series are not contiguous: first ends {first.end.isoformat()}, second starts {second.start.isoformat()}"
        )
    return first.with_values(np.concatenate([first.values, second.values]))


def resample_mean(series: UniformSeries, target_interval: int, min_count: int = 1) -> UniformSeries:
    """Aggregate onto a coarser grid by bucket means.

    Buckets are aligned to whole multiples of ``target_interval`` on the UTC
    clock; partial leading and trailing buckets are dropped. A bucket with
    fewer than ``min_count`` present values is absent.
    """
    if min_count < 1:
        raise SeriesError("min_count must be >= 1")
    ratio, rem = divmod(int(target_interval), series.interval)
    if rem != 0 or ratio < 1 or target_interval != int(target_interval):
        raise SeriesError(
            f"target interval {target_interval}s is not an integer multiple of the series interval {series.interval}s"
        )
    if ratio == 1:
        return series
    if min_count > ratio:
        raise SeriesError(f"min_count {min_count} exceeds bucket size {ratio}")

    epoch = series.start.timestamp()
    # first grid index sitting on a bucket boundary
    lead = (-int(epoch) % target_interval) // series.interval
    if (int(epoch) + lead * series.interval) % target_interval != 0:
        raise SeriesError("series grid never meets the target bucket boundaries")
    n_buckets = (len(series) - lead) // ratio
    if n_buckets <= 0:
        raise SeriesError("series too short to fill a single bucket")

    block = series.values[lead : lead + n_buckets * ratio].reshape(n_buckets, ratio)
    counts = (~np.isnan(block)).sum(axis=1)
    sums = np.nansum(block, axis=1)
    out = np.full(n_buckets, np.nan)
    ok = counts >= min_count
    out[ok] = sums[ok] / counts[ok]
    return UniformSeries(series.timestamp(lead), target_interval, out, series.unit, series.name)


def difference(series: UniformSeries, d: int = 1) -> UniformSeries:
    """Apply the first-difference operator ``d`` times (absent values propagate)."""
    if d < 0:
        raise SeriesError("differencing order must be non-negative")
    if d == 0:
        return series
    if len(series) < d + 1:
        raise SeriesError(f"need at least {d + 1} points to difference {d} times")
    return series.with_values(np.diff(series.values, n=d), start=series.timestamp(d))


def _diff_tails(anchors: np.ndarray) -> list[float]:
    # last value of each differencing level 0..d-1
    tails = []
    level = anchors
    for _ in range(anchors.shape[0]):
        tails.append(float(level[-1]))
        level = np.diff(level)
    return tails


def integrate(diff_forecasts: Sequence[float], anchors: Sequence[float]) -> np.ndarray:
    """Invert ``difference`` for forecasts, given the last ``d`` observed levels.

    ``len(anchors)`` is the differencing order; anchors are oldest first.
    """
    x = np.asarray(diff_forecasts, dtype=float).copy()
    a = np.asarray(anchors, dtype=float).reshape(-1)
    if a.size and np.isnan(a).any():
        raise SeriesError("integration anchors must be present")
    for tail in reversed(_diff_tails(a)):
        x = tail + np.cumsum(x)
    return x


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    mode: str = "chronological-holdout"

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise SeriesError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        if self.mode != "chronological-holdout":
            raise SeriesError(f"unsupported split mode {self.mode!r}")

    def test_length(self, n: int) -> int:
        # guards against 0.29 * 100 == 28.999999999999996
        return math.floor(n * self.test_fraction + 1e-9)


def chronological_split(series: UniformSeries, spec: SplitSpec = SplitSpec()) -> tuple[UniformSeries, UniformSeries]:
    """Hold out the chronological tail as the test series."""
    n = len(series)
    n_test = spec.test_length(n)
    if n < 2 or n_test < 1 or n_test >= n:
        raise SeriesError(f"split of length {n} at fraction {spec.test_fraction} leaves an empty train or test set")
    cut = n - n_test
    return series.slice(0, cut), series.slice(cut)


@dataclass(frozen=True)
class Scaler:
    """Per-feature min-max scaler.

    Constant features (max == min) map to the lower end of ``feature_range``
    and invert back to their constant.
    """

    data_min: np.ndarray
    data_max: np.ndarray
    feature_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.data_min, dtype=float))
        hi = np.atleast_1d(np.asarray(self.data_max, dtype=float))
        if lo.shape != hi.shape:
            raise SeriesError("scaler min/max shapes differ")
        if (hi < lo).any():
            raise SeriesError("scaler max must be >= min for every feature")
        a, b = (float(v) for v in self.feature_range)
        if not b > a:
            raise SeriesError("feature_range must be increasing")
        object.__setattr__(self, "data_min", lo)
        object.__setattr__(self, "data_max", hi)
        object.__setattr__(self, "feature_range", (a, b))

    @property
    def n_features(self) -> int:
        return self.data_min.shape[0]

    def _span(self) -> tuple[np.ndarray, np.ndarray]:
        width = self.data_max - self.data_min
        a, b = self.feature_range
        gain = np.where(width > 0, (b - a) / np.where(width > 0, width, 1.0), 0.0)
        return width, gain

    def apply(self, x: np.ndarray, feature: int | None = None) -> np.ndarray:
        """Scale ``x`` whose trailing axis indexes features (or a single ``feature``)."""
        x = np.asarray(x, dtype=float)
        _, gain = self._span()
        lo, g = (self.data_min, gain) if feature is None else (self.data_min[feature], gain[feature])
        return self.feature_range[0] + (x - lo) * g

    def invert(self, x: np.ndarray, feature: int | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        width, _ = self._span()
        a, b = self.feature_range
        lo, w = (self.data_min, width) if feature is None else (self.data_min[feature], width[feature])
        return lo + (x - a) * (w / (b - a))

    def to_dict(self) -> dict:
        return {
            "data_min": self.data_min.tolist(),
            "data_max": self.data_max.tolist(),
            "feature_range": list(self.feature_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.array(d["data_min"]), np.array(d["data_max"]), tuple(d.get("feature_range", (0.0, 1.0))))


def fit_scaler(train: np.ndarray, feature_range: tuple[float, float] = (0.0, 1.0)) -> Scaler:
    """Fit per-column min/max on training data, ignoring absent values.

    ``train`` is 1-D (one feature) or 2-D with features along axis 1.
    """
    arr = np.asarray(train, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    present = ~np.isnan(arr)
    if arr.shape[0] == 0 or not present.any(axis=0).all():
        raise SeriesError("every scaler feature needs at least one present value")
    return Scaler(np.nanmin(arr, axis=0), np.nanmax(arr, axis=0), feature_range)


@dataclass(frozen=True)
class Frame:
    """Aligned named columns on one grid."""

    columns: dict[str, UniformSeries] = field(default_factory=dict)

    def __post_init__(self) -> None:
        grids = {(s.start, s.interval, len(s)) for s in self.columns.values()}
        if len(grids) > 1:
            raise SeriesError("frame columns must share start, interval and length")

    def __getitem__(self, name: str) -> UniformSeries:
        return self.columns[name]

    def __contains__(self, name: object) -> bool:
        return name in self.columns

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def start(self) -> datetime:
        return next(iter(self.columns.values())).start

    @property
    def interval(self) -> int:
        return next(iter(self.columns.values())).interval

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.columns[n].values for n in names])

    def slice(self, lo: int, hi: int | None = None) -> "Frame":
        return Frame({k: v.slice(lo, hi) for k, v in self.columns.items()})
