"""Continuous ramp function from discrete Haar wavelet coefficients.

For a scale ``lam`` the Haar kernel puts ``+1/sqrt(lam)`` on the first half of
the window and ``-1/sqrt(lam)`` on the second half (zero middle weight when
``lam`` is odd), so a rising window yields a negative raw coefficient. The ramp
function sums the centre-aligned coefficients over a contiguous band of scales
and, with sign correction on, flips the sign so that ramp-ups are positive.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Union

import numpy as np

from rampcast.core import SeriesError, UniformSeries

log = logging.getLogger(__name__)


class RampClass(enum.IntEnum):
    DOWN = -1
    NONE = 0
    UP = 1

    @property
    def code(self) -> str:
        return {1: "U", -1: "D", 0: "N"}[int(self)]


@dataclass(frozen=True)
class WaveletConfig:
    lambda_min: int = 2
    lambda_max: int = 6
    sign_correction: bool = True

    def __post_init__(self) -> None:
        if self.lambda_min < 2:
            raise SeriesError("lambda_min must be >= 2: a gradient needs two points")
        if self.lambda_max < self.lambda_min:
            raise SeriesError("lambda_max must be >= lambda_min")

    @property
    def scales(self) -> range:
        return range(self.lambda_min, self.lambda_max + 1)


@dataclass(frozen=True)
class WaveletCoefficients:
    """Coefficients of one scale, aligned to the source index.

    ``edge`` marks positions whose window overruns the series; those
    coefficients are set to zero. ``NaN`` marks windows with absent input.
    """

    scale: int
    values: np.ndarray
    edge: np.ndarray


@dataclass(frozen=True)
class RampFunctionSeries:
    series: UniformSeries
    config: WaveletConfig

    @property
    def values(self) -> np.ndarray:
        return self.series.values

    def __len__(self) -> int:
        return len(self.series)


def haar_kernel(lam: int) -> np.ndarray:
    """Discrete Haar weights of length ``lam``; positive and negative weights cancel pairwise."""
    if lam < 2:
        raise SeriesError(f"Haar scale must be >= 2, got {lam}")
    half = lam // 2
    w = np.zeros(lam)
    amp = 1.0 / math.sqrt(lam)
    w[:half] = amp
    w[lam - half :] = -amp
    return w


def _raw_coefficients(y: np.ndarray, lam: int) -> tuple[np.ndarray, np.ndarray]:
    n = y.shape[0]
    if lam > n:
        raise SeriesError(f"scale {lam} exceeds series length {n}")
    half = lam // 2
    m = n - lam + 1  # number of full windows
    acc = np.zeros(m)
    # paired differences keep level shifts out of the sum; fixed order keeps
    # the result bit-identical under time shifts
    for k in range(half):
        acc += y[k : k + m] - y[lam - half + k : lam - half + k + m]
    window = acc * (1.0 / math.sqrt(lam))
    out = np.zeros(n)
    edge = np.ones(n, dtype=bool)
    offset = (lam - 1) // 2
    out[offset : offset + m] = window
    edge[offset : offset + m] = False
    return out, edge


def wavelet_coefficients(series: UniformSeries, lam: int) -> WaveletCoefficients:
    """Raw (uncorrected) Haar coefficients at scale ``lam``, centre-aligned.

    The coefficient at index ``c`` is the kernel dotted with
    ``y[tau : tau + lam]`` where ``c = tau + (lam - 1) // 2``.
    """
    if lam < 2:
        raise SeriesError(f"Haar scale must be >= 2, got {lam}")
    vals, edge = _raw_coefficients(series.values, lam)
    return WaveletCoefficients(lam, vals, edge)


def ramp_function(series: UniformSeries, config: WaveletConfig = WaveletConfig()) -> RampFunctionSeries:
    """Sum of centre-aligned Haar coefficients over ``lambda_min..lambda_max``."""
    if len(series) < config.lambda_max:
        raise SeriesError(f"series of length {len(series)} is shorter than lambda_max={config.lambda_max}")
    total = np.zeros(len(series))
    for lam in config.scales:
        total = total + _raw_coefficients(series.values, lam)[0]
    if config.sign_correction:
        total = -total
    out = UniformSeries(series.start, series.interval, total, unit="", name="R_t")
    return RampFunctionSeries(out, config)


@dataclass(frozen=True)
class AbsoluteThreshold:
    theta: float

    def __post_init__(self) -> None:
        if not self.theta > 0:
            raise SeriesError("absolute threshold must be > 0")

    def resolve(self, reference: np.ndarray) -> float:
        return float(self.theta)


@dataclass(frozen=True)
class QuantileThreshold:
    """Threshold at the ``q``-quantile (linear interpolation) of ``|R_t|``."""

    q: float = 0.9

    def __post_init__(self) -> None:
        if not 0.0 < self.q < 1.0:
            raise SeriesError("quantile must lie in (0, 1)")

    def resolve(self, reference: np.ndarray) -> float:
        mag = np.abs(np.asarray(reference, dtype=float))
        mag = mag[~np.isnan(mag)]
        if mag.size == 0:
            raise SeriesError("no present ramp-function values to take a quantile of")
        return float(np.quantile(mag, self.q))


ThresholdSpec = Union[AbsoluteThreshold, QuantileThreshold]


@dataclass(frozen=True)
class RampClassSeries:
    labels: np.ndarray  # int8 RampClass codes
    threshold: float
    start: datetime
    interval: int

    def __len__(self) -> int:
        return self.labels.shape[0]

    def codes(self) -> list[str]:
        return [RampClass(int(v)).code for v in self.labels]


def classify(
    ramp_fn: RampFunctionSeries | np.ndarray,
    spec: ThresholdSpec = QuantileThreshold(0.9),
    reference: np.ndarray | None = None,
) -> RampClassSeries:
    """Label each step Up (R > theta), Down (R < -theta) or None.

    A quantile spec is resolved on ``reference`` (typically the training
    part of the ramp function) or on the whole input when no reference is
    given. An all-zero reference resolves to theta = 0, where the strict
    inequalities still leave zeros unlabelled.
    """
    if isinstance(ramp_fn, RampFunctionSeries):
        r = ramp_fn.values
        start, interval = ramp_fn.series.start, ramp_fn.series.interval
    else:
        r = np.asarray(ramp_fn, dtype=float)
        start, interval = datetime(1970, 1, 1, tzinfo=timezone.utc), 1
    theta = spec.resolve(r if reference is None else reference)
    labels = np.zeros(r.shape[0], dtype=np.int8)
    with np.errstate(invalid="ignore"):
        labels[r > theta] = RampClass.UP
        labels[r < -theta] = RampClass.DOWN
    return RampClassSeries(labels, theta, start, interval)


@dataclass(frozen=True)
class RampEvent:
    """One ramp: start time, signed magnitude, duration and mean rate.

    ``delta_t`` is in seconds and ``rate`` in power units per minute.
    """

    t0: datetime
    delta_p: float
    delta_t: float
    rate: float
    direction: str
    start_index: int
    end_index: int

    def __post_init__(self) -> None:
        if self.delta_t <= 0:
            raise SeriesError("ramp duration must be positive")
        if self.direction not in ("+", "-"):
            raise SeriesError(f"direction must be '+' or '-', got {self.direction!r}")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.start_index + self.end_index)

    def to_dict(self) -> dict:
        return {
            "t0": self.t0.isoformat(),
            "delta_p": self.delta_p,
            "delta_t_s": self.delta_t,
            "rate_per_min": self.rate,
            "direction": self.direction,
            "start_index": self.start_index,
            "end_index": self.end_index,
        }


def _runs(labels: np.ndarray):
    n = labels.shape[0]
    i = 0
    while i < n:
        lab = labels[i]
        j = i
        while j + 1 < n and labels[j + 1] == lab:
            j += 1
        if lab != RampClass.NONE:
            yield int(lab), i, j
        i = j + 1


def extract_events(
    labels: RampClassSeries,
    power: UniformSeries,
    dropped: list[tuple[int, int]] | None = None,
) -> list[RampEvent]:
    """Merge maximal runs of identical non-None labels into events.

    For a run ``[s..e]`` the baseline is the sample just before it
    (``b = max(s - 1, 0)``), so ``delta_p = power[e] - power[b]`` and
    ``delta_t = (e - b) * interval``; a run starting at index 0 uses one
    interval. Runs touching an absent power value are skipped and, if given,
    appended to ``dropped`` as ``(s, e)``.
    """
    if len(labels) != len(power):
        raise SeriesError("labels and power must be aligned")
    y = power.values
    events = []
    for lab, s, e in _runs(labels.labels):
        b = max(s - 1, 0)
        if np.isnan(y[b : e + 1]).any():
            log.info("ramp run %d..%d touches missing power; dropped", s, e)
            if dropped is not None:
                dropped.append((s, e))
            continue
        steps = max(e - b, 1)
        dp = float(y[e] - y[b])
        dt = float(steps * power.interval)
        events.append(
            RampEvent(
                t0=power.timestamp(b),
                delta_p=dp,
                delta_t=dt,
                rate=dp / (dt / 60.0),
                direction="+" if lab == RampClass.UP else "-",
                start_index=s,
                end_index=e,
            )
        )
    return events
