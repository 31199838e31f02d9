"""Seeded synthetic series with known ground truth.

All randomness comes from numpy's PCG64 bit generator seeded through a
``SeedSequence``; independent columns draw from spawned child sequences so
adding a column never perturbs the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from rampcast.core import Frame, SeriesError, UniformSeries
from rampcast.wavelet import RampEvent

RNG_NAME = "numpy-PCG64/SeedSequence-v1"
BURN_IN = 500
DEFAULT_START = datetime(2013, 1, 7, tzinfo=timezone.utc)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for one named stream of ``seed``."""
    children = np.random.SeedSequence(seed).spawn(stream + 1)
    return np.random.Generator(np.random.PCG64(children[stream]))


def is_stationary(phi) -> bool:
    """True when all roots of ``1 - phi_1 z - ... - phi_p z^p`` lie outside the unit circle."""
    phi = np.asarray(phi, dtype=float)
    if phi.size == 0 or not phi.any():
        return True
    roots = np.roots(np.r_[-phi[::-1], 1.0])
    return bool(np.all(np.abs(roots) > 1.0))


@dataclass(frozen=True)
class InjectedRamp:
    """A linear ramp placed by its midpoint index, magnitude and duration (samples)."""

    midpoint: int
    delta_p: float
    duration: int
    direction: int = 1

    def __post_init__(self) -> None:
        if self.duration < 1:
            raise SeriesError("ramp duration must be >= 1 sample")
        if self.direction not in (1, -1):
            raise SeriesError("ramp direction must be +1 or -1")
        if self.delta_p < 0:
            raise SeriesError("delta_p is a magnitude; give the sign through direction")

    @property
    def start(self) -> int:
        return self.midpoint - self.duration // 2

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True)
class SynthConfig:
    kind: str = "arma"
    length: int = 1000
    interval: int = 600
    seed: int = 0
    phi: tuple[float, ...] = ()
    theta: tuple[float, ...] = ()
    sigma: float = 1.0
    mean: float = 0.0
    base_level: float = 2000.0
    events: tuple[InjectedRamp, ...] = ()
    noise_sigma: float = 0.0
    rated_power: float | None = None
    shut_in_after: int | None = None
    shut_in_level: float = 0.0
    shut_in_duration: int = 1
    start: datetime = DEFAULT_START

    def __post_init__(self) -> None:
        if self.kind not in ("arma", "ramp-profile", "composite"):
            raise SeriesError(f"unknown synth kind {self.kind!r}")
        if self.length < 1:
            raise SeriesError("length must be >= 1")
        if self.sigma < 0 or self.noise_sigma < 0:
            raise SeriesError("noise scales must be >= 0")
        spans = sorted((e.start, e.end) for e in self.events)
        for (s, e) in spans:
            if s < 0 or e >= self.length:
                raise SeriesError(f"ramp window [{s}, {e}] falls outside the series")
        for (s0, e0), (s1, _) in zip(spans, spans[1:]):
            if s1 < e0:
                raise SeriesError("injected ramps overlap")


@dataclass(frozen=True)
class GroundTruth:
    series: UniformSeries
    events: list[RampEvent] = field(default_factory=list)
    injected: list[InjectedRamp] = field(default_factory=list)


def gen_arma(config: SynthConfig) -> UniformSeries:
    """ARMA recursion with Gaussian innovations; the first 500 samples are discarded."""
    phi = np.asarray(config.phi, dtype=float)
    theta = np.asarray(config.theta, dtype=float)
    if not is_stationary(phi):
        raise SeriesError(f"AR coefficients {tuple(phi)} are not stationary")
    p, q = phi.size, theta.size
    total = config.length + BURN_IN
    eps = make_rng(config.seed).standard_normal(total) * config.sigma
    x = np.zeros(total)
    for t in range(total):
        acc = eps[t]
        for i in range(1, min(p, t) + 1):
            acc += phi[i - 1] * x[t - i]
        for j in range(1, min(q, t) + 1):
            acc += theta[j - 1] * eps[t - j]
        x[t] = acc
    values = config.mean + x[BURN_IN:]
    return UniformSeries(config.start, config.interval, values, unit="", name="arma")


def _profile(config: SynthConfig) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Noiseless piecewise-linear level path and realised (start, end, sign) spans."""
    n = config.length
    level = np.full(n, float(config.base_level))
    for ev in sorted(config.events, key=lambda e: e.start):
        step = np.zeros(n)
        ramp = np.arange(1, ev.duration + 1) / ev.duration
        step[ev.start + 1 : ev.end + 1] = ramp
        step[ev.end + 1 :] = 1.0
        level = level + ev.direction * ev.delta_p * step
    return level, [(ev.start, ev.end, ev.direction) for ev in config.events]


def _apply_shut_in(level: np.ndarray, config: SynthConfig) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    rated = config.rated_power
    extra: list[tuple[int, int, int]] = []
    if rated is None:
        return level, extra
    over = level >= rated
    level = np.minimum(level, rated)
    if config.shut_in_after is None or not over.any():
        return level, extra
    first = int(np.argmax(over))
    drop_at = first + config.shut_in_after
    if drop_at + config.shut_in_duration >= level.shape[0]:
        return level, extra
    frac = np.arange(1, config.shut_in_duration + 1) / config.shut_in_duration
    level = level.copy()
    level[drop_at + 1 : drop_at + 1 + config.shut_in_duration] = rated + (config.shut_in_level - rated) * frac
    level[drop_at + 1 + config.shut_in_duration :] = config.shut_in_level
    extra.append((drop_at, drop_at + config.shut_in_duration, -1))
    return level, extra


def _events_from_spans(values: np.ndarray, spans, series: UniformSeries) -> list[RampEvent]:
    out = []
    for s, e, sign in sorted(spans):
        dp = float(values[e] - values[s])
        dt = float((e - s) * series.interval)
        out.append(RampEvent(series.timestamp(s), dp, dt, dp / (dt / 60.0), "+" if sign > 0 else "-", s, e))
    return out


def gen_ramp_profile(config: SynthConfig) -> GroundTruth:
    """Flat base with linear ramps, optional rated-power clip and shut-in drop, plus noise.

    Each ramp rises over ``duration`` samples from index ``start`` to ``end``.
    When ``rated_power`` is set the level is clipped there; with
    ``shut_in_after`` the farm drops to ``shut_in_level`` that many samples
    after first reaching rated power, and the drop is reported as an event.
    Event magnitudes are measured on the noiseless, clipped path.
    """
    level, spans = _profile(config)
    level, extra = _apply_shut_in(level, config)
    spans = spans + extra
    noise = make_rng(config.seed).standard_normal(config.length) * config.noise_sigma
    values = level + noise if config.noise_sigma > 0 else level
    series = UniformSeries(config.start, config.interval, values, unit="kW", name="P_tot")
    events = _events_from_spans(level, spans, series)
    return GroundTruth(series, events, list(config.events))


def random_ramp_config(
    seed: int,
    length: int = 240,
    base_level: float = 2000.0,
    noise_sigma: float = 20.0,
    n_events: int = 1,
    min_gap: int = 24,
) -> SynthConfig:
    """Random placement of ``n_events`` separated ramps for benchmark suites."""
    rng = make_rng(seed, stream=1)
    events: list[InjectedRamp] = []
    attempts = 0
    while len(events) < n_events:
        attempts += 1
        if attempts > 1000:
            raise SeriesError("could not place the requested ramps")
        duration = int(rng.integers(3, 13))
        mid = int(rng.integers(min_gap, length - min_gap))
        cand = InjectedRamp(mid, float(rng.uniform(1000.0, 3000.0)), duration, int(rng.choice([-1, 1])))
        if any(abs(cand.midpoint - e.midpoint) < min_gap + (cand.duration + e.duration) // 2 for e in events):
            continue
        events.append(cand)
    return SynthConfig(
        kind="ramp-profile",
        length=length,
        seed=seed,
        base_level=base_level,
        events=tuple(sorted(events, key=lambda e: e.midpoint)),
        noise_sigma=noise_sigma,
    )


def benchmark_suite(n: int = 20, seed: int = 2024, length: int = 480, fluct_sigma: float = 60.0) -> list[GroundTruth]:
    """Ramp profiles (four events each) plus AR(1) fluctuations with phi = 0.9.

    The fluctuation recipe matches the composite generator: farm power is
    strongly autocorrelated at 10-minute cadence, so white noise would be an
    unrepresentative background.
    """
    ss = np.random.SeedSequence(seed)
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(n)]
    out = []
    for s in seeds:
        truth = gen_ramp_profile(random_ramp_config(s, length=length, base_level=4000.0, noise_sigma=0.0, n_events=4))
        fluct = _ar1_path(make_rng(s, 2), length, 0.9, fluct_sigma)
        out.append(GroundTruth(truth.series.with_values(truth.series.values + fluct), truth.events, truth.injected))
    return out


def _ar1_path(rng: np.random.Generator, n: int, phi: float, sigma: float) -> np.ndarray:
    eps = rng.standard_normal(n + BURN_IN) * sigma
    x = np.zeros(n + BURN_IN)
    for t in range(1, n + BURN_IN):
        x[t] = phi * x[t - 1] + eps[t]
    return x[BURN_IN:]


def gen_composite(config: SynthConfig, rated_power: float = 8200.0) -> tuple[Frame, GroundTruth]:
    """Farm-like feature frame: ramp profile plus AR(1) fluctuation, with weather covariates.

    Power is clipped to ``[0, rated_power]``. Wind speed is the inverse of a
    cubic power curve plus noise; direction is a slow random walk; temperature
    is a daily cycle. Covariates are not physically faithful.
    """
    truth = gen_ramp_profile(SynthConfig(**{**config.__dict__, "kind": "ramp-profile", "noise_sigma": 0.0}))
    n = config.length
    fluct = _ar1_path(make_rng(config.seed, 2), n, 0.9, config.noise_sigma if config.noise_sigma > 0 else 50.0)
    power = np.clip(truth.series.values + fluct, 0.0, rated_power)
    t = np.arange(n)
    frac = power / rated_power
    cut_in, rated_ws = 3.0, 13.0
    ws = cut_in + (rated_ws - cut_in) * np.cbrt(frac) + 0.3 * make_rng(config.seed, 3).standard_normal(n)
    wa = (220.0 + np.cumsum(make_rng(config.seed, 4).standard_normal(n) * 2.0)) % 360.0
    day = 86400.0 / config.interval
    ot = 10.0 + 5.0 * np.sin(2 * math.pi * t / day) + 0.5 * make_rng(config.seed, 5).standard_normal(n)
    rad = np.deg2rad(wa)

    def col(v, unit, name):
        return UniformSeries(config.start, config.interval, v, unit=unit, name=name)

    frame = Frame(
        {
            "P_tot": col(power, "kW", "P_tot"),
            "pct_rated": col(100.0 * power / rated_power, "%", "pct_rated"),
            "Ws": col(ws, "m/s", "Ws"),
            "Wa_sin": col(np.sin(rad), "", "Wa_sin"),
            "Wa_cos": col(np.cos(rad), "", "Wa_cos"),
            "Ot": col(ot, "degC", "Ot"),
        }
    )
    return frame, GroundTruth(frame["P_tot"], truth.events, truth.injected)


def default_composite_config(length: int = 2000, seed: int = 7, interval: int = 600) -> SynthConfig:
    """A composite dataset with a handful of up and down ramps across the series."""
    rng = make_rng(seed, stream=6)
    events = []
    spacing = length // 10
    level = 3000.0
    for k in range(1, 10):
        mid = k * spacing
        up = level < 4000.0
        dp = float(rng.uniform(1200.0, 2500.0))
        events.append(InjectedRamp(mid, dp, int(rng.integers(3, 10)), 1 if up else -1))
        level += dp if up else -dp
    return SynthConfig(
        kind="composite",
        length=length,
        interval=interval,
        seed=seed,
        base_level=3000.0,
        events=tuple(events),
        noise_sigma=60.0,
    )
