"""Point and ramp-conditioned error metrics, and Table-5-shaped run reports."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from rampcast.wavelet import RampClass


class ReportError(ValueError):
    pass


# Column headers, in order, of the published evaluation table.
TABLE5_COLUMNS = (
    "Model",
    "Data sample rate",
    "Data selection",
    "Lags",
    "Fit time (mm:ss)",
    "Forecast time (mm:ss)",
    "Train RMSE",
    "Test RMSE",
    "Train MAE",
    "Test MAE",
    "Positive ramp acc. (RMSE)",
    "Positive ramp acc. (MAE)",
    "Negative ramp acc. (RMSE)",
    "Negative ramp acc. (MAE)",
    "Non-ramp acc. (RMSE)",
    "Non-ramp acc. (MAE)",
)


def _seqsum(x: np.ndarray) -> float:
    # strictly left-to-right, so results equal a plain accumulation loop
    return float(np.cumsum(x)[-1]) if x.shape[0] else 0.0


@dataclass(frozen=True)
class Metrics:
    mae: float
    rmse: float
    n: int
    excluded: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "Metrics | None":
        return None if d is None else cls(float(d["mae"]), float(d["rmse"]), int(d["n"]), int(d.get("excluded", 0)))


def point_metrics(pred: Sequence[float], actual: Sequence[float]) -> Metrics:
    """MAE and RMSE over pairs where both values are present."""
    p = np.asarray(pred, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.ndim != 1:
        raise ReportError(f"prediction and actual lengths differ: {p.shape} vs {a.shape}")
    ok = ~(np.isnan(p) | np.isnan(a))
    n = int(ok.sum())
    if n == 0:
        raise ReportError("no scoreable (prediction, actual) pairs")
    err = p[ok] - a[ok]
    mae = _seqsum(np.abs(err)) / n
    rmse = math.sqrt(_seqsum(err * err) / n)
    return Metrics(mae, rmse, n, int(p.shape[0] - n))


@dataclass(frozen=True)
class RampConditionedMetrics:
    up: Metrics | None
    down: Metrics | None
    none: Metrics | None

    def get(self, cls: RampClass) -> Metrics | None:
        return {RampClass.UP: self.up, RampClass.DOWN: self.down, RampClass.NONE: self.none}[cls]

    def to_dict(self) -> dict:
        return {k: (None if m is None else m.to_dict()) for k, m in (("up", self.up), ("down", self.down), ("none", self.none))}

    @classmethod
    def from_dict(cls, d: dict) -> "RampConditionedMetrics":
        return cls(Metrics.from_dict(d["up"]), Metrics.from_dict(d["down"]), Metrics.from_dict(d["none"]))


def conditioned_metrics(pred, actual, labels) -> RampConditionedMetrics:
    """Metrics per ramp class; a class with no scoreable points is ``None``."""
    p = np.asarray(pred, dtype=float)
    a = np.asarray(actual, dtype=float)
    lab = np.asarray(getattr(labels, "labels", labels))
    if not (p.shape == a.shape == lab.shape):
        raise ReportError("predictions, actuals and labels must be aligned")
    scoreable = ~(np.isnan(p) | np.isnan(a))

    def one(c: RampClass) -> Metrics | None:
        sel = (lab == int(c)) & scoreable
        return point_metrics(p[sel], a[sel]) if sel.any() else None

    return RampConditionedMetrics(one(RampClass.UP), one(RampClass.DOWN), one(RampClass.NONE))


class HorizonCategory(enum.Enum):
    """Forecast horizon bands in hours; the ambiguous 4-9 h band belongs to both neighbours."""

    VERY_SHORT = ("very-short", 2.0, (4.0, 9.0))
    SHORT = ("short", (4.0, 9.0), (48.0, 72.0))
    MEDIUM = ("medium", 72.0, 168.0)

    @property
    def label(self) -> str:
        return self.value[0]

    @property
    def lower_hours(self):
        return self.value[1]

    @property
    def upper_hours(self):
        return self.value[2]


def horizon_category(seconds: float) -> HorizonCategory | None:
    """Shortest band whose (widest) bounds contain the horizon, else ``None``."""
    h = seconds / 3600.0
    for cat in HorizonCategory:
        lo = cat.lower_hours if isinstance(cat.lower_hours, float) else cat.lower_hours[0]
        hi = cat.upper_hours if isinstance(cat.upper_hours, float) else cat.upper_hours[1]
        if lo <= h <= hi:
            return cat
    return None


def format_mmss(seconds: float) -> str:
    """Whole seconds as ``mm:ss``; minutes keep growing past 99."""
    if seconds < 0:
        raise ReportError("durations must be non-negative")
    total = int(round(seconds))
    m, s = divmod(total, 60)
    return f"{m:02d}:{s:02d}"


def sample_rate_label(interval: int) -> str:
    return {600: "10 min", 3600: "Hourly"}.get(interval, f"{interval} s")


def fingerprint(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class EvalReport:
    model: str
    interval: int
    selection: str
    lags: int | None
    fit_seconds: float
    forecast_seconds: float
    train: Metrics | None
    test: Metrics
    ramp: RampConditionedMetrics
    horizon_steps: int = 1
    threshold: float = float("nan")
    config: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.model:
            raise ReportError("model name is mandatory")
        if self.selection not in ("univariate", "multivariate"):
            raise ReportError(f"selection must be univariate or multivariate, got {self.selection!r}")
        if self.test is None:
            raise ReportError("test metrics are mandatory")
        if self.fit_seconds < 0 or self.forecast_seconds < 0:
            raise ReportError("timings must be non-negative")

    @property
    def horizon(self) -> HorizonCategory | None:
        return horizon_category(self.horizon_steps * self.interval)

    @property
    def fingerprint(self) -> str:
        return fingerprint({"model": self.model, "selection": self.selection, "lags": self.lags, **self.config})

    def table_row(self) -> list[str]:
        def num(m: Metrics | None, attr: str) -> str:
            return "-" if m is None else f"{getattr(m, attr):.2f}"

        return [
            self.model,
            sample_rate_label(self.interval),
            self.selection.capitalize(),
            "" if self.lags is None else str(self.lags),
            format_mmss(self.fit_seconds),
            format_mmss(self.forecast_seconds),
            num(self.train, "rmse"),
            num(self.test, "rmse"),
            num(self.train, "mae"),
            num(self.test, "mae"),
            num(self.ramp.up, "rmse"),
            num(self.ramp.up, "mae"),
            num(self.ramp.down, "rmse"),
            num(self.ramp.down, "mae"),
            num(self.ramp.none, "rmse"),
            num(self.ramp.none, "mae"),
        ]

    def to_dict(self) -> dict:
        cat = self.horizon
        return {
            "model": self.model,
            "interval_s": self.interval,
            "sample_rate": sample_rate_label(self.interval),
            "selection": self.selection,
            "lags": self.lags,
            "fit_seconds": self.fit_seconds,
            "forecast_seconds": self.forecast_seconds,
            "fit_time": format_mmss(self.fit_seconds),
            "forecast_time": format_mmss(self.forecast_seconds),
            "train": None if self.train is None else self.train.to_dict(),
            "test": self.test.to_dict(),
            "ramp": self.ramp.to_dict(),
            "horizon_steps": self.horizon_steps,
            "horizon_category": None if cat is None else cat.label,
            "threshold": self.threshold,
            "config": self.config,
            "fingerprint": self.fingerprint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        missing = [k for k in ("model", "interval_s", "selection", "fit_seconds", "forecast_seconds", "test", "ramp") if k not in d]
        if missing:
            raise ReportError(f"report is missing mandatory fields {missing}")
        return cls(
            model=d["model"],
            interval=int(d["interval_s"]),
            selection=d["selection"],
            lags=d.get("lags"),
            fit_seconds=float(d["fit_seconds"]),
            forecast_seconds=float(d["forecast_seconds"]),
            train=Metrics.from_dict(d.get("train")),
            test=Metrics.from_dict(d["test"]),
            ramp=RampConditionedMetrics.from_dict(d["ramp"]),
            horizon_steps=int(d.get("horizon_steps", 1)),
            threshold=float(d.get("threshold", float("nan"))),
            config=d.get("config", {}),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EvalReport):
            return NotImplemented
        return json.dumps(self.to_dict(), sort_keys=True) == json.dumps(other.to_dict(), sort_keys=True)


def build_report(
    model: str,
    interval: int,
    selection: str,
    lags: int | None,
    fit_seconds: float,
    forecast_seconds: float,
    test_pred,
    test_actual,
    labels,
    train_pred=None,
    train_actual=None,
    horizon_steps: int = 1,
    threshold: float = float("nan"),
    config: dict | None = None,
) -> EvalReport:
    """Score one model run and assemble its report."""
    train = None
    if train_pred is not None and train_actual is not None and len(train_pred):
        train = point_metrics(train_pred, train_actual)
    return EvalReport(
        model=model,
        interval=interval,
        selection=selection,
        lags=lags,
        fit_seconds=fit_seconds,
        forecast_seconds=forecast_seconds,
        train=train,
        test=point_metrics(test_pred, test_actual),
        ramp=conditioned_metrics(test_pred, test_actual, labels),
        horizon_steps=horizon_steps,
        threshold=threshold,
        config=dict(config or {}),
    )


def reports_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE5_COLUMNS)
    for r in reports:
        w.writerow(r.table_row())
    return buf.getvalue()


def reports_json(reports: Sequence[EvalReport]) -> str:
    return json.dumps({"runs": [r.to_dict() for r in reports]}, indent=2) + "\n"


def parse_reports_json(text: str) -> list[EvalReport]:
    doc = json.loads(text)
    return [EvalReport.from_dict(d) for d in doc["runs"]]
