"""End-to-end evaluation runs: label the actual series, fit each model on the
training split, predict the held-out tail and score it.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from rampcast import linear, rnn
from rampcast.core import Frame, SeriesError, SplitSpec, UniformSeries, fit_scaler
from rampcast.evaluation import EvalReport, build_report
from rampcast.ingest import forward_fill
from rampcast.linear import Stopwatch
from rampcast.wavelet import QuantileThreshold, RampClassSeries, WaveletConfig, classify, ramp_function

log = logging.getLogger(__name__)

MODEL_KINDS = ("persistence", "arma", "arima", "lstm")


@dataclass(frozen=True)
class ModelSpec:
    """One model run. ``name`` labels the report row; ``kind`` picks the estimator."""

    kind: str
    name: str = ""
    p: int = 3
    d: int = 0
    q: int = 1
    lstm: rnn.LSTMConfig = field(default_factory=rnn.LSTMConfig)

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.kind!r}; choose from {MODEL_KINDS}")
        if not self.name:
            default = {"persistence": "Persistence", "arma": "ARMA", "arima": "ARIMA", "lstm": "LSTM-RNN"}[self.kind]
            object.__setattr__(self, "name", default)

    @property
    def lags(self) -> int | None:
        if self.kind in ("arma", "arima"):
            return self.p
        if self.kind == "lstm":
            return self.lstm.lags
        return None

    @property
    def selection(self) -> str:
        return self.lstm.selection if self.kind == "lstm" else "univariate"

    def settings(self) -> dict:
        if self.kind == "lstm":
            return {"kind": self.kind, **asdict(self.lstm)}
        if self.kind == "persistence":
            return {"kind": self.kind}
        d = self.d if self.kind == "arima" else 0
        return {"kind": self.kind, "p": self.p, "d": d, "q": self.q}


@dataclass(frozen=True)
class EvalSettings:
    test_fraction: float = 0.2
    wavelet: WaveletConfig = WaveletConfig()
    threshold_quantile: float = 0.9
    horizon: int = 1
    power_column: str = "P_tot"

    def to_dict(self) -> dict:
        return {
            "test_fraction": self.test_fraction,
            "wavelet": asdict(self.wavelet),
            "threshold_quantile": self.threshold_quantile,
            "horizon": self.horizon,
            "power_column": self.power_column,
        }


@dataclass
class RunResult:
    report: EvalReport
    timestamps: list
    actual: np.ndarray
    predicted: np.ndarray
    ramp: np.ndarray
    labels: np.ndarray


@dataclass
class Labelling:
    ramp: np.ndarray
    classes: RampClassSeries
    n_train: int


def label_actuals(power: UniformSeries, n_train: int, settings: EvalSettings) -> Labelling:
    """Ramp function over the observed series; threshold from its training part."""
    rf = ramp_function(power, settings.wavelet)
    ref = rf.values[:n_train]
    classes = classify(rf, QuantileThreshold(settings.threshold_quantile), reference=ref)
    return Labelling(rf.values, classes, n_train)


def _imputed(y: np.ndarray) -> np.ndarray:
    """Forward-fill every gap and back-fill a leading one, for model inputs only."""
    if np.isnan(y).all():
        raise SeriesError("power series has no present values")
    filled, _ = forward_fill(y, y.shape[0])
    first = np.flatnonzero(~np.isnan(filled))[0]
    filled[:first] = filled[first]
    return filled


def _run_linear(spec: ModelSpec, power: UniformSeries, n_train: int, horizon: int):
    y = _imputed(power.values)
    train = power.with_values(y).slice(0, n_train)
    test = power.with_values(y).slice(n_train)
    if spec.kind == "persistence":
        with Stopwatch() as fit_t:
            pass
        with Stopwatch() as fc_t:
            pred = linear.persistence_rolling(train, test, horizon)
        tr_idx = np.arange(horizon, n_train)
        tr_pred = y[tr_idx - horizon]
        return pred, tr_idx, tr_pred, fit_t.elapsed, fc_t.elapsed, {}
    with Stopwatch() as fit_t:
        if spec.kind == "arma":
            model = linear.fit_arma(train, spec.p, spec.q)
        else:
            model = linear.fit_arima(train, spec.p, spec.d, spec.q)
    with Stopwatch() as fc_t:
        pred = linear.rolling_forecast(model, train, test, horizon)
    tr_idx, tr_pred = linear.in_sample_predictions(model, train)
    return pred, tr_idx, tr_pred, fit_t.elapsed, fc_t.elapsed, {"fitted": model.to_dict()}


def _run_lstm(spec: ModelSpec, frame: Frame, power_column: str, n_train: int, horizon: int):
    if horizon != 1:
        raise ValueError("the LSTM forecaster only supports one-step rolling evaluation")
    cfg = spec.lstm
    feats = cfg.features(power_column)
    raw = frame.matrix(feats)
    scaler = fit_scaler(raw[:n_train])
    ds = rnn.make_windows(frame, cfg.lags, power_column, scaler, feats)
    is_train = ds.target_index < n_train
    train_ds = ds.subset(is_train)
    test_ds = ds.subset(~is_train)
    with Stopwatch() as fit_t:
        params, hist = rnn.train(cfg, train_ds)
    with Stopwatch() as fc_t:
        test_pred = rnn.predict(params, test_ds)
    n = len(frame)
    pred = np.full(n - n_train, np.nan)
    pred[test_ds.target_index - n_train] = test_pred
    tr_pred = rnn.predict(params, train_ds)
    extra = {"final_train_loss": hist.loss[-1] if hist.loss else None, "excluded_windows": ds.excluded}
    return pred, train_ds.target_index, tr_pred, fit_t.elapsed, fc_t.elapsed, extra


def evaluate_model(
    spec: ModelSpec,
    frame: Frame,
    settings: EvalSettings,
    labelling: Labelling | None = None,
) -> RunResult:
    power = frame[settings.power_column]
    n = len(power)
    n_train = n - SplitSpec(settings.test_fraction).test_length(n)
    if n_train < 1 or n_train >= n:
        raise SeriesError("test fraction leaves an empty train or test split")
    lab = labelling or label_actuals(power, n_train, settings)
    if spec.kind == "lstm":
        pred, tr_idx, tr_pred, fit_s, fc_s, extra = _run_lstm(spec, frame, settings.power_column, n_train, settings.horizon)
    else:
        pred, tr_idx, tr_pred, fit_s, fc_s, extra = _run_linear(spec, power, n_train, settings.horizon)
    actual = power.values[n_train:]
    test_labels = lab.classes.labels[n_train:]
    config = {"model": spec.settings(), "eval": settings.to_dict()}
    report = build_report(
        model=spec.name,
        interval=power.interval,
        selection=spec.selection,
        lags=spec.lags,
        fit_seconds=fit_s,
        forecast_seconds=fc_s,
        test_pred=pred,
        test_actual=actual,
        labels=test_labels,
        train_pred=tr_pred,
        train_actual=power.values[tr_idx],
        horizon_steps=settings.horizon,
        threshold=lab.classes.threshold,
        config=config,
    )
    log.info("%s: test MAE %.2f RMSE %.2f", spec.name, report.test.mae, report.test.rmse)
    return RunResult(
        report,
        [power.timestamp(i) for i in range(n_train, n)],
        actual,
        pred,
        lab.ramp[n_train:],
        test_labels,
    )


def evaluate(frame: Frame, specs: list[ModelSpec], settings: EvalSettings = EvalSettings()) -> list[RunResult]:
    """Run every model against one shared labelling of the actual series."""
    power = frame[settings.power_column]
    n = len(power)
    n_train = n - SplitSpec(settings.test_fraction).test_length(n)
    lab = label_actuals(power, n_train, settings)
    return [evaluate_model(s, frame, settings, lab) for s in specs]
