"""Single-layer LSTM regressor in numpy with exact backpropagation through time.

Gate pre-activations are stacked in the order input, forget, output,
candidate: ``a = x @ Wx + h @ Wh + b`` with ``a`` split into four blocks of
``hidden_size``. The prediction is a linear readout of the last hidden state.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from rampcast.core import Frame, Scaler, SeriesError, UniformSeries

FORMAT_VERSION = "rampcast-lstm/1"
UNIVARIATE = ("P_tot",)
MULTIVARIATE = ("P_tot", "Ws", "Wa_sin", "Wa_cos", "Ot")


class LSTMError(RuntimeError):
    """Raised on non-finite values during the forward pass or training."""


@dataclass(frozen=True)
class LSTMConfig:
    lags: int = 1
    hidden_size: int = 32
    epochs: int = 60
    learning_rate: float = 0.01
    batch_size: int = 64
    seed: int = 0
    selection: str = "univariate"
    shuffle: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if min(self.lags, self.hidden_size, self.batch_size) < 1 or self.epochs < 0:
            raise ValueError("lags, hidden_size and batch_size must be >= 1 and epochs >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.selection not in ("univariate", "multivariate"):
            raise ValueError(f"selection must be univariate or multivariate, got {self.selection!r}")

    def features(self, power_column: str = "P_tot") -> tuple[str, ...]:
        cols = UNIVARIATE if self.selection == "univariate" else MULTIVARIATE
        return (power_column,) + cols[1:]


@dataclass
class LSTMParams:
    Wx: np.ndarray  # (input_dim, 4H)
    Wh: np.ndarray  # (H, 4H)
    b: np.ndarray  # (4H,)
    w_out: np.ndarray  # (H,)
    b_out: np.ndarray  # () scalar array

    BLOCKS = ("Wx", "Wh", "b", "w_out", "b_out")

    @property
    def hidden_size(self) -> int:
        return self.Wh.shape[0]

    @property
    def input_dim(self) -> int:
        return self.Wx.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in self.BLOCKS}

    def copy(self) -> "LSTMParams":
        return LSTMParams(**{k: v.copy() for k, v in self.arrays().items()})

    def check_finite(self) -> None:
        for k, v in self.arrays().items():
            if not np.isfinite(v).all():
                raise LSTMError(f"parameter block {k} contains non-finite values")

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in self.arrays().items()}

    @classmethod
    def from_dict(cls, d: dict) -> "LSTMParams":
        return cls(**{k: np.array(d[k], dtype=float) for k in cls.BLOCKS})

    @classmethod
    def zeros(cls, input_dim: int, hidden: int) -> "LSTMParams":
        return cls(
            np.zeros((input_dim, 4 * hidden)),
            np.zeros((hidden, 4 * hidden)),
            np.zeros(4 * hidden),
            np.zeros(hidden),
            np.zeros(()),
        )


def init_params(config: LSTMConfig, input_dim: int | None = None) -> LSTMParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases except forget = +1."""
    d = len(config.features()) if input_dim is None else input_dim
    h = config.hidden_size
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
    k_gate = 1.0 / np.sqrt(d + h)
    k_out = 1.0 / np.sqrt(h)
    Wx = rng.uniform(-k_gate, k_gate, size=(d, 4 * h))
    Wh = rng.uniform(-k_gate, k_gate, size=(h, 4 * h))
    w_out = rng.uniform(-k_out, k_out, size=h)
    b = np.zeros(4 * h)
    b[h : 2 * h] = 1.0
    return LSTMParams(Wx, Wh, b, w_out, np.zeros(()))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class ForwardCache:
    x: np.ndarray
    gates: list  # (i, f, o, g) per step
    c: list  # cell states, c[0] is the zero initial state
    h: list  # hidden states, h[0] is the zero initial state


def forward_batch(params: LSTMParams, X: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Run windows ``X`` of shape (batch, lags, input_dim); returns predictions and cache."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 3 or X.shape[2] != params.input_dim:
        raise ValueError(f"expected windows of shape (batch, lags, {params.input_dim}), got {X.shape}")
    if not np.isfinite(X).all():
        raise LSTMError("input windows contain non-finite values")
    B, L, _ = X.shape
    H = params.hidden_size
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = ForwardCache(X, [], [c], [h])
    for t in range(L):
        a = X[:, t, :] @ params.Wx + h @ params.Wh + params.b
        i = _sigmoid(a[:, :H])
        f = _sigmoid(a[:, H : 2 * H])
        o = _sigmoid(a[:, 2 * H : 3 * H])
        g = np.tanh(a[:, 3 * H :])
        c = f * c + i * g
        h = o * np.tanh(c)
        if not np.isfinite(c).all():
            raise LSTMError(f"non-finite cell state at step {t}")
        cache.gates.append((i, f, o, g))
        cache.c.append(c)
        cache.h.append(h)
    pred = h @ params.w_out + params.b_out
    if not np.isfinite(pred).all():
        raise LSTMError("non-finite prediction")
    return pred, cache


def forward(params: LSTMParams, window: np.ndarray) -> tuple[float, ForwardCache]:
    """Single window of shape (lags, input_dim)."""
    pred, cache = forward_batch(params, np.asarray(window, dtype=float)[None, ...])
    return float(pred[0]), cache


def backward(params: LSTMParams, cache: ForwardCache, dpred: np.ndarray) -> LSTMParams:
    """Gradients of ``sum(dpred * pred)`` w.r.t. every parameter block."""
    H = params.hidden_size
    L = len(cache.gates)
    grads = LSTMParams.zeros(params.input_dim, H)
    grads.w_out = cache.h[-1].T @ dpred
    grads.b_out = np.asarray(dpred.sum())
    dh = np.outer(dpred, params.w_out)
    dc = np.zeros_like(dh)
    for t in range(L - 1, -1, -1):
        i, f, o, g = cache.gates[t]
        c_prev, c = cache.c[t], cache.c[t + 1]
        h_prev = cache.h[t]
        tc = np.tanh(c)
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        da = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                do * o * (1.0 - o),
                dc * i * (1.0 - g * g),
            ],
            axis=1,
        )
        grads.Wx += cache.x[:, t, :].T @ da
        grads.Wh += h_prev.T @ da
        grads.b += da.sum(axis=0)
        dh = da @ params.Wh.T
        dc = dc * f
    return grads


def mse_loss(params: LSTMParams, X: np.ndarray, y: np.ndarray) -> float:
    pred, _ = forward_batch(params, X)
    r = pred - y
    return float(r @ r / r.shape[0])


def gradients(params: LSTMParams, X: np.ndarray, y: np.ndarray) -> tuple[float, LSTMParams]:
    """Loss and exact gradients of the batch mean squared error."""
    y = np.asarray(y, dtype=float)
    if y.shape[0] == 0:
        raise ValueError("empty batch")
    pred, cache = forward_batch(params, X)
    r = pred - y
    loss = float(r @ r / r.shape[0])
    return loss, backward(params, cache, 2.0 * r / r.shape[0])


@dataclass
class WindowedDataset:
    """Chronological windows; ``X[k]`` covers rows ``start[k] .. start[k] + lags - 1``
    and ``y[k]`` is the scaled target at row ``target_index[k]``."""

    X: np.ndarray
    y: np.ndarray
    start: np.ndarray
    target_index: np.ndarray
    scaler: Scaler
    features: tuple[str, ...]
    target_feature: int
    lags: int
    excluded: int = 0

    def __len__(self) -> int:
        return self.y.shape[0]

    def subset(self, mask: np.ndarray) -> "WindowedDataset":
        return WindowedDataset(
            self.X[mask], self.y[mask], self.start[mask], self.target_index[mask],
            self.scaler, self.features, self.target_feature, self.lags, self.excluded,
        )


def _frame_matrix(frame: Frame | UniformSeries, features: Sequence[str]) -> np.ndarray:
    if isinstance(frame, UniformSeries):
        if len(features) != 1:
            raise SeriesError("a single series only supports univariate windows")
        return frame.values[:, None]
    missing = [f for f in features if f not in frame]
    if missing:
        raise SeriesError(f"frame lacks feature columns {missing}")
    return frame.matrix(features)


def make_windows(
    frame: Frame | UniformSeries,
    lags: int,
    target_column: str,
    scaler: Scaler,
    features: Sequence[str] | None = None,
) -> WindowedDataset:
    """Slice a frame into (window, next target) pairs in scaled space.

    Windows touching an absent value (in the window or its target) are
    dropped and counted in ``excluded``.
    """
    features = tuple(features) if features is not None else (target_column,)
    if target_column not in features:
        raise SeriesError(f"target column {target_column!r} must be one of the window features")
    raw = _frame_matrix(frame, features)
    n = raw.shape[0]
    if n <= lags:
        raise SeriesError(f"series of length {n} is too short for lags={lags}")
    if scaler.n_features != len(features):
        raise SeriesError("scaler was fitted on a different number of features")
    scaled = scaler.apply(raw)
    tgt = features.index(target_column)
    starts = np.arange(n - lags)
    idx = starts[:, None] + np.arange(lags)[None, :]
    X = scaled[idx]  # (count, lags, D)
    y = scaled[starts + lags, tgt]
    ok = ~np.isnan(X).any(axis=(1, 2)) & ~np.isnan(y)
    return WindowedDataset(
        X[ok], y[ok], starts[ok], (starts + lags)[ok], scaler, features, tgt, lags, int((~ok).sum())
    )


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    wall_time: float = 0.0


def train(config: LSTMConfig, dataset: WindowedDataset, params: LSTMParams | None = None) -> tuple[LSTMParams, TrainHistory]:
    """Mini-batch Adam on the mean squared error, chronological batches by default.

    Raises
    ------
    LSTMError
        If the loss or parameters become non-finite; the message names the epoch.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    t0 = time.perf_counter()
    params = init_params(config, dataset.X.shape[2]) if params is None else params.copy()
    m = {k: np.zeros_like(v) for k, v in params.arrays().items()}
    v = {k: np.zeros_like(a) for k, a in params.arrays().items()}
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, 1])))
    hist = TrainHistory()
    n = len(dataset)
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        # overflow surfaces below as a non-finite loss or parameter
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                for lo in range(0, n, config.batch_size):
                    idx = order[lo : lo + config.batch_size]
                    loss, grads = gradients(params, dataset.X[idx], dataset.y[idx])
                    total += loss * idx.shape[0]
                    step += 1
                    corr1 = 1.0 - config.beta1**step
                    corr2 = 1.0 - config.beta2**step
                    for k, g in grads.arrays().items():
                        m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g
                        v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g
                        upd = config.learning_rate * (m[k] / corr1) / (np.sqrt(v[k] / corr2) + config.eps)
                        setattr(params, k, getattr(params, k) - upd)
                params.check_finite()
            except LSTMError as exc:
                raise LSTMError(f"training diverged in epoch {epoch}: {exc}") from exc
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise LSTMError(f"training diverged in epoch {epoch}: loss is {epoch_loss}")
        hist.loss.append(epoch_loss)
    hist.wall_time = time.perf_counter() - t0
    return params, hist


def predict_scaled(params: LSTMParams, dataset: WindowedDataset, batch: int = 4096) -> np.ndarray:
    out = [forward_batch(params, dataset.X[lo : lo + batch])[0] for lo in range(0, len(dataset), batch)]
    return np.concatenate(out) if out else np.zeros(0)


def predict(params: LSTMParams, dataset: WindowedDataset) -> np.ndarray:
    """Predictions in physical units, one per window."""
    return dataset.scaler.invert(predict_scaled(params, dataset), feature=dataset.target_feature)


def rescale_params(params: LSTMParams, old: Scaler, new: Scaler, target_feature: int = 0) -> LSTMParams:
    """Equivalent parameters for inputs and outputs scaled by ``new`` instead of ``old``.

    Both scalers must share data min/max; only the feature range may differ.
    Every feature must be non-constant.
    """
    if not (np.array_equal(old.data_min, new.data_min) and np.array_equal(old.data_max, new.data_max)):
        raise ValueError("scalers must be fitted on the same data")
    width = old.data_max - old.data_min
    if (width <= 0).any():
        raise ValueError("rescaling needs every feature to have a non-zero range")
    g_old = (old.feature_range[1] - old.feature_range[0]) / width
    g_new = (new.feature_range[1] - new.feature_range[0]) / width
    alpha = g_old / g_new
    beta = old.feature_range[0] - new.feature_range[0] * alpha
    r = g_new[target_feature] / g_old[target_feature]
    return LSTMParams(
        Wx=alpha[:, None] * params.Wx,
        Wh=params.Wh.copy(),
        b=params.b + beta @ params.Wx,
        w_out=params.w_out * r,
        b_out=np.asarray(new.feature_range[0] + (params.b_out - old.feature_range[0]) * r),
    )


def save_model(path, config: LSTMConfig, params: LSTMParams, scaler: Scaler, features: Sequence[str], target: str) -> None:
    doc = {
        "format": FORMAT_VERSION,
        "kind": "lstm",
        "config": {f.name: getattr(config, f.name) for f in fields(config)},
        "features": list(features),
        "target": target,
        "scaler": scaler.to_dict(),
        "params": params.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> tuple[LSTMConfig, LSTMParams, Scaler, tuple[str, ...], str]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_VERSION:
        raise ValueError(f"unsupported LSTM model format {doc.get('format')!r}")
    return (
        LSTMConfig(**doc["config"]),
        LSTMParams.from_dict(doc["params"]),
        Scaler.from_dict(doc["scaler"]),
        tuple(doc["features"]),
        doc["target"],
    )
