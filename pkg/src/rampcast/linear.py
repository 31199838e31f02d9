"""Persistence, ARMA and ARIMA forecasters.

ARMA models are estimated by conditional sum of squares (CSS): residuals are
computed by the one-step recursion with pre-sample innovations set to zero,
and their sum of squares is minimised starting from a Hannan-Rissanen
two-stage regression. Pure AR models are exactly CSS-optimal after the
regression stage, so no iterative search is run for them.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, signal

from rampcast.core import SeriesError, UniformSeries, difference, integrate
from rampcast.synth import is_stationary

log = logging.getLogger(__name__)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ARMAOrder:
    p: int = 0
    d: int = 0
    q: int = 0

    def __post_init__(self) -> None:
        if min(self.p, self.d, self.q) < 0:
            raise ModelError("ARMA orders must be non-negative")

    def __str__(self) -> str:
        return f"({self.p},{self.d},{self.q})"


@dataclass(frozen=True)
class ARMAModel:
    order: ARMAOrder
    phi: np.ndarray
    theta: np.ndarray
    intercept: float
    sigma2: float
    iterations: int = 0
    converged: bool = True
    objective: float = float("nan")
    warnings: tuple[str, ...] = ()

    @property
    def stationary(self) -> bool:
        return is_stationary(self.phi)

    def to_dict(self) -> dict:
        return {
            "kind": "arima",
            "order": {"p": self.order.p, "d": self.order.d, "q": self.order.q},
            "phi": [float(v) for v in self.phi],
            "theta": [float(v) for v in self.theta],
            "intercept": float(self.intercept),
            "sigma2": float(self.sigma2),
            "diagnostics": {
                "iterations": self.iterations,
                "converged": self.converged,
                "objective": float(self.objective),
                "stationary": self.stationary,
                "warnings": list(self.warnings),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ARMAModel":
        diag = d.get("diagnostics", {})
        o = d["order"]
        return cls(
            ARMAOrder(o["p"], o["d"], o["q"]),
            np.array(d["phi"], dtype=float),
            np.array(d["theta"], dtype=float),
            float(d["intercept"]),
            float(d["sigma2"]),
            int(diag.get("iterations", 0)),
            bool(diag.get("converged", True)),
            float(diag.get("objective", float("nan"))),
            tuple(diag.get("warnings", ())),
        )


def _values(x) -> np.ndarray:
    if isinstance(x, UniformSeries):
        return x.values
    return np.asarray(x, dtype=float)


def _lagged(z: np.ndarray, p: int, start: int) -> np.ndarray:
    """Columns ``z[t-1], ..., z[t-p]`` for ``t = start .. len(z)-1``."""
    n = z.shape[0]
    return np.column_stack([z[start - i : n - i] for i in range(1, p + 1)]) if p else np.empty((n - start, 0))


def css_residuals(z: np.ndarray, phi: np.ndarray, theta: np.ndarray, intercept: float) -> np.ndarray:
    """One-step residuals for ``t >= p``; earlier innovations are taken as zero."""
    p = phi.shape[0]
    u = z[p:] - intercept
    if p:
        u = u - _lagged(z, p, p) @ phi
    if theta.shape[0]:
        u = signal.lfilter([1.0], np.r_[1.0, theta], u)
    return u


def _css_jacobian(z: np.ndarray, e: np.ndarray, theta: np.ndarray, p: int, k: int) -> np.ndarray:
    """Derivatives of the CSS residuals w.r.t. ``[intercept?, phi, theta]``."""
    m = e.shape[0]
    q = theta.shape[0]
    cols = []
    if k:
        cols.append(-np.ones(m))
    for i in range(1, p + 1):
        cols.append(-z[p - i : p - i + m])
    e_pad = np.r_[np.zeros(q), e]
    for j in range(1, q + 1):
        cols.append(-e_pad[q - j : q - j + m])
    raw = np.column_stack(cols)
    return signal.lfilter([1.0], np.r_[1.0, theta], raw, axis=0)


def _invertible(theta: np.ndarray) -> bool:
    return is_stationary(-np.asarray(theta))


def _ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def hannan_rissanen(z: np.ndarray, p: int, q: int, include_intercept: bool = True) -> tuple[np.ndarray, np.ndarray, float]:
    """Two-stage regression estimate of ``(phi, theta, intercept)``."""
    n = z.shape[0]
    ones = np.ones if include_intercept else (lambda k: np.empty((k, 0)))
    if q == 0:
        X = np.column_stack([ones(n - p), _lagged(z, p, p)])
        coef = _ols(X, z[p:])
        c = float(coef[0]) if include_intercept else 0.0
        return coef[int(include_intercept) :], np.zeros(0), c
    m = min(max(p + q, int(math.ceil(12 * (n / 100.0) ** 0.25))), n // 4)
    X = np.column_stack([ones(n - m), _lagged(z, m, m)])
    long_coef = _ols(X, z[m:])
    resid = np.zeros(n)
    resid[m:] = z[m:] - X @ long_coef
    start = m + q
    X2 = np.column_stack([ones(n - start), _lagged(z, p, start), _lagged(resid, q, start)])
    coef = _ols(X2, z[start:])
    k = int(include_intercept)
    c = float(coef[0]) if include_intercept else 0.0
    return coef[k : k + p], coef[k + p :], c


def fit_arma(series, p: int, q: int, include_intercept: bool = True, maxiter: int = 500) -> ARMAModel:
    """Fit ARMA(p, q) by conditional sum of squares.

    Raises
    ------
    ModelError
        On absent values, too-short input or a zero-variance series.
    """
    return _fit(_values(series), ARMAOrder(p, 0, q), include_intercept, maxiter)


def fit_arima(series, p: int, d: int, q: int, include_intercept: bool | None = None, maxiter: int = 500) -> ARMAModel:
    """ARMA(p, q) fitted to the ``d``-times differenced series.

    The intercept defaults to off when ``d > 0`` so that ARIMA(0, 1, 0) is the
    driftless random walk.
    """
    if include_intercept is None:
        include_intercept = d == 0
    y = _values(series)
    if d < 0:
        raise ModelError("differencing order must be non-negative")
    z = np.diff(y, n=d) if d else y
    return _fit(z, ARMAOrder(p, d, q), include_intercept, maxiter)


def _fit(z: np.ndarray, order: ARMAOrder, include_intercept: bool, maxiter: int) -> ARMAModel:
    p, q = order.p, order.q
    if np.isnan(z).any():
        raise ModelError("series contains absent values; impute or split before fitting")
    n = z.shape[0]
    need = 10 * (p + q + 1)
    if n < need:
        raise ModelError(f"need at least {need} observations for p={p}, q={q}; got {n}")
    scale = float(np.std(z))
    if not scale > 0:
        raise ModelError("degenerate variance: series is constant")

    if p == 0 and q == 0:
        c = float(np.mean(z)) if include_intercept else 0.0
        resid = z - c
        sse = float(resid @ resid)
        return ARMAModel(order, np.zeros(0), np.zeros(0), c, sse / n, 0, True, sse)

    # work on a standardised copy for conditioning; phi and theta are scale free
    loc = float(np.mean(z)) if include_intercept else 0.0
    w = (z - loc) / scale
    phi0, theta0, c0 = hannan_rissanen(w, p, q, include_intercept)
    warnings: list[str] = []
    iterations, converged = 0, True

    if q > 0:
        k = int(include_intercept)

        def unpack(x):
            return x[k : k + p], x[k + p :], (x[0] if k else 0.0)

        n_eff = n - p

        def objective(x):
            ph, th, c = unpack(x)
            with np.errstate(over="ignore", invalid="ignore"):
                r = css_residuals(w, ph, th, c)
                val = float(r @ r) / n_eff
                grad = 2.0 * _css_jacobian(w, r, th, p, k).T @ r / n_eff
            if not (math.isfinite(val) and np.isfinite(grad).all()):
                return 1e300, np.zeros_like(x)
            return val, grad

        x0 = np.r_[[c0] if k else [], phi0, theta0]
        if objective(x0)[0] >= 1e300 or not _invertible(theta0):
            x0 = np.r_[[0.0] if k else [], phi0, np.zeros(q)]
        res = optimize.minimize(objective, x0, jac=True, method="BFGS", options={"maxiter": maxiter, "gtol": 1e-9})
        iterations, converged = int(res.nit), bool(res.success)
        if not converged:
            msg = f"CSS optimiser did not converge: {res.message}"
            warnings.append(msg)
            log.warning(msg)
        phi_w, theta_w, c_w = unpack(res.x)
    else:
        phi_w, theta_w, c_w = phi0, theta0, c0

    phi = np.asarray(phi_w, dtype=float).copy()
    theta = np.asarray(theta_w, dtype=float).copy()
    # map the standardised intercept back to the original units
    c = float(scale * c_w + loc * (1.0 - phi.sum())) if include_intercept else 0.0
    resid = css_residuals(z, phi, theta, c)
    obj = float(resid @ resid)
    if not is_stationary(phi):
        msg = f"fitted AR polynomial is not stationary: phi={phi.tolist()}"
        warnings.append(msg)
        log.warning(msg)
    return ARMAModel(order, phi, theta, c, obj / resid.shape[0], iterations, converged, obj, tuple(warnings))


def persistence_forecast(history, horizon: int) -> np.ndarray:
    """Repeat the last present value ``horizon`` times."""
    y = _values(history)
    present = y[~np.isnan(y)]
    if present.size == 0:
        raise ModelError("persistence needs at least one present value")
    if horizon < 1:
        raise ModelError("horizon must be >= 1")
    return np.full(horizon, present[-1])


def _history_z(model: ARMAModel, y: np.ndarray) -> np.ndarray:
    p, d, q = model.order.p, model.order.d, model.order.q
    if y.shape[0] < max(p, q) + d or y.shape[0] < d + 1:
        raise ModelError(f"history of length {y.shape[0]} is too short for order {model.order}")
    if np.isnan(y).any():
        raise ModelError("history contains absent values")
    return np.diff(y, n=d) if d else y


def _step_ahead(model: ARMAModel, z: np.ndarray, e: np.ndarray, horizon: int) -> np.ndarray:
    p, q = model.order.p, model.order.q
    zs = list(z[-p:]) if p else []
    es = list(e[-q:]) if q else []
    out = np.empty(horizon)
    for h in range(horizon):
        acc = model.intercept
        for i in range(1, p + 1):
            acc += model.phi[i - 1] * zs[-i]
        for j in range(1, q + 1):
            acc += model.theta[j - 1] * es[-j]
        out[h] = acc
        if p:
            zs.append(acc)
        if q:
            es.append(0.0)
    return out


def _full_residuals(model: ARMAModel, z: np.ndarray) -> np.ndarray:
    e = np.zeros(z.shape[0])
    p = model.order.p
    if z.shape[0] > p:
        e[p:] = css_residuals(z, model.phi, model.theta, model.intercept)
    return e


def forecast(model: ARMAModel, history, horizon: int) -> np.ndarray:
    """Multi-step forecast from the end of ``history`` (levels in, levels out).

    Future innovations are zero; MA terms use residuals recomputed over the
    differenced history with the model's parameters.
    """
    if horizon < 1:
        raise ModelError("horizon must be >= 1")
    y = _values(history)
    z = _history_z(model, y)
    e = _full_residuals(model, z)
    zf = _step_ahead(model, z, e, horizon)
    d = model.order.d
    return integrate(zf, y[-d:]) if d else zf


def _check_contiguous(train, test) -> None:
    if isinstance(train, UniformSeries) and isinstance(test, UniformSeries):
        if train.interval != test.interval or train.end != test.start:
            raise ModelError(
                f"test must start right after train: train ends {train.end.isoformat()}, test starts {test.start.isoformat()}"
            )


def _known_part(y: np.ndarray, d: int, idx: np.ndarray) -> np.ndarray:
    """``y_t - diff^d(y)_t``: the part of ``y_t`` fixed by earlier levels."""
    out = np.zeros(idx.shape[0])
    for k in range(1, d + 1):
        out = out + (-((-1) ** k) * math.comb(d, k)) * y[idx - k]
    return out


def rolling_forecast(model: ARMAModel, train, test, horizon: int = 1) -> np.ndarray:
    """Predict each test point from true values up to ``horizon`` steps before it.

    Parameters are frozen (no refit). With ``horizon=1`` this is the rolling
    one-step protocol.
    """
    _check_contiguous(train, test)
    ytr, yte = _values(train), _values(test)
    y = np.concatenate([ytr, yte])
    d, p = model.order.d, model.order.p
    n_tr = ytr.shape[0]
    if n_tr - horizon + 1 < max(p, model.order.q) + d + 1:
        raise ModelError("training history too short for the model order")
    z = _history_z(model, y)
    e = _full_residuals(model, z)
    if horizon == 1:
        t = np.arange(n_tr, y.shape[0])
        s = t - d  # index into z
        pred = np.full(t.shape[0], model.intercept)
        for i in range(1, p + 1):
            pred = pred + model.phi[i - 1] * z[s - i]
        for j in range(1, model.order.q + 1):
            pred = pred + model.theta[j - 1] * e[s - j]
        return _known_part(y, d, t) + pred if d else pred
    out = np.empty(yte.shape[0])
    for i in range(yte.shape[0]):
        origin = n_tr + i - horizon  # last observed level index
        zo = origin - d
        zf = _step_ahead(model, z[: zo + 1], e[: zo + 1], horizon)
        lev = integrate(zf, y[origin - d + 1 : origin + 1]) if d else zf
        out[i] = lev[-1]
    return out


def rolling_one_step(model: ARMAModel, train, test) -> np.ndarray:
    return rolling_forecast(model, train, test, horizon=1)


def in_sample_predictions(model: ARMAModel, series) -> tuple[np.ndarray, np.ndarray]:
    """One-step fitted values over ``series``; returns (indices, predictions).

    The first ``p + d`` points have no conditional prediction and are skipped.
    """
    y = _values(series)
    d, p = model.order.d, model.order.p
    z = _history_z(model, y)
    e = _full_residuals(model, z)
    t = np.arange(p + d, y.shape[0])
    s = t - d
    pred = np.full(t.shape[0], model.intercept)
    for i in range(1, p + 1):
        pred = pred + model.phi[i - 1] * z[s - i]
    for j in range(1, model.order.q + 1):
        pred = pred + model.theta[j - 1] * e[s - j]
    return t, (_known_part(y, d, t) + pred if d else pred)


def persistence_rolling(train, test, horizon: int = 1) -> np.ndarray:
    """Persistence under the rolling protocol: the value ``horizon`` steps back."""
    _check_contiguous(train, test)
    ytr, yte = _values(train), _values(test)
    if ytr.shape[0] < horizon:
        raise ModelError("training history shorter than the horizon")
    y = np.concatenate([ytr, yte])
    n_tr = ytr.shape[0]
    return y[n_tr - horizon : y.shape[0] - horizon].copy()


@dataclass
class FitReport:
    fit_seconds: float = 0.0
    forecast_seconds: float = 0.0

    def __post_init__(self) -> None:
        if self.fit_seconds < 0 or self.forecast_seconds < 0:
            raise ModelError("durations must be non-negative")


@dataclass
class Stopwatch:
    elapsed: float = 0.0
    _t0: float = field(default=0.0, repr=False)

    def __enter__(self) -> "Stopwatch":
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc) -> None:
        self.elapsed = time.perf_counter() - self._t0
