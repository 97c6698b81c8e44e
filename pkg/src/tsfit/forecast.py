"""Linear AR and ARMA predictors."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import ArmaModel, as_series, is_causal, is_invertible, model_autocovariance
from .errors import DomainError
from .overlap import map_partitions, partition


@dataclass(frozen=True)
class ForecastResult:
    """``predictions[i]`` forecasts step ``i + 1`` past the data for the AR
    path; for the one-step ARMA path it holds ``X^_t`` for
    ``t = warmup..n`` (the last row is the out-of-sample forecast) and
    ``one_step_residuals`` holds ``X_t - X^_t`` for ``t = warmup..n-1``."""

    horizon: int
    predictions: np.ndarray
    one_step_residuals: np.ndarray | None = None
    warmup: int = 0


def forecast_ar(model: ArmaModel, recent, horizon: int) -> ForecastResult:
    """Multi-step AR forecast; ``recent`` holds the last p rows, oldest first."""
    if model.q:
        raise DomainError("forecast_ar needs a pure AR model (q = 0)")
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    p, d = model.p, model.d
    recent = np.asarray(recent, dtype=float).reshape(-1, d) if p else np.zeros((0, d))
    if recent.shape[0] != p:
        raise DomainError(f"need exactly p={p} recent rows, got {recent.shape[0]}")
    if not is_causal(model):
        warnings.warn("forecasting with a non-causal AR model", RuntimeWarning, stacklevel=2)
    hist = list(recent)
    out = np.empty((horizon, d))
    for s in range(horizon):
        pred = np.zeros(d)
        for k, a in enumerate(model.ar, start=1):
            pred += a @ hist[-k]
        out[s] = pred
        hist.append(pred)
    return ForecastResult(horizon, out)


def _exact_warmup_coefs(model: ArmaModel, m: int):
    from .fit_freq import innovations
    return innovations(model_autocovariance(model, m), m)


def forecast_arma_one_step(model: ArmaModel, series, exact_warmup: bool = False,
                           init=None) -> ForecastResult:
    """Streaming one-step ARMA predictor.

    For ``t >= m = max(p, q)``::

        X^_t = sum_k A_k X_{t-k} + sum_k B_k (X_{t-k} - X^_{t-k})

    The first ``m`` predictions are ``init`` (zeros by default) or, with
    ``exact_warmup``, the innovations predictor built from the model's
    autocovariance. Their influence decays geometrically for invertible models.
    """
    series = as_series(series)
    x = series.values
    n, d = x.shape
    p, q = model.p, model.q
    m = max(p, q)
    if d != model.d:
        raise DomainError(f"series has d={d}, model has d={model.d}")
    if n < m + 1:
        raise DomainError(f"series needs at least max(p, q) + 1 = {m + 1} rows, got {n}")
    if not (is_causal(model) and is_invertible(model)):
        warnings.warn("one-step ARMA prediction with a non-causal or non-invertible model",
                      RuntimeWarning, stacklevel=2)

    pred = np.zeros((n + 1, d))
    resid = np.zeros((n, d))
    if init is not None:
        init = np.asarray(init, dtype=float).reshape(m, d)
        pred[:m] = init
    elif exact_warmup and m:
        state = _exact_warmup_coefs(model, m)
        for t in range(m):
            acc = np.zeros(d)
            for j in range(1, t + 1):
                acc += state.coef(t, j) @ resid[t - j]
            pred[t] = acc
            resid[t] = x[t] - pred[t]
    for t in range(m):
        resid[t] = x[t] - pred[t]

    ar_t = [a.T for a in model.ar]
    ma_t = [b.T for b in model.ma]
    for t in range(m, n + 1):
        acc = np.zeros(d)
        for k in range(1, p + 1):
            acc += x[t - k] @ ar_t[k - 1]
        for k in range(1, q + 1):
            acc += resid[t - k] @ ma_t[k - 1]
        pred[t] = acc
        if t < n:
            resid[t] = x[t] - acc
    return ForecastResult(1, pred[m:], resid[m:], warmup=m)


def forecast_arma(model: ArmaModel, series, horizon: int, exact_warmup: bool = False) -> ForecastResult:
    """Multi-step ARMA forecast: future innovations are set to zero and
    predictions are re-injected."""
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    series = as_series(series)
    one = forecast_arma_one_step(model, series, exact_warmup)
    x, d = series.values, series.d
    hist = list(x[-model.p:]) if model.p else []
    res_hist = list(one.one_step_residuals[-model.q:]) if model.q else []
    out = np.empty((horizon, d))
    for s in range(horizon):
        acc = np.zeros(d)
        for k, a in enumerate(model.ar, start=1):
            acc += a @ hist[-k]
        for k, b in enumerate(model.ma, start=1):
            if k <= len(res_hist):
                acc += b @ res_hist[-k]
        out[s] = acc
        if model.p:
            hist.append(acc)
        if model.q:
            res_hist.append(np.zeros(d))
    return ForecastResult(horizon, out, one.one_step_residuals, one.warmup)


def forecast_arma_one_step_chunked(model: ArmaModel, series, k: int, padding: int,
                                   max_workers=None) -> ForecastResult:
    """Approximate parallel one-step prediction (in-sample rows only).

    Each time partition restarts the zero-initialised recursion at the start
    of its padded range and keeps the predictions of its owned range. The
    error against the sequential run decays like ``rho**padding`` with
    ``rho`` the MA companion spectral radius.
    """
    series = as_series(series)
    m = max(model.p, model.q)
    parts = partition(series, k, padding)

    def local(part):
        a, b = part.owned_range
        pa, _ = part.padded_range
        sub = part.data[: b - pa]
        if sub.shape[0] < m + 1:
            raise DomainError(f"partition {part.partition_id} is shorter than max(p, q) + 1")
        res = forecast_arma_one_step(model, sub)
        full_pred = np.full(sub.shape, np.nan)
        full_resid = np.full(sub.shape, np.nan)
        full_pred[res.warmup:] = res.predictions[:-1]
        full_resid[res.warmup:] = res.one_step_residuals
        pred, resid = full_pred[a - pa:], full_resid[a - pa:]
        return pred, resid

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        chunks = map_partitions(parts, local, max_workers)
    pred = np.vstack([c[0] for c in chunks])
    resid = np.vstack([c[1] for c in chunks])
    return ForecastResult(1, pred[m:], resid[m:], warmup=m)
