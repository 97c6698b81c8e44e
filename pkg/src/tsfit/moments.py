"""Mean, autocovariance, autocorrelation and partial autocorrelation estimators.

Every estimator that touches the data is a window kernel run through
:func:`tsfit.overlap.map_reduce`, so it inherits the engine's partition
independence. ``layout`` arguments accept an :class:`~tsfit.overlap.Engine`,
a partition count, an :class:`~tsfit.overlap.OverlapLayout` or ``None``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LaggedCovariance, RegularSeries, as_series
from .errors import DomainError
from .linalg import block_toeplitz, solve_checked
from .overlap import WindowKernel, resolve_engine

PER_LAG = "per-lag-unbiased"
JOINT = "joint-biased"


@dataclass(frozen=True)
class Correlogram:
    rho: np.ndarray  # (h_max + 1, d, d), rho[h] for h >= 0

    @property
    def h_max(self) -> int:
        return self.rho.shape[0] - 1

    @property
    def d(self) -> int:
        return self.rho.shape[1]

    def at(self, h: int) -> np.ndarray:
        return self.rho[h] if h >= 0 else self.rho[-h].T


@dataclass(frozen=True)
class PartialCorrelogram:
    kappa: np.ndarray  # (p_max + 1, d, d); kappa[0] is unused and set to the identity

    @property
    def p_max(self) -> int:
        return self.kappa.shape[0] - 1

    @property
    def d(self) -> int:
        return self.kappa.shape[1]

    def at(self, p: int) -> np.ndarray:
        return self.kappa[p]


def _sum_kernel(block):
    return block.rows(0)


def mean(series, layout=None) -> np.ndarray:
    series = as_series(series)
    kernel = WindowKernel(0, _sum_kernel, "interior", name="mean")
    return resolve_engine(layout).run(series, kernel) / series.n


def center(series, mu) -> RegularSeries:
    series = as_series(series)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.shape != (series.d,):
        raise DomainError(f"mean has shape {mu.shape}, expected ({series.d},)")
    return series.with_values(series.values - mu)


def _lag_product_kernel(h):
    def evaluate(block):
        return np.einsum("ti,tj->tij", block.rows(0), block.rows(h))
    return WindowKernel(h, evaluate, "forward", name=f"lag-{h} product")


def autocovariance_per_lag(series, layout=None, h_max: int = 10) -> LaggedCovariance:
    """``gamma(h) = sum_{k < n-h} X_k X_{k+h}^T / (n - h - 1)``, one pass per lag."""
    series = as_series(series)
    n = series.n
    if h_max < 0 or h_max >= n - 1:
        raise DomainError(f"per-lag autocovariance needs 0 <= h_max < n - 1 = {n - 1}, got {h_max}")
    engine = resolve_engine(layout)
    gamma = np.empty((h_max + 1, series.d, series.d))
    for h in range(h_max + 1):
        gamma[h] = engine.run(series, _lag_product_kernel(h)) / (n - h - 1)
    return LaggedCovariance(gamma, n, PER_LAG)


def joint_kernel(h_max: int) -> WindowKernel:
    def evaluate(block):
        x0 = block.rows(0)
        return np.stack([np.einsum("ti,tj->tij", x0, block.rows(h)) for h in range(h_max + 1)],
                        axis=1)
    return WindowKernel(h_max, evaluate, "interior", name="joint autocovariance")


def autocovariance_joint(series, layout=None, h_max: int = 10) -> LaggedCovariance:
    """All lags from one width-``2 h_max`` kernel over centers ``[h_max, n - h_max)``.

    Negative lags are the transposes of the stored non-negative ones, so the
    kernel only emits ``X_t X_{t+h}^T`` for ``h >= 0``.
    """
    series = as_series(series)
    n = series.n
    if h_max < 0 or 2 * h_max + 1 >= n:
        raise DomainError(f"joint autocovariance needs 2*h_max + 1 < n, got h_max={h_max}, n={n}")
    total = resolve_engine(layout).run(series, joint_kernel(h_max))
    gamma = total / (n - (2 * h_max + 1))
    return LaggedCovariance(gamma, n, JOINT)


def autocovariance(series, layout=None, h_max: int = 10, estimator: str = "per-lag") -> LaggedCovariance:
    if estimator in ("per-lag", PER_LAG):
        return autocovariance_per_lag(series, layout, h_max)
    if estimator in ("joint", JOINT):
        return autocovariance_joint(series, layout, h_max)
    raise DomainError(f"unknown autocovariance estimator {estimator!r}")


def autocorrelation(cov: LaggedCovariance) -> Correlogram:
    diag = np.diag(cov.gamma[0])
    bad = np.flatnonzero(diag <= 0)
    if bad.size:
        raise DomainError(f"coordinate {int(bad[0])} has non-positive variance {diag[bad[0]]!r}")
    scale = 1.0 / np.sqrt(diag)
    rho = cov.gamma * scale[None, :, None] * scale[None, None, :]
    return Correlogram(rho)


def pacf(cov: LaggedCovariance, p_max: int, ridge: float = 0.0) -> PartialCorrelogram:
    """Partial autocorrelation matrices from the order-p block-Toeplitz systems."""
    if p_max < 1 or p_max > cov.h_max:
        raise DomainError(f"need 1 <= p_max <= h_max={cov.h_max}, got {p_max}")
    d = cov.d
    kappa = np.zeros((p_max + 1, d, d))
    kappa[0] = np.eye(d)

    def block(k):
        g = cov.at(k)
        return g + ridge * np.eye(d) if k == 0 else g

    for p in range(1, p_max + 1):
        mat = block_toeplitz(block, p, d)
        rhs = np.vstack([cov.at(h) for h in range(1, p + 1)])
        sol = solve_checked(mat, rhs, order=p, what="partial autocorrelation system")
        kappa[p] = sol[(p - 1) * d:].T
    return PartialCorrelogram(kappa)


def significance_band(n: int) -> float:
    if n < 2:
        raise DomainError(f"significance band needs n >= 2, got {n}")
    return 1.96 / math.sqrt(n)


def acf_to_dict(corr: Correlogram, n: int, normalization: str) -> dict:
    return {
        "h_max": corr.h_max,
        "d": corr.d,
        "values": corr.rho.tolist(),
        "band": significance_band(n),
        "normalization": normalization,
    }


def pacf_to_dict(pc: PartialCorrelogram, n: int, normalization: str) -> dict:
    return {
        "p_max": pc.p_max,
        "d": pc.d,
        "values": pc.kappa[1:].tolist(),
        "band": significance_band(n),
        "normalization": normalization,
    }
