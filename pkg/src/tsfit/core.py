"""Series and model types, model properties, differencing and simulation.

Autocovariance convention used throughout the package::

    gamma(h) = E[X_t X_{t+h}^T],    gamma(-h) = gamma(h)^T

which is the convention of the sample estimator ``sum_k X_k X_{k+h}^T``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal

from .errors import DomainError, NumericalFailure

DEFAULT_TOL = 1e-9
DEFAULT_BURN_IN = 1000


@dataclass(frozen=True)
class RegularSeries:
    """An ``n x d`` block of regularly indexed real observations.

    Row ``t`` holds the observation at time index ``start_index + t``.
    """

    values: np.ndarray
    start_index: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DomainError(f"series values must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DomainError(f"series must have n >= 1 and d >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("series contains NaN or infinite values")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "start_index", int(self.start_index))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def with_values(self, values, start_index=None) -> "RegularSeries":
        return RegularSeries(values, self.start_index if start_index is None else start_index)


def as_series(data) -> RegularSeries:
    """Accept a RegularSeries or anything array-like."""
    if isinstance(data, RegularSeries):
        return data
    return RegularSeries(data)


def _as_blocks(blocks, d, name) -> tuple:
    out = []
    for k, block in enumerate(blocks):
        block = np.array(block, dtype=float, ndmin=2)
        if block.shape != (d, d):
            raise DomainError(f"{name}[{k}] has shape {block.shape}, expected {(d, d)}")
        if not np.all(np.isfinite(block)):
            raise DomainError(f"{name}[{k}] contains non-finite entries")
        block.flags.writeable = False
        out.append(block)
    return tuple(out)


@dataclass(frozen=True)
class ArmaModel:
    """ARMA(p, q) model ``X_t = sum A_k X_{t-k} + eps_t + sum B_k eps_{t-k}``.

    ``warnings``, ``method`` and ``info`` carry fit metadata; they are not
    part of the model itself.
    """

    ar: tuple
    ma: tuple
    sigma_eps: np.ndarray
    warnings: tuple = ()
    method: str | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        sigma = np.array(self.sigma_eps, dtype=float, ndmin=2)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise DomainError(f"sigma_eps must be square, got shape {sigma.shape}")
        d = sigma.shape[0]
        if not np.all(np.isfinite(sigma)):
            raise DomainError("sigma_eps contains non-finite entries")
        if np.max(np.abs(sigma - sigma.T)) > 1e-12:
            raise DomainError("sigma_eps is not symmetric")
        if np.linalg.eigvalsh(sigma).min() < -1e-10:
            raise DomainError("sigma_eps is not positive semidefinite")
        sigma.flags.writeable = False
        object.__setattr__(self, "sigma_eps", sigma)
        object.__setattr__(self, "ar", _as_blocks(self.ar, d, "ar"))
        object.__setattr__(self, "ma", _as_blocks(self.ma, d, "ma"))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def p(self) -> int:
        return len(self.ar)

    @property
    def q(self) -> int:
        return len(self.ma)

    @property
    def d(self) -> int:
        return self.sigma_eps.shape[0]

    def replace(self, **changes) -> "ArmaModel":
        fields = dict(ar=self.ar, ma=self.ma, sigma_eps=self.sigma_eps,
                      warnings=self.warnings, method=self.method, info=dict(self.info))
        fields.update(changes)
        return ArmaModel(**fields)


@dataclass(frozen=True)
class CompanionMatrix:
    """Block companion matrix: first block row holds the coefficients,
    identities on the block sub-diagonal."""

    order: int
    d: int
    matrix: np.ndarray


@dataclass(frozen=True)
class PsiWeights:
    """Coefficients of the causal representation ``X_t = sum_j Psi_j eps_{t-j}``."""

    psi: np.ndarray  # shape (k_max + 1, d, d)

    @property
    def k_max(self) -> int:
        return self.psi.shape[0] - 1

    @property
    def d(self) -> int:
        return self.psi.shape[1]


@dataclass(frozen=True)
class LaggedCovariance:
    """Autocovariance stack gamma(0..h_max); negative lags are transposes.

    ``gamma[h]`` is ``gamma(h)`` for ``0 <= h <= h_max``.
    """

    gamma: np.ndarray
    n_effective: int | None = None
    normalization: str = "model"

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float)
        if gamma.ndim == 1:
            gamma = gamma[:, None, None]
        if gamma.ndim != 3 or gamma.shape[1] != gamma.shape[2]:
            raise DomainError(f"gamma must have shape (h_max+1, d, d), got {gamma.shape}")
        if np.max(np.abs(gamma[0] - gamma[0].T)) > 1e-10:
            raise DomainError("gamma(0) is not symmetric")
        gamma.flags.writeable = False
        object.__setattr__(self, "gamma", gamma)

    @property
    def h_max(self) -> int:
        return self.gamma.shape[0] - 1

    @property
    def d(self) -> int:
        return self.gamma.shape[1]

    def at(self, h: int) -> np.ndarray:
        if abs(h) > self.h_max:
            raise DomainError(f"lag {h} outside stored range +-{self.h_max}")
        return self.gamma[h] if h >= 0 else self.gamma[-h].T

    def __call__(self, h: int) -> np.ndarray:
        return self.at(h)


def companion_matrix(blocks: Sequence[np.ndarray], d: int) -> CompanionMatrix:
    order = len(blocks)
    mat = np.zeros((order * d, order * d))
    for k, block in enumerate(blocks):
        mat[:d, k * d:(k + 1) * d] = block
    if order > 1:
        mat[d:, :-d] = np.eye((order - 1) * d)
    return CompanionMatrix(order, d, mat)


def spectral_radius(matrix: np.ndarray, name: str = "matrix") -> float:
    try:
        eig = np.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue computation did not converge for {name}") from exc
    return float(np.max(np.abs(eig))) if eig.size else 0.0


def _check_tol(tol):
    if not 0.0 < tol < 1.0:
        raise DomainError(f"tol must lie in (0, 1), got {tol}")


def is_causal(model: ArmaModel, tol: float = DEFAULT_TOL) -> bool:
    """True iff the AR companion matrix has spectral radius below ``1 - tol``."""
    _check_tol(tol)
    if model.p == 0:
        return True
    comp = companion_matrix(model.ar, model.d)
    return spectral_radius(comp.matrix, "AR companion matrix") < 1.0 - tol


def is_invertible(model: ArmaModel, tol: float = DEFAULT_TOL) -> bool:
    """True iff the MA companion matrix (built from ``-B_k``) has spectral
    radius below ``1 - tol``."""
    _check_tol(tol)
    if model.q == 0:
        return True
    comp = companion_matrix([-b for b in model.ma], model.d)
    return spectral_radius(comp.matrix, "MA companion matrix") < 1.0 - tol


def model_warnings(model: ArmaModel) -> tuple:
    out = []
    if not is_causal(model):
        out.append("non_causal")
    if not is_invertible(model):
        out.append("non_invertible")
    return tuple(out)


def psi_weights(model: ArmaModel, k_max: int) -> PsiWeights:
    if not is_causal(model):
        raise DomainError("psi weights require a causal model")
    d = model.d
    psi = np.zeros((k_max + 1, d, d))
    psi[0] = np.eye(d)
    for j in range(1, k_max + 1):
        acc = model.ma[j - 1].copy() if j <= model.q else np.zeros((d, d))
        for i in range(1, min(j, model.p) + 1):
            acc += model.ar[i - 1] @ psi[j - i]
        psi[j] = acc
    return PsiWeights(psi)


def default_truncation(model: ArmaModel, h_max: int) -> int:
    return max(200, h_max + 50 * max(model.p, 1))


def model_autocovariance(model: ArmaModel, h_max: int, k_trunc: int | None = None) -> LaggedCovariance:
    """Theoretical autocovariance of the causal solution from truncated psi weights."""
    if k_trunc is None:
        k_trunc = default_truncation(model, h_max)
    if k_trunc < h_max:
        raise DomainError(f"k_trunc={k_trunc} must be at least h_max={h_max}")
    psi = psi_weights(model, k_trunc).psi
    weighted = psi @ model.sigma_eps  # Psi_j Sigma
    gamma = np.empty((h_max + 1, model.d, model.d))
    for h in range(h_max + 1):
        # gamma(h) = sum_j Psi_j Sigma Psi_{j+h}^T
        gamma[h] = np.einsum("jab,jcb->ac", weighted[: k_trunc + 1 - h], psi[h:])
    gamma[0] = 0.5 * (gamma[0] + gamma[0].T)
    return LaggedCovariance(gamma, None, "model")


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clamped at zero."""
    w, v = np.linalg.eigh(matrix)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def simulate(model: ArmaModel, n: int, burn_in: int = DEFAULT_BURN_IN, seed: int = 0) -> RegularSeries:
    """Gaussian ARMA sample path started from a zero state."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if burn_in < 0:
        raise DomainError(f"burn_in must be non-negative, got {burn_in}")
    if not is_causal(model):
        raise DomainError("simulate requires a causal model")
    d, total = model.d, n + burn_in
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((total, d)) @ psd_sqrt(model.sigma_eps)

    u = eps.copy()
    for j, b in enumerate(model.ma, start=1):
        u[j:] += eps[:-j] @ b.T

    if model.p == 0:
        x = u
    elif d == 1:
        a = np.concatenate([[1.0], [-blk[0, 0] for blk in model.ar]])
        x = signal.lfilter([1.0], a, u[:, 0])[:, None]
    else:
        x = np.zeros((total, d))
        ar_t = [blk.T for blk in model.ar]
        for t in range(total):
            acc = u[t].copy()
            for k in range(1, min(t, model.p) + 1):
                acc += x[t - k] @ ar_t[k - 1]
            x[t] = acc
    return RegularSeries(x[burn_in:])


def difference(series: RegularSeries, order: int = 1) -> RegularSeries:
    series = as_series(series)
    if order < 0:
        raise DomainError(f"order must be non-negative, got {order}")
    if series.n <= order:
        raise DomainError(f"cannot difference {series.n} rows {order} times")
    return series.with_values(np.diff(series.values, n=order, axis=0)) if order else series


def integrate(series: RegularSeries, initial, order: int = 1) -> RegularSeries:
    """Inverse of :func:`difference`; ``initial`` seeds every cumulative sum."""
    series = as_series(series)
    if order < 1:
        raise DomainError(f"order must be at least 1, got {order}")
    initial = np.atleast_1d(np.asarray(initial, dtype=float))
    if initial.shape != (series.d,):
        raise DomainError(f"initial has shape {initial.shape}, expected ({series.d},)")
    values = series.values
    for _ in range(order):
        values = np.vstack([initial, initial + np.cumsum(values, axis=0)])
    return series.with_values(values)


def _matrix_list(mats) -> list:
    return [np.asarray(m, dtype=float).tolist() for m in mats]


def model_to_dict(model: ArmaModel, **extra) -> dict:
    out = {
        "p": model.p,
        "q": model.q,
        "d": model.d,
        "ar": _matrix_list(model.ar),
        "ma": _matrix_list(model.ma),
        "sigma_eps": np.asarray(model.sigma_eps).tolist(),
    }
    if model.method is not None:
        out["method"] = model.method
    out["warnings"] = list(model.warnings)
    for key in ("m_depth", "mu", "converged", "iterations"):
        if key in model.info:
            out[key] = model.info[key]
    out.update(extra)
    return out


def model_from_dict(obj: dict) -> ArmaModel:
    try:
        d = int(obj["d"])
        ar = [np.asarray(m, dtype=float).reshape(d, d) for m in obj.get("ar", [])]
        ma = [np.asarray(m, dtype=float).reshape(d, d) for m in obj.get("ma", [])]
        sigma = np.asarray(obj["sigma_eps"], dtype=float).reshape(d, d)
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed model JSON: {exc}") from exc
    if len(ar) != int(obj.get("p", len(ar))) or len(ma) != int(obj.get("q", len(ma))):
        raise DomainError("model JSON orders do not match coefficient lists")
    info = {key: obj[key] for key in ("m_depth", "mu", "converged", "iterations") if key in obj}
    return ArmaModel(ar, ma, sigma, warnings=tuple(obj.get("warnings", ())),
                     method=obj.get("method"), info=info)


def save_model(model: ArmaModel, path, **extra) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, **extra), fh, indent=2)
        fh.write("\n")


def load_model(path) -> ArmaModel:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: invalid JSON ({exc})") from exc
    return model_from_dict(obj)
