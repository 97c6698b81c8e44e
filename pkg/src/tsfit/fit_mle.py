"""Conditional Gaussian likelihood fits by first-order methods.

Gradients are taken with respect to the log-likelihood exactly as
:func:`conditional_loglik` computes it (no averaging, ascent sign)::

    L(A) = sum_{t=p}^{n-1} log N(X_t - sum_k A_k X_{t-k}; 0, Sigma)
    dL/dA_k = sum_t Pi e_t X_{t-k}^T,        Pi = Sigma^{-1}

``L`` is a concave quadratic in ``A = [A_1 ... A_p]``: with ``Z_t`` the
stacked lags, the gradient is ``Pi (S_yz - A S_zz)`` where ``S_yz`` and
``S_zz`` are window-kernel sums. The fitters compute these statistics once
through the overlap engine and iterate on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ArmaModel, RegularSeries, as_series, model_warnings
from .errors import DomainError, StepSizeError
from .overlap import OverlapLayout, WindowKernel, map_partitions, partition_at, resolve_engine

LOG_2PI = math.log(2.0 * math.pi)
STEP_RULES = ("eigen", "fixed", "backtracking")


@dataclass(frozen=True)
class MleOptions:
    """Optimisation knobs.

    ``grad_tol`` applies to the per-term gradient, ``max|dL/dA| / n_terms``.
    SGD runs ``sgd_steps`` single-term updates with step
    ``sgd_step0 / (1 + t)``.
    """

    max_iters: int = 5000
    grad_tol: float = 1e-10
    step_rule: str = "eigen"
    step: float | None = None
    backtrack_c: float = 1e-4
    backtrack_rho: float = 0.5
    sgd: bool = False
    sgd_step0: float = 0.5
    sgd_steps: int = 100_000
    seed: int = 0
    init: str = "zeros"
    rounds: int = 3

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.grad_tol > 0:
            raise DomainError(f"grad_tol must be positive, got {self.grad_tol}")
        if self.step_rule not in STEP_RULES:
            raise DomainError(f"step_rule must be one of {STEP_RULES}, got {self.step_rule!r}")
        if self.step_rule == "fixed" and not (self.step and self.step > 0):
            raise DomainError("fixed step rule needs a positive step")
        if not (0 < self.backtrack_c < 1 and 0 < self.backtrack_rho < 1):
            raise DomainError("backtracking constants must lie in (0, 1)")
        if self.init not in ("zeros", "yule_walker"):
            raise DomainError(f"init must be 'zeros' or 'yule_walker', got {self.init!r}")
        if self.rounds < 1:
            raise DomainError(f"rounds must be >= 1, got {self.rounds}")
        if self.sgd and (self.sgd_steps < 1 or not self.sgd_step0 > 0):
            raise DomainError("sgd needs sgd_steps >= 1 and sgd_step0 > 0")


def _precision(sigma_eps, d) -> np.ndarray:
    sigma = np.array(sigma_eps, dtype=float, ndmin=2)
    if sigma.shape != (d, d):
        raise DomainError(f"sigma_eps has shape {sigma.shape}, expected {(d, d)}")
    if np.max(np.abs(sigma - sigma.T)) > 1e-12 or np.linalg.eigvalsh(sigma).min() <= 0:
        raise DomainError("sigma_eps must be symmetric positive definite")
    return np.linalg.inv(sigma)


def _ar_stack(ar, d) -> np.ndarray:
    blocks = [np.array(a, dtype=float, ndmin=2) for a in ar]
    for k, a in enumerate(blocks):
        if a.shape != (d, d):
            raise DomainError(f"ar[{k}] has shape {a.shape}, expected {(d, d)}")
    return np.hstack(blocks) if blocks else np.zeros((d, 0))


def _residual_rows(block, coef, p, d):
    e = block.rows(0)
    for k in range(1, p + 1):
        e = e - block.rows(-k) @ coef[:, (k - 1) * d:k * d].T
    return e


def conditional_loglik(series, ar, sigma_eps, layout=None) -> float:
    """Gaussian conditional log-likelihood of ``series`` given its first p rows."""
    series = as_series(series)
    p, d = len(ar), series.d
    if series.n <= p:
        raise DomainError(f"need n > p, got n={series.n}, p={p}")
    prec = _precision(sigma_eps, d)
    coef = _ar_stack(ar, d)

    def evaluate(block):
        e = _residual_rows(block, coef, p, d)
        return np.einsum("ti,ij,tj->t", e, prec, e)

    quad = resolve_engine(layout).run(series, WindowKernel(p, evaluate, "backward", "loglik"))
    n_terms = series.n - p
    _, logdet = np.linalg.slogdet(np.linalg.inv(prec))
    return float(-0.5 * n_terms * (d * LOG_2PI + logdet) - 0.5 * quad)


def conditional_loglik_grad(series, ar, sigma_eps, layout=None) -> list:
    """``[dL/dA_1, ..., dL/dA_p]`` evaluated as a backward window kernel."""
    series = as_series(series)
    p, d = len(ar), series.d
    if series.n <= p:
        raise DomainError(f"need n > p, got n={series.n}, p={p}")
    prec = _precision(sigma_eps, d)
    coef = _ar_stack(ar, d)

    def evaluate(block):
        pe = _residual_rows(block, coef, p, d) @ prec  # rows are (Pi e_t)^T
        return np.stack([np.einsum("ti,tj->tij", pe, block.rows(-k)) for k in range(1, p + 1)],
                        axis=1)

    total = resolve_engine(layout).run(series, WindowKernel(p, evaluate, "backward", "loglik-grad"))
    return [total[k] for k in range(p)]


@dataclass(frozen=True)
class LagMoments:
    """Sums over ``t = p..n-1`` of ``y y^T``, ``y z^T`` and ``z z^T`` with
    ``y = X_t`` and ``z = (X_{t-1}, ..., X_{t-p})``."""

    syy: np.ndarray
    syz: np.ndarray
    szz: np.ndarray
    n_terms: int


def lag_moments(series, p: int, layout=None) -> LagMoments:
    series = as_series(series)
    d = series.d
    if series.n <= p:
        raise DomainError(f"need n > p, got n={series.n}, p={p}")

    def evaluate(block):
        y = block.rows(0)
        z = np.hstack([block.rows(-k) for k in range(1, p + 1)]) if p else np.zeros((len(block), 0))
        w = np.hstack([y, z])
        return np.einsum("ti,tj->tij", w, w)

    total = resolve_engine(layout).run(series, WindowKernel(p, evaluate, "backward", "lag-moments"))
    return LagMoments(total[:d, :d], total[:d, d:], total[d:, d:], series.n - p)


def _objective(coef, prec, mom: LagMoments, logdet_sigma) -> float:
    d = prec.shape[0]
    resid = mom.syy - coef @ mom.syz.T - mom.syz @ coef.T + coef @ mom.szz @ coef.T
    return float(-0.5 * mom.n_terms * (d * LOG_2PI + logdet_sigma) - 0.5 * np.sum(prec * resid))


def two_over_m_plus_L(hessian_spectrum_min: float, hessian_spectrum_max: float) -> float:
    m, big_l = hessian_spectrum_min, hessian_spectrum_max
    if not m > 0:
        raise DomainError(f"smallest Hessian eigenvalue {m!r} is not positive: objective is not "
                          "strongly concave; add a ridge or use backtracking")
    if big_l < m:
        raise DomainError(f"need m <= L, got m={m}, L={big_l}")
    return 2.0 / (m + big_l)


def hessian_extremes(szz: np.ndarray, prec: np.ndarray) -> tuple:
    """Extreme eigenvalues of ``prec (x) szz``, the negated Hessian in ``vec(A)``."""
    ez = np.linalg.eigvalsh(szz)
    ep = np.linalg.eigvalsh(prec)
    return float(ez[0] * ep[0]), float(ez[-1] * ep[-1])


@dataclass
class AscentResult:
    x: np.ndarray
    iterations: int
    converged: bool
    objective: list = field(default_factory=list)


def gradient_ascent(x0, grad: Callable, objective: Callable, step_rule: str, n_terms: int,
                    opts: MleOptions, eta: float | None = None, mask=None,
                    callback: Callable | None = None) -> AscentResult:
    """Ascend a concave objective.

    ``eta`` is the step for the ``eigen`` and ``fixed`` rules and the initial
    trial step for backtracking. ``mask`` zeroes gradient entries outside the
    parameter support so iterates keep their sparsity pattern exactly.
    """
    x = np.array(x0, dtype=float)
    history = [objective(x)]
    decreases = 0
    for it in range(1, opts.max_iters + 1):
        g = grad(x)
        if mask is not None:
            g = np.where(mask, g, 0.0)
        if np.max(np.abs(g), initial=0.0) / n_terms < opts.grad_tol:
            return AscentResult(x, it - 1, True, history)
        if step_rule == "backtracking":
            gg = float(np.sum(g * g))
            step = eta
            f0 = history[-1]
            for _ in range(200):
                trial = x + step * g
                f1 = objective(trial)
                if f1 >= f0 + opts.backtrack_c * step * gg:
                    break
                step *= opts.backtrack_rho
            else:
                # no ascent step exists at working precision
                return AscentResult(x, it - 1, True, history)
            x = trial
            history.append(f1)
        else:
            x = x + eta * g
            history.append(objective(x))
            if step_rule == "fixed":
                decreases = decreases + 1 if history[-1] < history[-2] else 0
                if decreases >= 5:
                    raise StepSizeError(f"objective decreased for 5 consecutive steps with fixed "
                                        f"step {eta}; use backtracking or a smaller step")
        if callback is not None:
            callback(it, x)
    g = grad(x)
    if mask is not None:
        g = np.where(mask, g, 0.0)
    done = np.max(np.abs(g), initial=0.0) / n_terms < opts.grad_tol
    return AscentResult(x, opts.max_iters, bool(done), history)


def _step_for(rule, opts, szz, prec):
    if rule == "fixed":
        return opts.step
    m, big_l = hessian_extremes(szz, prec)
    if rule == "eigen":
        return two_over_m_plus_L(m, big_l)
    return opts.step if opts.step else 2.0 / max(big_l, np.finfo(float).tiny)


def _sgd(series: RegularSeries, p, prec, coef0, opts: MleOptions):
    x = series.values
    rng = np.random.default_rng(opts.seed)
    ts = rng.integers(p, series.n, size=opts.sgd_steps)
    coef = coef0.copy()
    for i, t in enumerate(ts):
        z = x[t - p:t][::-1].ravel()  # (X_{t-1}, ..., X_{t-p})
        e = x[t] - coef @ z
        coef += (opts.sgd_step0 / (1.0 + i)) * np.outer(prec @ e, z)
    return coef


def _split(coef, p, d):
    return [coef[:, k * d:(k + 1) * d].copy() for k in range(p)]


def fit_ar_mle(series, p: int, sigma_eps=None, opts: MleOptions | None = None,
               layout=None) -> ArmaModel:
    """Conditional maximum likelihood AR(p) fit by gradient ascent.

    With ``sigma_eps=None`` the precision starts at the identity and the
    fit alternates between ``A`` and the residual covariance for
    ``opts.rounds`` rounds; a supplied ``sigma_eps`` is held fixed.
    """
    series = as_series(series)
    opts = opts or MleOptions()
    d = series.d
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    if series.n <= p:
        raise DomainError(f"need n > p, got n={series.n}, p={p}")
    mom = lag_moments(series, p, layout)
    known = sigma_eps is not None
    prec = _precision(sigma_eps, d) if known else np.eye(d)

    if opts.init == "yule_walker":
        from .fit_freq import fit_ar_yule_walker
        from .moments import autocovariance_per_lag
        warm = fit_ar_yule_walker(autocovariance_per_lag(series, layout, p), p)
        coef = _ar_stack(warm.ar, d)
    else:
        coef = np.zeros((d, p * d))

    rounds = 1 if known else opts.rounds
    total_iters, converged, history = 0, True, []
    sigma = np.linalg.inv(prec)
    for _ in range(rounds):
        if opts.sgd:
            coef = _sgd(series, p, prec, coef, opts)
            converged = False
        else:
            logdet = np.linalg.slogdet(np.linalg.inv(prec))[1]
            eta = _step_for(opts.step_rule, opts, mom.szz, prec)
            res = gradient_ascent(
                coef,
                lambda c: prec @ (mom.syz - c @ mom.szz),
                lambda c: _objective(c, prec, mom, logdet),
                opts.step_rule, mom.n_terms, opts, eta=eta)
            coef, converged = res.x, res.converged
            total_iters += res.iterations
            history.extend(res.objective)
        if known:
            sigma = np.array(sigma_eps, dtype=float, ndmin=2)
        else:
            resid = mom.syy - coef @ mom.syz.T - mom.syz @ coef.T + coef @ mom.szz @ coef.T
            sigma = 0.5 * (resid + resid.T) / mom.n_terms
            prec = np.linalg.inv(sigma)

    info = {"converged": bool(converged), "iterations": total_iters, "objective": history}
    model = ArmaModel(_split(coef, p, d), [], sigma, method="mle" if not opts.sgd else "sgd",
                      info=info)
    warns = model_warnings(model) + (() if converged or opts.sgd else ("not_converged",))
    return model.replace(warnings=warns)


# --- banded high-dimensional AR(1) -------------------------------------------------


@dataclass(frozen=True)
class BandedArModel:
    """AR(1) ``X_{t+1} = A X_t + eps`` with ``A[i, j] = 0`` for ``|i - j| > b``.

    ``diagonals[b + k, i]`` holds ``A[i, i + k]`` for ``-b <= k <= b``.
    The noise precision is block diagonal over the contiguous ``ranges``.
    """

    d: int
    bandwidth: int
    diagonals: np.ndarray
    ranges: tuple
    precision: tuple
    info: dict = field(default_factory=dict)

    @classmethod
    def from_dense(cls, a, bandwidth, ranges, precision=None, **kw) -> "BandedArModel":
        a = np.asarray(a, dtype=float)
        d = a.shape[0]
        diag = np.zeros((2 * bandwidth + 1, d))
        for k in range(-bandwidth, bandwidth + 1):
            rows = np.arange(max(0, -k), min(d, d - k))
            diag[bandwidth + k, rows] = a[rows, rows + k]
        ranges = tuple((int(lo), int(hi)) for lo, hi in ranges)
        if precision is None:
            precision = tuple(np.eye(hi - lo) for lo, hi in ranges)
        return cls(d, bandwidth, diag, ranges, tuple(np.asarray(pi, float) for pi in precision), **kw)

    def dense(self) -> np.ndarray:
        a = np.zeros((self.d, self.d))
        b = self.bandwidth
        for k in range(-b, b + 1):
            rows = np.arange(max(0, -k), min(self.d, self.d - k))
            a[rows, rows + k] = self.diagonals[b + k, rows]
        return a

    def precision_dense(self) -> np.ndarray:
        out = np.zeros((self.d, self.d))
        for (lo, hi), pi in zip(self.ranges, self.precision):
            out[lo:hi, lo:hi] = pi
        return out


def band_mask(rows: tuple, cols: tuple, bandwidth: int) -> np.ndarray:
    r = np.arange(*rows)[:, None]
    c = np.arange(*cols)[None, :]
    return np.abs(r - c) <= bandwidth


def spatial_ranges(d: int, spatial_partitions) -> list:
    if isinstance(spatial_partitions, (int, np.integer)):
        return OverlapLayout(d, int(spatial_partitions), 0).owned_ranges()
    return [(int(a), int(b)) for a, b in spatial_partitions]


def spatial_partition(series, bandwidth: int, spatial_partitions) -> list:
    """Partition the dimension axis; each block carries ``bandwidth`` halo columns.

    Partition ``i`` holds ``X^{P_i+}_t`` for every ``t`` as a
    ``(|P_i+|, n)`` array (dimensions play the role of rows).
    """
    series = as_series(series)
    if not 0 <= bandwidth < series.d:
        raise DomainError(f"bandwidth must satisfy 0 <= b < d={series.d}, got {bandwidth}")
    ranges = spatial_ranges(series.d, spatial_partitions)
    return partition_at(RegularSeries(series.values.T), ranges, bandwidth)


@dataclass(frozen=True)
class _BlockStats:
    rows: tuple
    cols: tuple
    syy: np.ndarray
    syz: np.ndarray
    szz: np.ndarray
    mask: np.ndarray


def _block_stats(part, bandwidth) -> _BlockStats:
    lo, hi = part.owned_range
    cols = (max(0, lo - bandwidth), min(part.n_total, hi + bandwidth))
    halo = part.read(*cols)  # (|P_i+|, n), local columns only
    own = halo[lo - cols[0]:hi - cols[0]]
    y, z = own[:, 1:], halo[:, :-1]
    return _BlockStats((lo, hi), cols, y @ y.T, y @ z.T, z @ z.T,
                       band_mask((lo, hi), cols, bandwidth))


def _check_precision(precision, ranges):
    out = []
    for i, ((lo, hi), pi) in enumerate(zip(ranges, precision)):
        pi = np.array(pi, dtype=float, ndmin=2)
        if pi.shape != (hi - lo, hi - lo):
            raise DomainError(f"precision block {i} has shape {pi.shape}, expected {(hi - lo,) * 2}")
        if np.max(np.abs(pi - pi.T)) > 1e-12 or np.linalg.eigvalsh(pi).min() <= 0:
            raise DomainError(f"precision block {i} is not symmetric positive definite")
        out.append(pi)
    if len(out) != len(ranges):
        raise DomainError(f"got {len(out)} precision blocks for {len(ranges)} partitions")
    return out


def banded_loglik_grad(series, a, bandwidth: int, spatial_partitions, precision=None,
                       max_workers=None, parts=None) -> np.ndarray:
    """Band-restricted gradient of the AR(1) conditional log-likelihood.

    Partition ``i`` contributes the rows ``P_i`` using only its halo columns.
    """
    series = as_series(series)
    parts = parts or spatial_partition(series, bandwidth, spatial_partitions)
    ranges = [p.owned_range for p in parts]
    precision = _check_precision(precision or [np.eye(hi - lo) for lo, hi in ranges], ranges)
    a = np.asarray(a, dtype=float)

    def local(part):
        st = _block_stats(part, bandwidth)
        ai = np.where(st.mask, a[slice(*st.rows), slice(*st.cols)], 0.0)
        g = precision[part.partition_id] @ (st.syz - ai @ st.szz)
        return st, np.where(st.mask, g, 0.0)

    out = np.zeros((series.d, series.d))
    for st, g in map_partitions(parts, local, max_workers):
        out[slice(*st.rows), slice(*st.cols)] = g
    return out


def fit_banded_ar(series, bandwidth: int, spatial_partitions=4, opts: MleOptions | None = None,
                  precision=None, max_workers=None, parts=None,
                  callback: Callable | None = None) -> BandedArModel:
    """Band-restricted conditional MLE of an AR(1) with block-diagonal precision.

    Each spatial partition reads only its halo columns, builds its local
    moment sums once and runs its own gradient ascent; the partitions never
    exchange data. Without ``precision`` the blocks start at the identity and
    are re-estimated from residuals for ``opts.rounds`` rounds.
    ``callback(partition_id, iteration, block)`` sees every iterate.
    """
    series = as_series(series)
    opts = opts or MleOptions()
    if opts.sgd:
        raise DomainError("fit_banded_ar supports full-batch rules only")
    if series.n < 2:
        raise DomainError("need at least two time steps")
    parts = parts or spatial_partition(series, bandwidth, spatial_partitions)
    ranges = [p.owned_range for p in parts]
    known = precision is not None
    precision = _check_precision(precision, ranges) if known else [np.eye(hi - lo) for lo, hi in ranges]
    rounds = 1 if known else opts.rounds
    n_terms = series.n - 1

    def local(part):
        st = _block_stats(part, bandwidth)
        pi = precision[part.partition_id]
        ai = np.zeros(st.mask.shape)
        iters, converged = 0, True
        for _ in range(rounds):
            logdet = -np.linalg.slogdet(pi)[1]

            def objective(c, pi=pi, logdet=logdet):
                resid = st.syy - c @ st.syz.T - st.syz @ c.T + c @ st.szz @ c.T
                k = pi.shape[0]
                return float(-0.5 * n_terms * (k * LOG_2PI + logdet) - 0.5 * np.sum(pi * resid))

            eta = _step_for(opts.step_rule, opts, st.szz, pi)
            cb = None if callback is None else (lambda it, x: callback(part.partition_id, it, x))
            res = gradient_ascent(ai, lambda c, pi=pi: pi @ (st.syz - c @ st.szz), objective,
                                  opts.step_rule, n_terms, opts, eta=eta, mask=st.mask, callback=cb)
            ai, iters, converged = res.x, iters + res.iterations, converged and res.converged
            if not known:
                resid = st.syy - ai @ st.syz.T - st.syz @ ai.T + ai @ st.szz @ ai.T
                pi = np.linalg.inv(0.5 * (resid + resid.T) / n_terms)
        return st, ai, pi, iters, converged

    results = map_partitions(parts, local, max_workers)
    a = np.zeros((series.d, series.d))
    precs, iters, converged = [], 0, True
    for st, ai, pi, it, conv in results:
        a[slice(*st.rows), slice(*st.cols)] = ai
        precs.append(pi)
        iters = max(iters, it)
        converged = converged and conv
    info = {"converged": converged, "iterations": iters}
    return BandedArModel.from_dense(a, bandwidth, ranges, precs, info=info)


def banded_predict(model: BandedArModel, x_t) -> np.ndarray:
    """One-step prediction ``A x_t`` computed block row by block row."""
    x = np.asarray(x_t, dtype=float)
    if x.shape != (model.d,):
        raise DomainError(f"x_t has shape {x.shape}, expected ({model.d},)")
    b = model.bandwidth
    out = np.empty(model.d)
    for lo, hi in model.ranges:
        cols = (max(0, lo - b), min(model.d, hi + b))
        block = np.zeros((hi - lo, cols[1] - cols[0]))
        for k in range(-b, b + 1):
            r = np.arange(lo, hi)
            c = r + k
            ok = (c >= cols[0]) & (c < cols[1]) & (c >= 0) & (c < model.d)
            block[r[ok] - lo, c[ok] - cols[0]] = model.diagonals[b + k, r[ok]]
        out[lo:hi] = block @ x[cols[0]:cols[1]]
    return out
