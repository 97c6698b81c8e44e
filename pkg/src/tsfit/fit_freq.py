"""Moment-based fits: Yule-Walker, Durbin-Levinson, innovations, MA and ARMA."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ArmaModel, LaggedCovariance, model_warnings
from .errors import DegeneracyError, DomainError
from .linalg import COND_LIMIT, block_toeplitz, solve_checked

MA_EXTRA_DEPTH = 20


@dataclass(frozen=True)
class InnovationState:
    """Innovation coefficients ``theta[m][j - 1] = Theta_{m,j}`` and
    prediction covariances ``sigma[m] = Sigma_m``."""

    theta: tuple  # theta[m] is an (m, d, d) array; theta[0] is empty
    sigma: np.ndarray  # (m_max + 1, d, d)

    @property
    def m_max(self) -> int:
        return self.sigma.shape[0] - 1

    @property
    def d(self) -> int:
        return self.sigma.shape[1]

    def coef(self, m: int, j: int) -> np.ndarray:
        """``Theta_{m,j}`` for ``1 <= j <= m``."""
        return self.theta[m][j - 1]


def _symmetrize(mat):
    return 0.5 * (mat + mat.T)


def _finish(model: ArmaModel) -> ArmaModel:
    return model.replace(warnings=model_warnings(model))


def fit_ar_yule_walker(cov: LaggedCovariance, p: int) -> ArmaModel:
    if p < 0 or p > cov.h_max:
        raise DomainError(f"need 0 <= p <= h_max={cov.h_max}, got {p}")
    d = cov.d
    if p == 0:
        return ArmaModel([], [], _symmetrize(cov.at(0)), method="yule_walker")
    mat = block_toeplitz(cov.at, p, d)
    rhs = np.vstack([cov.at(h) for h in range(1, p + 1)])
    sol = solve_checked(mat, rhs, order=p, what="Yule-Walker system")
    ar = [sol[k * d:(k + 1) * d].T for k in range(p)]
    # E[eps_t X_t^T] = gamma(0) - sum_k A_k E[X_{t-k} X_t^T] = gamma(0) - sum_k A_k gamma(k)
    sigma = cov.at(0) - sum(a @ cov.at(k) for k, a in enumerate(ar, start=1))
    return _finish(ArmaModel(ar, [], _symmetrize(sigma), method="yule_walker"))


def durbin_levinson(gamma: np.ndarray, p: int):
    """Levinson recursion on a scalar autocovariance sequence.

    Returns ``(phi, reflection, variances)`` where ``phi`` holds the order-p
    coefficients, ``reflection[k-1]`` the order-k partial autocorrelation and
    ``variances[k]`` the order-k one-step prediction variance.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma[0] <= 0:
        raise DegeneracyError(f"gamma(0) = {gamma[0]!r} is not positive", step=0)
    phi = np.zeros(p)
    refl = np.zeros(p)
    v = np.empty(p + 1)
    v[0] = gamma[0]
    for k in range(1, p + 1):
        a = (gamma[k] - phi[:k - 1] @ gamma[k - 1:0:-1]) / v[k - 1]
        if k > 1:
            phi[:k - 1] = phi[:k - 1] - a * phi[k - 2::-1]
        phi[k - 1] = a
        refl[k - 1] = a
        v[k] = v[k - 1] * (1.0 - a * a)
        if not v[k] > 0:
            raise DegeneracyError(f"prediction variance became non-positive at order {k}", step=k)
    return phi, refl, v


def fit_ar_durbin_levinson(cov: LaggedCovariance, p: int) -> ArmaModel:
    if cov.d != 1:
        raise DomainError(f"Durbin-Levinson is univariate, got d={cov.d}")
    if p < 0 or p > cov.h_max:
        raise DomainError(f"need 0 <= p <= h_max={cov.h_max}, got {p}")
    phi, refl, v = durbin_levinson(cov.gamma[:, 0, 0], p)
    model = ArmaModel([[[c]] for c in phi], [], [[v[p]]], method="durbin_levinson",
                      info={"pacf": refl.tolist()})
    return _finish(model)


def innovations(cov: LaggedCovariance, m_max: int) -> InnovationState:
    """Multivariate innovations recursion.

    ``Theta_{m,m-j} = [gamma(j-m) - sum_{i<j} Theta_{m,m-i} Sigma_i Theta_{j,j-i}^T] Sigma_j^{-1}``
    and ``Sigma_m = gamma(0) - sum_{i<m} Theta_{m,m-i} Sigma_i Theta_{m,m-i}^T``.
    """
    if m_max < 0 or m_max > cov.h_max:
        raise DomainError(f"need 0 <= m_max <= h_max={cov.h_max}, got {m_max}")
    d = cov.d
    sigma = np.empty((m_max + 1, d, d))
    sigma[0] = cov.at(0)
    sigma_inv = [None] * (m_max + 1)
    theta = [np.zeros((0, d, d))]

    def invert(j):
        cond = np.linalg.cond(sigma[j])
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise DegeneracyError(f"innovation covariance Sigma_{j} is singular (cond={cond:.3g})",
                                  step=j, condition=cond)
        sigma_inv[j] = np.linalg.inv(sigma[j])

    for m in range(1, m_max + 1):
        invert(m - 1)
        th = np.zeros((m, d, d))  # th[k - 1] = Theta_{m,k}
        for j in range(m):
            acc = cov.at(j - m).copy()
            for i in range(j):
                acc -= th[m - i - 1] @ sigma[i] @ theta[j][j - i - 1].T
            th[m - j - 1] = acc @ sigma_inv[j]
        s = cov.at(0).copy()
        for i in range(m):
            s -= th[m - i - 1] @ sigma[i] @ th[m - i - 1].T
        sigma[m] = _symmetrize(s)
        theta.append(th)
    return InnovationState(tuple(theta), sigma)


def fit_ma(cov: LaggedCovariance, q: int, m: int | None = None) -> ArmaModel:
    if m is None:
        m = q + MA_EXTRA_DEPTH
    if q < 0 or m < q:
        raise DomainError(f"need 0 <= q <= m, got q={q}, m={m}")
    state = innovations(cov, m)
    ma = [state.coef(m, j) for j in range(1, q + 1)]
    model = ArmaModel([], ma, state.sigma[m], method="innovations", info={"m_depth": m})
    return _finish(model)


def fit_arma(cov: LaggedCovariance, p: int, q: int, m: int | None = None) -> ArmaModel:
    """ARMA fit from innovation coefficients taken as psi-weight estimates.

    The AR part solves ``Psi_j = sum_{i<=p} A_i Psi_{j-i}`` for
    ``j = q+1..q+p`` (``Psi_0 = I``, ``Psi_j = 0`` for ``j < 0``); the MA
    part follows by back-substitution.
    """
    if m is None:
        m = p + q + MA_EXTRA_DEPTH
    if p < 0 or q < 0 or m < p + q:
        raise DomainError(f"need p, q >= 0 and m >= p + q, got p={p}, q={q}, m={m}")
    d = cov.d
    state = innovations(cov, m)

    def psi(j):
        if j < 0:
            return np.zeros((d, d))
        if j == 0:
            return np.eye(d)
        return state.coef(m, j)

    ar = []
    if p:
        # transposed rows: Psi_j^T = sum_i Psi_{j-i}^T A_i^T; block (r, c) = Psi_{q+r-c}^T
        mat = block_toeplitz(lambda k: psi(q + k).T, p, d)
        rhs = np.vstack([psi(q + r).T for r in range(1, p + 1)])
        sol = solve_checked(mat, rhs, order=p, what="psi-weight system")
        ar = [sol[k * d:(k + 1) * d].T for k in range(p)]
    ma = []
    for j in range(1, q + 1):
        b = psi(j).copy()
        for i in range(1, min(j, p) + 1):
            b -= ar[i - 1] @ psi(j - i)
        ma.append(b)
    model = ArmaModel(ar, ma, state.sigma[m], method="arma_hybrid", info={"m_depth": m})
    return _finish(model)
