"""Dense block-Toeplitz assembly and condition-checked solves."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import SingularMomentMatrixError

COND_LIMIT = 1e12


def block_toeplitz(block, p: int, d: int) -> np.ndarray:
    """``(p*d, p*d)`` matrix whose block ``(i, j)`` is ``block(i - j)``."""
    mat = np.empty((p * d, p * d))
    for i in range(p):
        for j in range(p):
            mat[i * d:(i + 1) * d, j * d:(j + 1) * d] = block(i - j)
    return mat


def solve_checked(mat: np.ndarray, rhs: np.ndarray, order=None, what="moment matrix") -> np.ndarray:
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMomentMatrixError(
            f"{what} of order {order} is singular or ill-conditioned (cond={cond:.3g})",
            order=order, condition=cond)
    try:
        return scipy.linalg.solve(mat, rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularMomentMatrixError(f"{what} of order {order} is singular",
                                        order=order, condition=cond) from exc
