"""Order-independent (error-free) floating point summation.

Every finite double is an integer multiple of ``2**-1074``, so a sum of
doubles can be held exactly as a Python integer scaled by ``2**-SCALE``.
Integer addition is associative, which makes the accumulator a true monoid:
partial sums formed over any partitioning of the terms combine to the same
value, and the final conversion rounds that value once (correctly) to
double precision.

The bulk work stays in numpy: each term is split into exponent and a 53-bit
integer mantissa; mantissas sharing an (entry, exponent) bin are summed in
float64, which is exact while bin totals stay below ``2**53``. Columns holding
NaN or infinities fall back to a plain float sum, as ``np.sum`` would give.
"""

from __future__ import annotations

import numpy as np


SCALE = 1126
_DENOM = 1 << SCALE
_LO_BITS = 26
_LO_MASK = (1 << _LO_BITS) - 1
# |hi| <= 2**27, so 2**25 rows per bincount keep bin totals below 2**53
_MAX_ROWS = 1 << 25



def _add(a, b):
    # non-finite columns are carried as plain floats and absorb finite parts
    if isinstance(a, float) or isinstance(b, float):
        return (a if isinstance(a, float) else 0.0) + (b if isinstance(b, float) else 0.0)
    return a + b


def _scalar_to_float(v):
    return v if isinstance(v, float) else v / _DENOM


_add_elementwise = np.frompyfunc(_add, 2, 1)
_to_float = np.frompyfunc(_scalar_to_float, 1, 1)


class ExactSum:
    """Exact sum of an array-shaped collection of doubles."""

    __slots__ = ("ints",)

    def __init__(self, ints: np.ndarray):
        self.ints = ints

    @classmethod
    def zeros(cls, shape) -> "ExactSum":
        ints = np.empty(shape, dtype=object)
        ints.fill(0)
        return cls(ints)

    @classmethod
    def of_terms(cls, terms) -> "ExactSum":
        """Exactly sum ``terms`` over axis 0."""
        terms = np.asarray(terms, dtype=float)
        shape = terms.shape[1:]
        flat = terms.reshape(terms.shape[0], -1)
        total = np.empty(flat.shape[1], dtype=object)
        total.fill(0)
        for lo in range(0, flat.shape[0], _MAX_ROWS):
            total = _add_elementwise(total, _column_sums(flat[lo:lo + _MAX_ROWS]))
        return cls(total.reshape(shape))

    @property
    def shape(self):
        return self.ints.shape

    def __add__(self, other: "ExactSum") -> "ExactSum":
        if self.ints.shape != other.ints.shape:
            raise ValueError(f"shape mismatch {self.ints.shape} vs {other.ints.shape}")
        return ExactSum(np.asarray(_add_elementwise(self.ints, other.ints), dtype=object))

    def to_float(self) -> np.ndarray:
        return np.asarray(_to_float(self.ints), dtype=float)


def _column_sums(flat: np.ndarray) -> np.ndarray:
    n_rows, n_cols = flat.shape
    total = np.empty(n_cols, dtype=object)
    total.fill(0)
    if n_rows == 0 or n_cols == 0:
        return total
    finite = np.isfinite(flat)
    if not finite.all():
        bad = np.flatnonzero(~finite.all(axis=0))
        for j, v in zip(bad, np.sum(flat[:, bad], axis=0)):
            total[j] = float(v)
        flat = np.where(finite, flat, 0.0)
        flat[:, bad] = 0.0
    mant, expo = np.frexp(flat)
    ints = (mant * 2.0 ** 53).astype(np.int64)
    hi = (ints >> _LO_BITS).astype(np.float64)
    lo = (ints & _LO_MASK).astype(np.float64)
    emin = int(expo.min())
    erange = int(expo.max()) - emin + 1
    keys = (np.arange(n_cols)[None, :] * erange + (expo - emin)).ravel()
    nbins = n_cols * erange
    hi_sum = np.bincount(keys, weights=hi.ravel(), minlength=nbins).reshape(n_cols, erange)
    lo_sum = np.bincount(keys, weights=lo.ravel(), minlength=nbins).reshape(n_cols, erange)
    used = np.flatnonzero(np.any(hi_sum != 0, axis=0) | np.any(lo_sum != 0, axis=0))
    for e_idx in used:
        h = hi_sum[:, e_idx].astype(np.int64).astype(object)
        l = lo_sum[:, e_idx].astype(np.int64).astype(object)
        # value = mantissa_int * 2**(e - 53) = mantissa_int << (e - 53 + SCALE) units
        shift = int(e_idx) + emin - 53 + SCALE
        total += ((h << _LO_BITS) + l) << shift
    return total


def exact_total(terms) -> np.ndarray:
    """Correctly rounded sum of ``terms`` over axis 0."""
    return ExactSum.of_terms(terms).to_float()
