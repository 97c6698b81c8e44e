"""Overlapping-block partitions and the map-reduce engine for window kernels.

A series of ``n`` rows is cut into ``k`` contiguous owned ranges; each
partition additionally holds a private copy of ``padding`` rows on each side.
Any kernel that reads at most ``padding`` steps away from its center can
then be evaluated on every owned center using local rows only, and the
per-partition results are combined with an associative operation.

Kernels are evaluated a block of centers at a time. A kernel receives a
:class:`CenterBlock` and asks it for ``rows(offset)`` (the rows ``X_{t+offset}``
for every center ``t`` of the block). The block serves these from the
partition's local copy. A read that falls outside the local copy is
refused: it is counted on the partition's access log and the requested
rows come back as NaN, never as the remote data.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .core import RegularSeries, as_series
from .errors import ContractViolation, DomainError
from .exact import ExactSum

POLICIES = ("interior", "backward", "forward", "clipped")
DEFAULT_CHUNK = 1 << 16


def default_threads() -> int:
    env = os.environ.get("TSFIT_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise DomainError(f"TSFIT_THREADS must be an integer, got {env!r}") from None
        if value >= 1:
            return value
    return os.cpu_count() or 1


@dataclass(frozen=True)
class OverlapLayout:
    n: int
    num_partitions: int
    padding: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"layout needs n >= 1, got {self.n}")
        if not 1 <= self.num_partitions <= self.n:
            raise DomainError(f"need 1 <= k <= n, got k={self.num_partitions}, n={self.n}")
        if self.padding < 0:
            raise DomainError(f"padding must be non-negative, got {self.padding}")

    def owned_ranges(self) -> list:
        base, extra = divmod(self.n, self.num_partitions)
        ranges, start = [], 0
        for i in range(self.num_partitions):
            stop = start + base + (1 if i < extra else 0)
            ranges.append((start, stop))
            start = stop
        return ranges

    def padded_range(self, owned) -> tuple:
        a, b = owned
        return (max(0, a - self.padding), min(self.n, b + self.padding))


class AccessLog:
    """Per-partition instrumentation; touched only by the partition's worker."""

    def __init__(self):
        self._lock = threading.Lock()
        self.refused = 0
        self.evaluations = 0

    def add(self, refused=0, evaluations=0):
        with self._lock:
            self.refused += refused
            self.evaluations += evaluations

    def reset(self):
        with self._lock:
            self.refused = 0
            self.evaluations = 0


@dataclass(frozen=True, eq=False)
class Partition:
    partition_id: int
    owned_range: tuple
    padded_range: tuple
    data: np.ndarray
    n_total: int
    log: AccessLog = field(default_factory=AccessLog, compare=False, repr=False)

    @property
    def padding_before(self) -> int:
        return self.owned_range[0] - self.padded_range[0]

    @property
    def padding_after(self) -> int:
        return self.padded_range[1] - self.owned_range[1]

    def read(self, lo: int, hi: int, fill_absent: float = 0.0) -> np.ndarray:
        """Rows ``[lo, hi)`` in global indices, served from local data only.

        Indices outside ``[0, n_total)`` do not exist anywhere and are filled
        with ``fill_absent``. Indices inside the series but outside the padded
        range are refused reads: counted, and returned as NaN.
        """
        out = np.empty((hi - lo, self.data.shape[1]))
        pa, pb = self.padded_range
        idx = np.arange(lo, hi)
        local = (idx >= pa) & (idx < pb)
        absent = (idx < 0) | (idx >= self.n_total)
        remote = ~local & ~absent
        s, e = max(lo, pa), min(hi, pb)
        if e > s:
            out[s - lo:e - lo] = self.data[s - pa:e - pa]
        out[absent] = fill_absent
        if remote.any():
            out[remote] = np.nan
            self.log.add(refused=int(remote.sum()))
        return out


def partition(series, k: int, padding: int) -> list:
    """Split ``series`` into ``k`` near-equal owned blocks padded by ``padding`` rows."""
    series = as_series(series)
    layout = OverlapLayout(series.n, k, padding)
    return partition_at(series, layout.owned_ranges(), padding)


def partition_at(series, ranges, padding: int) -> list:
    """Like :func:`partition` but with caller-chosen owned ranges.

    ``ranges`` must tile ``[0, n)`` with contiguous, ordered, non-empty blocks.
    """
    series = as_series(series)
    ranges = [(int(a), int(b)) for a, b in ranges]
    if not ranges or ranges[0][0] != 0 or ranges[-1][1] != series.n:
        raise DomainError(f"ranges {ranges} do not cover [0, {series.n})")
    for (a, b), (c, _) in zip(ranges, ranges[1:] + [(series.n, None)]):
        if b <= a or b != c:
            raise DomainError(f"ranges {ranges} are not contiguous non-empty blocks")
    if padding < 0:
        raise DomainError(f"padding must be non-negative, got {padding}")
    parts = []
    for i, (a, b) in enumerate(ranges):
        pa, pb = max(0, a - padding), min(series.n, b + padding)
        data = series.values[pa:pb].copy()
        data.flags.writeable = False
        parts.append(Partition(i, (a, b), (pa, pb), data, series.n))
    return parts


def communication_counter(partitions: Sequence[Partition]) -> int:
    """Number of refused (cross-partition) row requests recorded so far."""
    return sum(p.log.refused for p in partitions)


def kernel_evaluations(partitions: Sequence[Partition]) -> int:
    return sum(p.log.evaluations for p in partitions)


def reset_counters(partitions: Sequence[Partition]) -> None:
    for p in partitions:
        p.log.reset()


class CenterBlock:
    """A contiguous run of centers ``[lo, hi)`` inside one partition."""

    def __init__(self, part: Partition, lo: int, hi: int):
        self.partition = part
        self.lo = lo
        self.hi = hi

    @property
    def centers(self) -> np.ndarray:
        return np.arange(self.lo, self.hi)

    def __len__(self):
        return self.hi - self.lo

    def rows(self, offset: int) -> np.ndarray:
        """``X_{t+offset}`` for every center ``t``, shape ``(len(self), d)``."""
        return self.partition.read(self.lo + offset, self.hi + offset)


@dataclass(frozen=True)
class WindowKernel:
    """Kernel reading at most ``half_width`` steps around each center.

    ``evaluate`` maps a :class:`CenterBlock` to an array of per-center terms
    whose leading axis runs over the block's centers in ascending order.

    Policies fix which centers are admitted:

    ``interior``  ``[H, n - H)``, window ``[t - H, t + H]``
    ``backward``  ``[H, n)``, window ``[t - H, t]``
    ``forward``   ``[0, n - H)``, window ``[t, t + H]``
    ``clipped``   ``[0, n)``, window clipped to the series
    """

    half_width: int
    evaluate: Callable[[CenterBlock], np.ndarray]
    policy: str = "interior"
    name: str = "kernel"

    def __post_init__(self):
        if self.half_width < 0:
            raise DomainError(f"half_width must be non-negative, got {self.half_width}")
        if self.policy not in POLICIES:
            raise DomainError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")

    def admitted(self, n: int) -> tuple:
        h = self.half_width
        lo = h if self.policy in ("interior", "backward") else 0
        hi = n - h if self.policy in ("interior", "forward") else n
        return lo, max(lo, hi)

    def reach(self) -> tuple:
        """Steps read (before, after) the center."""
        h = self.half_width
        return {"interior": (h, h), "backward": (h, 0),
                "forward": (0, h), "clipped": (h, h)}[self.policy]


@dataclass(frozen=True)
class Monoid:
    """Associative ``combine`` with ``identity``.

    ``lift`` reduces an ordered array of per-center terms to one accumulator;
    when absent, terms are folded one by one with ``combine``. ``finalize``
    turns the final accumulator into the user-facing value.
    """

    identity: Any
    combine: Callable[[Any, Any], Any]
    lift: Callable[[np.ndarray], Any] | None = None
    finalize: Callable[[Any], Any] | None = None

    def reduce_terms(self, acc, terms):
        if self.lift is not None:
            return self.combine(acc, self.lift(terms))
        for term in terms:
            acc = self.combine(acc, term)
        return acc


def _exact_combine(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _exact_finalize(acc):
    return None if acc is None else acc.to_float()


EXACT_SUM = Monoid(None, _exact_combine, ExactSum.of_terms, _exact_finalize)
FLOAT_SUM = Monoid(0.0, lambda a, b: a + b, lambda terms: np.sum(terms, axis=0))


def _check_contract(partitions, kernel):
    before, after = kernel.reach()
    n = partitions[0].n_total
    for p in partitions:
        a, b = p.owned_range
        lo, hi = kernel.admitted(n)
        lo, hi = max(a, lo), min(b, hi)
        if hi <= lo:
            continue
        need_lo = max(0, lo - before)
        need_hi = min(n, hi + after)
        if need_lo < p.padded_range[0] or need_hi > p.padded_range[1]:
            raise ContractViolation(
                f"kernel {kernel.name!r} reads {kernel.half_width} steps but partition "
                f"{p.partition_id} holds padding {p.padding_before}/{p.padding_after}; "
                "the estimator is not weak-memory of this order for the layout")


def _run_partition(part, kernel, monoid, chunk):
    n = part.n_total
    lo, hi = kernel.admitted(n)
    lo, hi = max(part.owned_range[0], lo), min(part.owned_range[1], hi)
    acc = monoid.identity
    evaluated = 0
    for start in range(lo, hi, chunk):
        stop = min(hi, start + chunk)
        terms = kernel.evaluate(CenterBlock(part, start, stop))
        acc = monoid.reduce_terms(acc, terms)
        evaluated += stop - start
    part.log.add(evaluations=evaluated)
    return acc


def map_partitions(partitions: Sequence[Partition], fn: Callable[[Partition], Any],
                   max_workers: int | None = None, ordered: bool = True) -> list:
    """Apply ``fn`` to every partition on a worker pool.

    Returns results in partition order when ``ordered``, else in completion order.
    """
    workers = min(max_workers or default_threads(), len(partitions))
    if workers <= 1:
        return [fn(p) for p in partitions]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, p) for p in partitions]
        if ordered:
            return [f.result() for f in futures]
        return [f.result() for f in as_completed(futures)]


def map_reduce(partitions: Sequence[Partition], kernel: WindowKernel, monoid: Monoid | None = None,
               deterministic: bool = True, check_contract: bool = True,
               max_workers: int | None = None, chunk: int = DEFAULT_CHUNK):
    """Evaluate ``kernel`` on every admitted center and reduce with ``monoid``.

    With the default monoid, ``deterministic=True`` sums exactly (the result
    is bit-identical for any partitioning); ``deterministic=False`` uses
    plain float sums combined in completion order.
    """
    if not partitions:
        raise DomainError("map_reduce needs at least one partition")
    if check_contract:
        _check_contract(partitions, kernel)
    if monoid is None:
        monoid = EXACT_SUM if deterministic else FLOAT_SUM
    results = map_partitions(partitions, lambda p: _run_partition(p, kernel, monoid, chunk),
                             max_workers=max_workers, ordered=deterministic)
    acc = monoid.identity
    for r in results:
        acc = monoid.combine(acc, r)
    return monoid.finalize(acc) if monoid.finalize is not None else acc


@dataclass(frozen=True)
class Engine:
    """Execution settings threaded through the estimators."""

    partitions: int | None = None
    threads: int | None = None
    deterministic: bool = True
    trace: list | None = field(default=None, compare=False, repr=False)  # collects partitions per run

    def split(self, series: RegularSeries, padding: int) -> list:
        k = self.partitions or self.threads or default_threads()
        parts = partition(series, min(k, series.n), padding)
        if self.trace is not None:
            self.trace.extend(parts)
        return parts

    def run(self, series: RegularSeries, kernel: WindowKernel, monoid: Monoid | None = None):
        parts = self.split(series, kernel.half_width)
        return map_reduce(parts, kernel, monoid, deterministic=self.deterministic,
                          max_workers=self.threads)


DEFAULT_ENGINE = Engine()


def resolve_engine(layout) -> Engine:
    """Accept an Engine, a partition count, an OverlapLayout or None."""
    if layout is None:
        return DEFAULT_ENGINE
    if isinstance(layout, Engine):
        return layout
    if isinstance(layout, OverlapLayout):
        return Engine(partitions=layout.num_partitions)
    if isinstance(layout, (int, np.integer)):
        return Engine(partitions=int(layout))
    raise DomainError(f"cannot interpret {layout!r} as an execution layout")
