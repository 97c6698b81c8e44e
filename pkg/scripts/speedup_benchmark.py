"""Wall-time scaling of the joint autocovariance kernel with worker count.

    python3 scripts/speedup_benchmark.py --n 10000000 --max-lag 10 --workers 1 2 4
"""

import argparse
import os
import time

import numpy as np

from tsfit.moments import autocovariance_joint
from tsfit.overlap import Engine


def bench(series, h_max, workers, deterministic, repeats):
    engine = Engine(partitions=workers, threads=workers, deterministic=deterministic)
    autocovariance_joint(series[: min(len(series), 100_000)], engine, h_max)
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        autocovariance_joint(series, engine, h_max)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10_000_000)
    ap.add_argument("--d", type=int, default=1)
    ap.add_argument("--max-lag", type=int, default=10)
    ap.add_argument("--workers", type=int, nargs="+", default=[1, 2, 4])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--deterministic", action="store_true", help="time the exact-sum reduction")
    args = ap.parse_args()

    series = np.random.default_rng(0).normal(size=(args.n, args.d))
    print(f"n={args.n} d={args.d} H={args.max_lag} cpus={os.cpu_count()} "
          f"mode={'exact' if args.deterministic else 'float'}")
    base = None
    for w in args.workers:
        t = bench(series, args.max_lag, w, args.deterministic, args.repeats)
        base = base or t
        print(f"workers={w:>3}  {t:8.3f}s  relative={t / base:5.2f}")


if __name__ == "__main__":
    main()
