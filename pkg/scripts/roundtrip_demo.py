"""Simulate known models, refit them with every estimator and print the errors."""

import argparse

import numpy as np

from tsfit.core import ArmaModel, simulate
from tsfit.fit_freq import fit_ar_durbin_levinson, fit_ar_yule_walker, fit_arma, fit_ma
from tsfit.fit_mle import MleOptions, band_mask, fit_ar_mle, fit_banded_ar
from tsfit.moments import autocovariance_per_lag, center, mean


def coef_error(fit, truth):
    blocks = list(zip(fit.ar, truth.ar)) + list(zip(fit.ma, truth.ma))
    return max(float(np.abs(a - b).max()) for a, b in blocks)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--partitions", type=int, default=4)
    args = ap.parse_args()
    k = args.partitions

    ar2 = ArmaModel([np.array([[0.5, 0.1], [0.0, 0.4]]), np.array([[0.2, 0.0], [0.05, 0.1]])], [],
                    np.eye(2))
    ma1 = ArmaModel([], [np.array([[0.4, 0.1], [0.0, 0.3]])], np.eye(2))
    arma11 = ArmaModel([[[0.5]]], [[[0.2]]], [[1.0]])
    ar3 = ArmaModel([[[0.6]], [[-0.3]], [[0.1]]], [], [[1.0]])

    rows = []
    s = simulate(ar2, args.n, seed=args.seed)
    s = center(s, mean(s, k))
    rows.append(("AR(2) d=2", "yule_walker",
                 coef_error(fit_ar_yule_walker(autocovariance_per_lag(s, k, 2), 2), ar2)))
    rows.append(("AR(2) d=2", "mle", coef_error(fit_ar_mle(s, 2, layout=k), ar2)))
    rows.append(("AR(2) d=2", "backtracking mle",
                 coef_error(fit_ar_mle(s, 2, opts=MleOptions(step_rule="backtracking"), layout=k), ar2)))

    s = simulate(ar3, args.n, seed=args.seed + 1)
    rows.append(("AR(3) d=1", "durbin_levinson",
                 coef_error(fit_ar_durbin_levinson(autocovariance_per_lag(s, k, 3), 3), ar3)))
    rows.append(("AR(3) d=1", "sgd", coef_error(
        fit_ar_mle(s, 3, sigma_eps=[[1.0]], opts=MleOptions(sgd=True, sgd_steps=200_000)), ar3)))

    s = simulate(ma1, args.n, seed=args.seed + 2)
    rows.append(("MA(1) d=2", "innovations m=30",
                 coef_error(fit_ma(autocovariance_per_lag(s, k, 30), 1, 30), ma1)))

    s = simulate(arma11, args.n, seed=args.seed + 3)
    rows.append(("ARMA(1,1) d=1", "arma_hybrid m=40",
                 coef_error(fit_arma(autocovariance_per_lag(s, k, 40), 1, 1, 40), arma11)))

    d, b = 20, 2
    a = np.random.default_rng(args.seed).uniform(-1, 1, (d, d)) * band_mask((0, d), (0, d), b)
    a *= 0.7 / np.max(np.abs(np.linalg.eigvals(a)))
    s = simulate(ArmaModel([a], [], np.eye(d)), args.n, seed=args.seed + 4)
    banded = fit_banded_ar(s, b, 4)
    rows.append(("banded AR(1) d=20 b=2", "banded_mle", float(np.abs(banded.dense() - a).max())))

    width = max(len(r[0]) for r in rows)
    print(f"n={args.n}  seed={args.seed}  partitions={k}")
    for model, method, err in rows:
        print(f"{model:<{width}}  {method:<20}  max |error| = {err:.4f}")


if __name__ == "__main__":
    main()
