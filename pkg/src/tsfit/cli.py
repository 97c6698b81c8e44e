"""Command-line interface: ``tsfit {simulate,diff,acf,pacf,fit,forecast}``.

Exit status is 0 on success, 1 on domain or ingestion errors and 2 on
usage errors. Numeric output uses Python's shortest round-trip float
formatting, so outputs are byte-identical for identical inputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import core, fit_freq, fit_mle, forecast, moments
from .core import RegularSeries
from .errors import IngestionError, TsfitError
from .overlap import Engine, default_threads


@dataclass(frozen=True)
class CsvSpec:
    delimiter: str = ","
    has_header: bool = True
    time_column: str | int | None = 0
    value_columns: tuple | None = None


def _time_index(header, spec: CsvSpec, width: int):
    tc = spec.time_column
    if tc is None:
        return None
    if isinstance(tc, str) and not tc.lstrip("-").isdigit():
        if header is None or tc not in header:
            raise IngestionError(f"time column {tc!r} not found in header")
        return header.index(tc)
    idx = int(tc)
    if not 0 <= idx < width:
        raise IngestionError(f"time column index {idx} out of range for {width} columns")
    return idx


def parse_csv(path, spec: CsvSpec = CsvSpec()) -> RegularSeries:
    """Read a regularly indexed series; gaps or repeats in the time column are rejected."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=spec.delimiter) if r and any(c.strip() for c in r)]
    header = None
    if spec.has_header:
        if not rows:
            raise IngestionError(f"{path}: empty file")
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0])
    t_idx = _time_index(header, spec, width)
    if spec.value_columns is not None:
        value_idx = []
        for c in spec.value_columns:
            if isinstance(c, str) and header is not None and c in header:
                value_idx.append(header.index(c))
            else:
                value_idx.append(int(c))
    else:
        value_idx = [i for i in range(width) if i != t_idx]
    if not value_idx:
        raise IngestionError(f"{path}: no value columns")

    values = np.empty((len(rows), len(value_idx)))
    times = []
    for r, row in enumerate(rows):
        line = r + 1  # 1-based data row, header excluded
        if len(row) != width:
            raise IngestionError(f"{path}: row {line} has {len(row)} cells, expected {width}")
        if t_idx is not None:
            try:
                times.append(int(row[t_idx]))
            except ValueError:
                raise IngestionError(f"{path}: row {line}, column {t_idx + 1}: "
                                     f"time value {row[t_idx]!r} is not an integer") from None
            if r and times[-1] != times[-2] + 1:
                kind = "duplicate" if times[-1] == times[-2] else "gap"
                raise IngestionError(f"{path}: row {line}: {kind} in time index "
                                     f"({times[-2]} -> {times[-1]}); series must be regular")
        for j, c in enumerate(value_idx):
            try:
                v = float(row[c])
            except ValueError:
                v = float("nan")
            if not np.isfinite(v):
                raise IngestionError(f"{path}: row {line}, column {c + 1}: "
                                     f"cannot parse {row[c]!r} as a finite number")
            values[r, j] = v
    return RegularSeries(values, times[0] if times else 0)


def write_csv(path, values, start_index=0, names=None) -> None:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    names = names or [f"x{j}" for j in range(values.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", *names])
        for i, row in enumerate(values):
            writer.writerow([start_index + i, *(repr(float(v)) for v in row)])


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _csv_spec(args) -> CsvSpec:
    if args.no_time:
        tc = None
    else:
        tc = 0 if args.time_column is None else args.time_column
    return CsvSpec(args.delimiter, not args.no_header, tc)


def _engine(args) -> Engine:
    threads = args.threads or default_threads()
    return Engine(partitions=args.partitions or threads, threads=threads)


def _load_series(args) -> RegularSeries:
    return parse_csv(args.input, _csv_spec(args))


def cmd_simulate(args):
    model = core.load_model(args.model)
    series = core.simulate(model, args.n, args.burn_in, args.seed)
    write_csv(args.out, series.values)


def cmd_diff(args):
    series = _load_series(args)
    out = core.difference(series, args.order)
    write_csv(args.out, out.values, out.start_index)


def _centered_cov(args, series, h_max):
    engine = _engine(args)
    if not args.no_center:
        series = moments.center(series, moments.mean(series, engine))
    return moments.autocovariance(series, engine, h_max, args.estimator)


def cmd_acf(args):
    series = _load_series(args)
    cov = _centered_cov(args, series, args.max_lag)
    corr = moments.autocorrelation(cov)
    write_json(args.out, moments.acf_to_dict(corr, series.n, cov.normalization))


def cmd_pacf(args):
    series = _load_series(args)
    cov = _centered_cov(args, series, args.max_lag)
    pc = moments.pacf(cov, args.max_lag, ridge=args.ridge)
    write_json(args.out, moments.pacf_to_dict(pc, series.n, cov.normalization))


def _mle_options(args) -> fit_mle.MleOptions:
    step = args.step
    rule, eta = "eigen", None
    if step.startswith("fixed"):
        rule = "fixed"
        try:
            eta = float(step.split(":", 1)[1])
        except (IndexError, ValueError):
            raise TsfitError(f"--step fixed needs a value, e.g. fixed:0.01 (got {step!r})") from None
    elif step in ("backtrack", "backtracking"):
        rule = "backtracking"
    elif step != "eigen":
        raise TsfitError(f"unknown --step {step!r}")
    return fit_mle.MleOptions(max_iters=args.max_iters, grad_tol=args.grad_tol, step_rule=rule,
                              step=eta, sgd=args.sgd, sgd_step0=args.sgd_step0,
                              sgd_steps=args.sgd_steps, seed=args.seed, rounds=args.rounds,
                              init="yule_walker" if args.warm_start else "zeros")


def cmd_fit(args):
    series = _load_series(args)
    engine = _engine(args)
    mu = moments.mean(series, engine)
    centered = moments.center(series, mu)
    method = args.method
    p, q = args.p, args.q
    extra = {"mu": mu.tolist()}
    if method in ("yule-walker", "durbin-levinson"):
        cov = moments.autocovariance(centered, engine, p, args.estimator)
        fitter = fit_freq.fit_ar_yule_walker if method == "yule-walker" else fit_freq.fit_ar_durbin_levinson
        model = fitter(cov, p)
    elif method == "innovations":
        m = args.m if args.m is not None else q + fit_freq.MA_EXTRA_DEPTH
        cov = moments.autocovariance(centered, engine, m, args.estimator)
        model = fit_freq.fit_ma(cov, q, m)
    elif method == "arma":
        m = args.m if args.m is not None else p + q + fit_freq.MA_EXTRA_DEPTH
        cov = moments.autocovariance(centered, engine, m, args.estimator)
        model = fit_freq.fit_arma(cov, p, q, m)
    elif method == "mle" and args.bandwidth is None:
        model = fit_mle.fit_ar_mle(centered, p, None, _mle_options(args), engine)
        extra["converged"] = model.info["converged"]
        extra["iterations"] = model.info["iterations"]
    else:  # banded: --method banded, or --method mle with --bandwidth
        if args.bandwidth is None:
            raise TsfitError("--method banded needs --bandwidth")
        banded = fit_mle.fit_banded_ar(centered, args.bandwidth, args.spatial_partitions,
                                       _mle_options(args), max_workers=engine.threads)
        sigma = np.linalg.inv(banded.precision_dense())
        model = core.ArmaModel([banded.dense()], [], 0.5 * (sigma + sigma.T), method="banded_mle")
        model = model.replace(warnings=core.model_warnings(model))
        extra.update(bandwidth=banded.bandwidth, spatial_partitions=[list(r) for r in banded.ranges],
                     converged=banded.info["converged"], iterations=banded.info["iterations"])
    core.save_model(model, args.out, **extra)


def _residuals_path(out: str) -> str:
    stem, dot, ext = out.rpartition(".")
    return f"{stem}.residuals.{ext}" if dot else f"{out}.residuals"


def cmd_forecast(args):
    with open(args.model) as fh:
        raw = json.load(fh)
    model = core.model_from_dict(raw)
    series = _load_series(args)
    mu = np.asarray(raw.get("mu", np.zeros(series.d)), dtype=float)
    centered = moments.center(series, mu)
    next_index = series.start_index + series.n
    if args.one_step_all:
        res = forecast.forecast_arma_one_step(model, centered, exact_warmup=args.exact_warmup)
        write_csv(args.out, res.predictions + mu, series.start_index + res.warmup)
        write_csv(args.residuals_out or _residuals_path(args.out), res.one_step_residuals,
                  series.start_index + res.warmup)
        return
    if model.q == 0:
        recent = centered.values[series.n - model.p:] if model.p else np.zeros((0, series.d))
        res = forecast.forecast_ar(model, recent, args.steps)
    else:
        res = forecast.forecast_arma(model, centered, args.steps, exact_warmup=args.exact_warmup)
    write_csv(args.out, res.predictions + mu, next_index)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsfit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def engine_opts(p):
        p.add_argument("--partitions", type=int, default=None, help="time partitions (default: threads)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $TSFIT_THREADS or CPU count)")

    def input_opts(p):
        p.add_argument("--input", required=True)
        p.add_argument("--delimiter", default=",")
        p.add_argument("--no-header", action="store_true")
        p.add_argument("--time-column", default=None, help="name or index (default: column 0)")
        p.add_argument("--no-time", action="store_true", help="file has no time column")

    p = sub.add_parser("simulate", help="simulate a Gaussian ARMA model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=core.DEFAULT_BURN_IN)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("diff", help="difference a series")
    input_opts(p)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diff)

    for name, func, helptext in (("acf", cmd_acf, "autocorrelogram"), ("pacf", cmd_pacf, "partial autocorrelogram")):
        p = sub.add_parser(name, help=helptext)
        input_opts(p)
        engine_opts(p)
        p.add_argument("--max-lag", type=int, required=True)
        p.add_argument("--estimator", choices=("per-lag", "joint"), default="per-lag")
        p.add_argument("--no-center", action="store_true")
        if name == "pacf":
            p.add_argument("--ridge", type=float, default=0.0)
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("fit", help="fit an AR, MA, ARMA or banded AR model")
    input_opts(p)
    engine_opts(p)
    p.add_argument("--method", required=True,
                   choices=("yule-walker", "durbin-levinson", "innovations", "arma", "mle", "banded"))
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--m", type=int, default=None, help="innovations depth")
    p.add_argument("--estimator", choices=("per-lag", "joint"), default="per-lag")
    p.add_argument("--step", default="eigen", help="eigen | fixed:ETA | backtrack")
    p.add_argument("--sgd", action="store_true")
    p.add_argument("--sgd-step0", type=float, default=0.5)
    p.add_argument("--sgd-steps", type=int, default=100_000)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--grad-tol", type=float, default=1e-10)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--warm-start", action="store_true", help="initialise MLE from Yule-Walker")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bandwidth", type=int, default=None)
    p.add_argument("--spatial-partitions", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="forecast from a fitted model")
    input_opts(p)
    p.add_argument("--model", required=True)
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--one-step-all", action="store_true",
                   help="emit every in-sample one-step prediction")
    p.add_argument("--exact-warmup", action="store_true")
    p.add_argument("--residuals-out", default=None,
                   help="residual CSV for --one-step-all (default: OUT with a .residuals suffix)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forecast)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (TsfitError, OSError, json.JSONDecodeError) as exc:
        print(f"tsfit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
