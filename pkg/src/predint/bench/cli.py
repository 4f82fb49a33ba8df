"""Command line entry point: ``predint {fit,interval,bench,synth}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .. import loess
from ..pim import SearchConfig, interval_bounds, tune
from . import harness, synthetic
from .data import DataError, Dataset, gen_synthetic, load_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--response", help="response column name or index (default: last)")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--kloess", type=int, help="regression bandwidth K_loess")
    p.add_argument("--grid-kloess", type=_int_list, help="candidate K_loess list, e.g. 10,20,40")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--scheme", choices=("loo", "kfold"),
                   help="error-set scheme (default: loo up to 500 rows, else kfold)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="predint", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="select K_loess and report CV error")
    fit.add_argument("csv")
    _add_model_flags(fit)
    fit.add_argument("--out-dir")

    iv = sub.add_parser("interval", help="predictive intervals at query points")
    iv.add_argument("csv")
    _add_model_flags(iv)
    iv.add_argument("--method", choices=harness.METHODS, default="vark")
    iv.add_argument("--beta", type=float, default=0.9)
    iv.add_argument("--gamma", type=float, help="fix gamma; otherwise it is tuned")
    iv.add_argument("--query", action="append", default=[],
                    help="comma-separated predictor values in original units (repeatable)")
    iv.add_argument("--queries", help="CSV of query rows with a header matching the predictors")

    b = sub.add_parser("bench", help="cross-validated comparison of interval methods")
    b.add_argument("--data", action="append", default=[], help="CSV dataset (repeatable)")
    b.add_argument("--synthetic", action="append", default=[], choices=synthetic.KINDS,
                   help="synthetic dataset (repeatable)")
    b.add_argument("--n", type=int, default=1000, help="synthetic sample size")
    b.add_argument("--p", type=int, default=1, help="synthetic predictor count")
    b.add_argument("--noise", type=float, default=1.0)
    _add_model_flags(b)
    b.add_argument("--method", action="append", choices=harness.METHODS,
                   help="method to compare (repeatable; default: all)")
    b.add_argument("--beta", action="append", type=float, help="nominal beta (repeatable)")
    b.add_argument("--gamma", type=float, help="fix gamma instead of tuning it")
    b.add_argument("--no-tune", action="store_true", help="skip neighbourhood tuning")
    b.add_argument("--strategy", choices=("schedule", "grid"), default="schedule")
    b.add_argument("--alpha", type=float, default=0.05)
    b.add_argument("--egsd-literal", action="store_true",
                   help="EGSD as MIS / (2 z_{(1+beta)/2} MIP), for compatibility")
    b.add_argument("--out-dir", default="predint-out")
    b.add_argument("--svg", action="store_true", help="also render static SVG charts")

    s = sub.add_parser("synth", help="write a synthetic dataset as CSV")
    s.add_argument("kind", choices=synthetic.KINDS)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--p", type=int, default=1)
    s.add_argument("--noise", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", help="output path (default: stdout)")
    return parser


def _load(args) -> Dataset:
    return load_csv(args.csv, args.response, args.delimiter)


def _kloess(ds: Dataset, args) -> int:
    if args.kloess is not None:
        return args.kloess
    cands = harness.kloess_candidates(ds.n, ds.p, args.grid_kloess)
    return loess.select_bandwidth(ds.X, ds.y, cands, args.folds, args.seed)


def cmd_fit(args) -> dict:
    ds = _load(args)
    k = _kloess(ds, args)
    scheme = args.scheme or loess.default_scheme(ds.n)
    errs = loess.cv_errors(ds.X, ds.y, k, scheme, args.folds, args.seed)
    out = {"dataset": ds.name, "n": ds.n, "p": ds.p, "k_loess": k, "scheme": scheme,
           "cv_mse": errs.mse, "sse": errs.sse, "dropped_rows": ds.dropped_rows,
           "constant_columns": list(ds.constant_columns),
           "means": ds.means.tolist(), "sds": ds.sds.tolist()}
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        Path(args.out_dir, "model.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return out


def _queries(ds: Dataset, args) -> np.ndarray:
    rows = []
    for q in args.query:
        try:
            rows.append([float(t) for t in q.split(",")])
        except ValueError:
            raise UsageError(f"bad --query {q!r}") from None
    if args.queries:
        qd = np.genfromtxt(args.queries, delimiter=",", names=True)
        if qd.dtype.names is None:
            raise DataError(f"{args.queries}: header required")
        rows.extend(np.array([list(r) for r in np.atleast_1d(qd)], dtype=float).tolist())
    if not rows:
        raise UsageError("give at least one --query or --queries")
    if any(len(r) != ds.p for r in rows):
        raise UsageError(f"each query needs {ds.p} values")
    return np.array(rows, dtype=float)


def cmd_interval(args) -> dict:
    ds = _load(args)
    raw = _queries(ds, args)
    Q = ds.standardize(raw)
    k = _kloess(ds, args)
    model = loess.fit(ds.X, ds.y, k)
    errs = loess.cv_errors(ds.X, ds.y, k, args.scheme or loess.default_scheme(ds.n),
                           args.folds, args.seed)
    if args.method == "conventional":
        cfg = harness.untuned_config("conventional", args.beta, None, ds.n, k)
    else:
        search = SearchConfig()
        if args.gamma is not None:
            search = SearchConfig(gamma_ladder=(args.gamma,), gamma_start=args.gamma)
        cfg = tune(ds.X, errs, args.beta, args.method, search, k).config
    b = interval_bounds(model, errs, Q, cfg)
    return {
        "config": cfg.to_dict(),
        "intervals": [
            {"x": raw[i].tolist(), "fhat": float(b.fhat[i]), "lower": float(b.lower[i]),
             "upper": float(b.upper[i])}
            for i in range(len(Q))
        ],
    }


def cmd_bench(args) -> dict:
    datasets = [load_csv(p, args.response, args.delimiter) for p in args.data]
    datasets += [gen_synthetic(k, args.n, args.p, args.noise, args.seed) for k in args.synthetic]
    if not datasets:
        raise UsageError("give at least one --data or --synthetic")
    config = harness.RunConfig(
        methods=tuple(dict.fromkeys(args.method or harness.METHODS)),
        betas=tuple(sorted(set(args.beta or harness.DEFAULT_BETAS))),
        folds=args.folds, seed=args.seed, tune=not args.no_tune, gamma=args.gamma,
        k_loess=args.kloess, kloess_grid=args.grid_kloess, scheme=args.scheme,
        alpha=args.alpha, egsd_literal=args.egsd_literal,
        search=SearchConfig(strategy=args.strategy), out_dir=args.out_dir, svg=args.svg,
    )
    reports = harness.run(config, datasets)
    return {
        "out_dir": args.out_dir,
        "datasets": [
            {"dataset": r.dataset, "rows": len(r.rows), "failure_mip": r.failure_mip,
             "invalid_cells": sum(not row.valid for row in r.rows)}
            for r in reports
        ],
    }


def cmd_synth(args) -> None:
    X, y = synthetic.sample(args.kind, args.n, args.p, args.noise, args.seed)
    cols = [f"x{j + 1}" for j in range(X.shape[1])] + ["y"]
    lines = [",".join(cols)]
    lines += [",".join(format(v, ".17g") for v in row) for row in np.column_stack([X, y])]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


COMMANDS = {"fit": cmd_fit, "interval": cmd_interval, "bench": cmd_bench, "synth": cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = COMMANDS[args.command](args)
    except DataError as exc:
        print(f"predint: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ValueError) as exc:
        print(f"predint: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"predint: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - last-resort classification
        print(f"predint: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    if out is not None:
        json.dump(out, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
