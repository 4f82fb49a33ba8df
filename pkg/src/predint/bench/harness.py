"""Benchmark harness: tune on a seeded two-thirds subsample, evaluate every
method by k-fold cross-validation on all rows, write reports and chart data."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import loess
from ..evaluation import EvalReport, compare
from ..pim import (
    Conventional,
    FixedK,
    PIMConfig,
    SearchConfig,
    VarK,
    default_fixed_k,
    default_var_k,
    tune,
)
from .data import Dataset

METHODS = ("fixedk", "vark", "conventional")
DEFAULT_BETAS = (0.8, 0.9, 0.95, 0.99)
#: Candidate regression bandwidths tried when none is given.
KLOESS_GRID = (5, 10, 15, 20, 30, 40, 60, 80, 120, 160, 240)
TUNE_FRACTION = 2.0 / 3.0
CHART_KINDS = ("mip", "mis", "egsd")


@dataclass(frozen=True)
class RunConfig:
    methods: tuple[str, ...] = METHODS
    betas: tuple[float, ...] = DEFAULT_BETAS
    folds: int = 10
    seed: int = 42
    tune: bool = True
    gamma: float | None = None
    k_loess: int | None = None
    kloess_grid: tuple[int, ...] | None = None
    scheme: str | None = None
    alpha: float = 0.05
    egsd_literal: bool = False
    search: SearchConfig = field(default_factory=SearchConfig)
    out_dir: str | None = None
    svg: bool = False

    def __post_init__(self):
        if not self.methods:
            raise ValueError("need at least one method")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if not self.betas or not all(0 < b < 1 for b in self.betas):
            raise ValueError("beta grid must be non-empty and inside (0, 1)")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if not self.tune and self.gamma is None and set(self.methods) - {"conventional"}:
            raise ValueError("without tuning a gamma must be given")
        if self.gamma is not None and not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.scheme not in (None, "loo", "kfold"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    def echo(self) -> dict:
        return {
            "methods": list(self.methods),
            "betas": list(self.betas),
            "folds": self.folds,
            "seed": self.seed,
            "tune": self.tune,
            "gamma": self.gamma,
            "k_loess": self.k_loess,
            "kloess_grid": None if self.kloess_grid is None else list(self.kloess_grid),
            "scheme": self.scheme,
            "alpha": self.alpha,
            "egsd_literal": self.egsd_literal,
            "search": {
                "strategy": self.search.strategy,
                "gamma_start": self.search.gamma_start,
                "gamma_ladder": list(self.search.gamma_ladder),
                "k_step": self.search.k_step,
                "max_iterations": self.search.max_iterations,
            },
        }


def tuning_split(n: int, seed: int) -> np.ndarray:
    """Sorted indices of the seeded two-thirds tuning subsample."""
    m = int(round(TUNE_FRACTION * n))
    return np.sort(np.random.default_rng(seed).permutation(n)[:m])


def kloess_candidates(n: int, p: int, grid: Sequence[int] | None = None) -> list[int]:
    grid = KLOESS_GRID if grid is None else grid
    cands = sorted({int(k) for k in grid if p + 2 <= k <= n})
    return cands or [min(n, max(p + 2, 5))]


def choose_kloess(X, y, config: RunConfig) -> int:
    if config.k_loess is not None:
        return config.k_loess
    cands = kloess_candidates(len(y), X.shape[1], config.kloess_grid)
    return loess.select_bandwidth(X, y, cands, config.folds, config.seed)


def untuned_config(method: str, beta: float, gamma, n: int, k_loess: int) -> PIMConfig:
    if method == "fixedk":
        return PIMConfig(beta, gamma, FixedK(default_fixed_k(n)), k_loess)
    if method == "vark":
        return PIMConfig(beta, gamma, VarK(*default_var_k(n)), k_loess)
    return PIMConfig(beta, None, Conventional(), k_loess)


def plan(ds: Dataset, config: RunConfig) -> tuple[dict, list[str], dict]:
    """Per-method, per-beta configurations from the tuning subsample."""
    idx = tuning_split(ds.n, config.seed)
    Xt, yt = ds.X[idx], ds.y[idx]
    k_loess = choose_kloess(Xt, yt, config)
    notes = [f"k_loess={k_loess}", f"tuning subsample n={len(idx)}"]
    tuning: dict = {"k_loess": k_loess, "n_tune": int(len(idx)), "cells": []}
    needs_errors = config.tune and set(config.methods) - {"conventional"}
    errs = None
    if needs_errors:
        errs = loess.cv_errors(Xt, yt, k_loess, config.scheme or loess.default_scheme(len(idx)),
                               config.folds, config.seed)
    configs: dict[str, dict[float, PIMConfig]] = {}
    for method in config.methods:
        per: dict[float, PIMConfig] = {}
        for beta in config.betas:
            if method == "conventional" or not config.tune:
                per[beta] = untuned_config(method, beta, config.gamma, len(idx), k_loess)
                continue
            if config.gamma is not None:
                search = SearchConfig(
                    gamma_ladder=(config.gamma,), gamma_start=config.gamma,
                    k_step=config.search.k_step, max_iterations=config.search.max_iterations,
                    strategy=config.search.strategy, k_grid=config.search.k_grid,
                    range_grid=config.search.range_grid,
                )
            else:
                search = config.search
            res = tune(Xt, errs, beta, method, search, k_loess)
            per[beta] = res.config
            tuning["cells"].append({"method": method, "beta": beta, "mip": res.mip,
                                    "mis": res.mis, "feasible": res.feasible,
                                    "config": res.config.to_dict()})
            if not res.feasible:
                notes.append(f"{method} beta={beta}: no tuning point reached MIP >= beta")
        configs[method] = per
    return configs, notes, tuning


def evaluate(ds: Dataset, config: RunConfig) -> tuple[EvalReport, dict]:
    configs, notes, tuning = plan(ds, config)
    report = compare(ds.X, ds.y, configs, config.folds, config.seed, config.scheme,
                     config.alpha, config.egsd_literal, ds.name)
    if ds.dropped_rows:
        notes.append(f"dropped {ds.dropped_rows} rows with nulls")
    if ds.constant_columns:
        notes.append(f"constant predictor columns (centred only): {list(ds.constant_columns)}")
    report.notes.extend(notes)
    return report, tuning


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

CSV_FIELDS = ("dataset", "method", "beta", "n_v", "mip", "mis", "sigma_is", "egsd",
              "threshold", "pim_pass", "normalized_mis", "normalized_egsd", "error")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def report_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for rep in reports:
        for r in rep.rows:
            w.writerow([fmt(getattr(r, f)) for f in CSV_FIELDS])
    return buf.getvalue()


def chart_csv(report: EvalReport, kind: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("beta", "method", "value", "line_kind"))
    for pt in report.chart_series()[kind]:
        w.writerow([fmt(pt["beta"]), pt["method"], fmt(pt["value"]), pt["line_kind"]])
    return buf.getvalue()


def report_json(config: RunConfig, reports: Sequence[EvalReport], tunings: Sequence[dict],
                sources: Sequence[dict]) -> str:
    body = {
        "config": config.echo(),
        "datasets": [
            {**rep.to_dict(), "source": src, "tuning": tun}
            for rep, tun, src in zip(reports, tunings, sources)
        ],
    }
    # repr-based floats round-trip exactly
    return json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n"


def render_svg(report: EvalReport, path: Path) -> None:
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("--svg needs matplotlib (pip install 'artifact[svg]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "predint"
    series = report.chart_series()
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    titles = {"mip": "MIP", "mis": "normalized MIS", "egsd": "normalized EGSD"}
    for ax, kind in zip(axes, CHART_KINDS):
        by_method: dict[str, list] = {}
        for pt in series[kind]:
            if kind != "mip" and pt["line_kind"] in ("mip_constraint", "nominal"):
                continue
            by_method.setdefault(pt["method"], []).append(pt)
        for method, pts in by_method.items():
            pts = [p for p in pts if p["value"] is not None]
            if not pts:
                continue
            style = "--" if method in ("F(beta)", "nominal") else "-o"
            ax.plot([p["beta"] for p in pts], [p["value"] for p in pts], style,
                    label=method, markersize=3)
        ax.set_title(f"{report.dataset}: {titles[kind]}")
        ax.set_xlabel("nominal beta")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_artifacts(out_dir, config: RunConfig, reports, tunings, sources) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name: str, text: str):
        p = out / name
        p.write_text(text, encoding="utf-8")
        written.append(p)

    put("report.json", report_json(config, reports, tunings, sources))
    put("report.csv", report_csv(reports))
    put("config.json", json.dumps(config.echo(), indent=2, sort_keys=True) + "\n")
    for rep in reports:
        for kind in CHART_KINDS:
            put(f"{rep.dataset}_chart_{kind}.csv", chart_csv(rep, kind))
        if config.svg:
            p = out / f"{rep.dataset}_charts.svg"
            render_svg(rep, p)
            written.append(p)
    return written


def run(config: RunConfig, datasets: Sequence[Dataset]) -> list[EvalReport]:
    """Evaluate every dataset; write artifacts when ``config.out_dir`` is set."""
    if not datasets:
        raise ValueError("no datasets given")
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ValueError(f"dataset names must be unique: {names}")
    reports, tunings = [], []
    for ds in datasets:
        rep, tun = evaluate(ds, config)
        reports.append(rep)
        tunings.append(tun)
    if config.out_dir is not None:
        write_artifacts(config.out_dir, config, reports, tunings, [d.source for d in datasets])
    return reports
