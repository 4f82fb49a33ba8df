"""Quality measures for interval prediction models and the PIM test.

MIP is the fraction of held-out responses inside their intervals, MIS and
sigma_is the mean and sample sd of interval widths. The PIM test rejects a
model claiming beta-content predictive intervals when its MIP falls below the
one-sided binomial-normal bound ``beta + z_alpha * sqrt(beta (1 - beta) / n_v)``.
"""

from __future__ import annotations

import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import loess
from .numkit import normal_quantile
from .pim import Conventional, PIMConfig, interval_bounds

#: Below this evaluation size the normal approximation of the test is flagged.
MIN_NORMAL_NV = 30


@dataclass(frozen=True, eq=False)
class MethodRun:
    """Out-of-sample intervals of one method at one nominal beta."""

    method: str
    beta: float
    lower: np.ndarray
    upper: np.ndarray
    y: np.ndarray
    width: np.ndarray | None = None

    def __post_init__(self):
        if not (len(self.lower) == len(self.upper) == len(self.y) > 0):
            raise ValueError("need equally many intervals and responses, at least one")
        if self.width is not None and len(self.width) != len(self.y):
            raise ValueError("width count differs from response count")

    @property
    def n_v(self) -> int:
        return len(self.y)

    @property
    def widths(self) -> np.ndarray:
        """Interval sizes; exact widths when supplied, else ``upper - lower``."""
        if self.width is not None:
            return np.asarray(self.width)
        return np.asarray(self.upper) - np.asarray(self.lower)


def mip(run: MethodRun) -> float:
    inside = (run.y >= run.lower) & (run.y <= run.upper)
    return float(np.mean(inside))


def mis(run: MethodRun) -> float:
    return float(np.mean(run.widths))


def sigma_is(run: MethodRun) -> float:
    if run.n_v < 2:
        raise ValueError("sigma_is needs at least two intervals")
    # exact rational arithmetic: equal widths give exactly 0
    return statistics.stdev(run.widths.tolist())


def _check_level(name, value):
    if not 0 < value < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")


def pim_threshold(beta: float, n_v: int, alpha: float = 0.05) -> float:
    """Smallest MIP a beta-content predictive interval model may show on
    ``n_v`` evaluation points without rejection at level ``alpha``."""
    _check_level("beta", beta)
    _check_level("alpha", alpha)
    if n_v < 1:
        raise ValueError("n_v must be positive")
    return beta + normal_quantile(alpha) * math.sqrt(beta * (1.0 - beta) / n_v)


@dataclass(frozen=True)
class PIMTestResult:
    passed: bool
    threshold: float
    small_sample: bool


def pim_test(mip_value: float, beta: float, n_v: int, alpha: float = 0.05) -> PIMTestResult:
    f = pim_threshold(beta, n_v, alpha)
    return PIMTestResult(mip_value >= f, f, n_v < MIN_NORMAL_NV)


def egsd(mis_value: float, mip_value: float, literal: bool = False,
         beta: float | None = None) -> float:
    """Equivalent Gaussian standard deviation.

    The sd of the normal whose central ``mip_value`` inter-quantile range has
    width ``mis_value``. ``literal=True`` uses the alternative form
    ``MIS / (2 z_{(1+beta)/2} MIP)`` and requires ``beta``.
    """
    if not 0 < mip_value < 1:
        raise ValueError("EGSD is undefined for MIP of 0 or 1")
    if not mis_value >= 0:
        raise ValueError("MIS must be nonnegative")
    if literal:
        if beta is None:
            raise ValueError("literal EGSD needs beta")
        _check_level("beta", beta)
        return mis_value / (2.0 * normal_quantile((1.0 + beta) / 2.0) * mip_value)
    return mis_value / (2.0 * normal_quantile((1.0 + mip_value) / 2.0))


def normalize(values: Mapping[str, float | None]) -> dict[str, float | None]:
    """Divide by the maximum; ``None`` entries stay ``None`` and are ignored."""
    present = [v for v in values.values() if v is not None]
    if not present:
        return {k: None for k in values}
    if any(v <= 0 or not math.isfinite(v) for v in present):
        raise ValueError("normalized values must be positive and finite")
    top = max(present)
    return {k: (None if v is None else v / top) for k, v in values.items()}


def failure_mip(results: Sequence[tuple[float, bool]]) -> float | None:
    """Smallest nominal beta whose PIM test failed, given ``(beta, passed)``."""
    for beta, passed in sorted(results):
        if not passed:
            return beta
    return None


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class ReportRow:
    dataset: str
    method: str
    beta: float
    n_v: int
    mip: float | None = None
    mis: float | None = None
    sigma_is: float | None = None
    egsd: float | None = None
    threshold: float | None = None
    pim_pass: bool | None = None
    normalized_mis: float | None = None
    normalized_egsd: float | None = None
    config: dict | None = None
    error: str | None = None

    @property
    def valid(self) -> bool:
        return self.error is None


@dataclass
class EvalReport:
    dataset: str
    rows: list[ReportRow]
    failure_mip: dict[str, float | None]
    alpha: float
    folds: int
    seed: int
    notes: list[str] = field(default_factory=list)

    def row(self, method: str, beta: float) -> ReportRow:
        for r in self.rows:
            if r.method == method and r.beta == beta:
                return r
        raise KeyError((method, beta))

    @property
    def methods(self) -> list[str]:
        return list(dict.fromkeys(r.method for r in self.rows))

    @property
    def betas(self) -> list[float]:
        return sorted(set(r.beta for r in self.rows))

    def chart_series(self) -> dict[str, list[dict]]:
        """Chart data keyed by chart kind (``mip``, ``mis``, ``egsd``).

        Each series holds one point per (method, beta), a blank value when
        the measure is absent, plus the MIP-constraint line F(beta) and the
        nominal line y = beta on the same beta grid.
        """
        measure = {"mip": "mip", "mis": "normalized_mis", "egsd": "normalized_egsd"}
        charts = {}
        for chart, attr in measure.items():
            pts = []
            for r in self.rows:
                pts.append({"beta": r.beta, "method": r.method,
                            "value": getattr(r, attr), "line_kind": attr})
            for beta in self.betas:
                n_v = max(r.n_v for r in self.rows if r.beta == beta)
                pts.append({"beta": beta, "method": "F(beta)",
                            "value": pim_threshold(beta, n_v, self.alpha),
                            "line_kind": "mip_constraint"})
                pts.append({"beta": beta, "method": "nominal", "value": beta,
                            "line_kind": "nominal"})
            charts[chart] = pts
        return charts

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "alpha": self.alpha,
            "folds": self.folds,
            "seed": self.seed,
            "rows": [asdict(r) for r in self.rows],
            "failure_mip": dict(self.failure_mip),
            "notes": list(self.notes),
        }


def measure_run(run: MethodRun, alpha: float = 0.05, egsd_literal: bool = False,
                dataset: str = "") -> ReportRow:
    m = mip(run)
    s = mis(run)
    t = pim_test(m, run.beta, run.n_v, alpha)
    try:
        e = egsd(s, m, literal=egsd_literal, beta=run.beta)
    except ValueError:
        e = None
    return ReportRow(
        dataset=dataset, method=run.method, beta=run.beta, n_v=run.n_v,
        mip=m, mis=s, sigma_is=sigma_is(run) if run.n_v > 1 else None,
        egsd=e, threshold=t.threshold, pim_pass=t.passed,
    )


def finalize(rows: list[ReportRow]) -> dict[str, float | None]:
    """Fill normalized MIS / EGSD per beta and return failure MIP per method."""
    for beta in sorted(set(r.beta for r in rows)):
        cell = [r for r in rows if r.beta == beta and r.valid]
        keys = [str(i) for i in range(len(cell))]
        nm = normalize({k: (r.mis if r.pim_pass and r.mis > 0 else None)
                        for k, r in zip(keys, cell)})
        ne = normalize({k: (r.egsd if r.egsd is not None and r.egsd > 0 else None)
                        for k, r in zip(keys, cell)})
        for k, r in zip(keys, cell):
            r.normalized_mis = nm[k]
            r.normalized_egsd = ne[k]
    failures = {}
    for method in dict.fromkeys(r.method for r in rows):
        res = [(r.beta, bool(r.pim_pass)) for r in rows if r.method == method and r.valid]
        failures[method] = failure_mip(res)
    return failures


def _workers() -> int:
    env = os.environ.get("PREDINT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _fold_cell(X, y, train, test, k_loess, scheme, inner_folds, seed, configs):
    model = loess.fit(X[train], y[train], k_loess)
    sch = scheme or loess.default_scheme(len(train))
    errs = loess.cv_errors(X[train], y[train], k_loess, sch, inner_folds, seed)
    fhat = model.predict(X[test])
    out = {}
    for key, cfg in configs:
        try:
            b = interval_bounds(model, errs, X[test], cfg, fhat=fhat)
            out[key] = (b.lower, b.upper, b.width)
        except ValueError as exc:
            out[key] = exc
    return test, out


def _pin_conventional(X, y, cells, scheme, seed):
    """Give every unpinned conventional config the full-data CV error scale,
    so its interval width is one constant across folds."""
    sse: dict[int, float] = {}
    out = []
    for m, b, cfg in cells:
        if isinstance(cfg.method, Conventional) and cfg.method.sse is None:
            k = cfg.k_loess
            if k not in sse:
                try:
                    sse[k] = loess.cv_errors(
                        X, y, k, scheme or loess.default_scheme(len(y)), 10, seed
                    ).sse
                except ValueError:
                    out.append((m, b, cfg))
                    continue
            cfg = replace(cfg, method=Conventional(sse[k]))
        out.append((m, b, cfg))
    return out


def compare(
    X,
    y,
    configs: Mapping[str, Mapping[float, PIMConfig]],
    folds: int = 10,
    seed: int = 42,
    scheme: str | None = None,
    alpha: float = 0.05,
    egsd_literal: bool = False,
    dataset: str = "dataset",
    workers: int | None = None,
) -> EvalReport:
    """Cross-validated comparison of interval methods.

    ``configs`` maps a method label to ``{beta: PIMConfig}``; every config
    must carry its ``k_loess``. In each fold a loess model is fitted on the
    remaining folds, its error set is built with ``scheme`` (default: LOO up
    to 500 training points, 10-fold above) and every config produces
    intervals for the held-out fold. Conventional configs without a pinned
    ``sse`` get the full-data CV error scale.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    n = len(y)
    if not configs:
        raise ValueError("need at least one method")
    cells = [(m, b, cfg) for m, per in configs.items() for b, cfg in per.items()]
    if not cells:
        raise ValueError("need at least one beta")
    for m, b, cfg in cells:
        if cfg.k_loess is None:
            raise ValueError(f"config for {m} at beta={b} lacks k_loess")
    cells = _pin_conventional(X, y, cells, scheme, seed)

    by_k: dict[int, list] = {}
    for m, b, cfg in cells:
        by_k.setdefault(cfg.k_loess, []).append(((m, b), cfg))

    parts = loess.fold_assignment(n, folds, seed)
    jobs = []
    for test in parts:
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        for k_loess, group in by_k.items():
            jobs.append((train, test, k_loess, group))

    def run(job):
        train, test, k_loess, group = job
        try:
            return _fold_cell(X, y, train, test, k_loess, scheme, 10, seed, group)
        except ValueError as exc:
            return test, {key: exc for key, _ in group}

    nworkers = workers or _workers()
    if nworkers > 1:
        with ThreadPoolExecutor(nworkers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    lower = {(m, b): np.empty(n) for m, b, _ in cells}
    upper = {(m, b): np.empty(n) for m, b, _ in cells}
    width = {(m, b): np.empty(n) for m, b, _ in cells}
    failed: dict[tuple, str] = {}
    for test, out in results:
        for key, val in out.items():
            if isinstance(val, Exception):
                failed.setdefault(key, str(val))
            else:
                lower[key][test] = val[0]
                upper[key][test] = val[1]
                width[key][test] = val[2]

    rows = []
    for m, b, cfg in cells:
        key = (m, b)
        if key in failed:
            rows.append(ReportRow(dataset, m, b, n, config=cfg.to_dict(), error=failed[key]))
            continue
        run_ = MethodRun(m, b, lower[key], upper[key], y, width[key])
        row = measure_run(run_, alpha, egsd_literal, dataset)
        row.config = cfg.to_dict()
        rows.append(row)
    failures = finalize(rows)
    return EvalReport(dataset, rows, failures, alpha, folds, seed)
