"""Predictive intervals for local linear regression.

An interval at ``x`` is the loess estimate plus a normal tolerance interval
computed on the stored out-of-sample errors of the training points nearest to
``x``. The neighbourhood is a fixed ``K`` or, for the variable-K method, the
``K`` in ``[min_k, max_k]`` giving the narrowest tolerance interval. The
conventional baseline ``f(x) +/- z * SSE`` is provided for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .loess import ErrorSet, LoessModel
from .numkit import knn_batch, normal_quantile
from .tolerance import Interval, SampleStats, howe_factors

#: Smallest neighbourhood used by the tolerance-interval methods.
MIN_NEIGHBOURS = 3
GAMMA_LADDER = (0.99, 0.95, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.25)


@dataclass(frozen=True)
class FixedK:
    k: int
    name = "fixedk"


@dataclass(frozen=True)
class VarK:
    min_k: int
    max_k: int
    name = "vark"


@dataclass(frozen=True)
class Conventional:
    """``f(x) +/- z * sse``; ``sse`` pins the error scale, else it comes from
    the error set."""

    sse: float | None = None
    name = "conventional"


Method = Union[FixedK, VarK, Conventional]


@dataclass(frozen=True)
class PIMConfig:
    beta: float
    gamma: float | None
    method: Method
    k_loess: int | None = None

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if isinstance(self.method, Conventional):
            if self.method.sse is not None and not self.method.sse >= 0:
                raise ValueError("sse must be nonnegative")
            return
        if self.gamma is None or not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if isinstance(self.method, FixedK):
            if self.method.k < MIN_NEIGHBOURS:
                raise ValueError(f"K={self.method.k} below {MIN_NEIGHBOURS}")
        elif isinstance(self.method, VarK):
            if not MIN_NEIGHBOURS <= self.method.min_k <= self.method.max_k:
                raise ValueError(
                    f"need {MIN_NEIGHBOURS} <= MIN_K <= MAX_K, got "
                    f"({self.method.min_k}, {self.method.max_k})"
                )
        else:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def max_neighbours(self) -> int:
        if isinstance(self.method, FixedK):
            return self.method.k
        if isinstance(self.method, VarK):
            return self.method.max_k
        return 0

    def to_dict(self) -> dict:
        d = {"beta": self.beta, "gamma": self.gamma, "method": self.method.name,
             "k_loess": self.k_loess}
        if isinstance(self.method, FixedK):
            d["k"] = self.method.k
        elif isinstance(self.method, VarK):
            d["min_k"] = self.method.min_k
            d["max_k"] = self.method.max_k
        elif self.method.sse is not None:
            d["sse"] = self.method.sse
        return d


@dataclass(frozen=True)
class ErrorNeighborhood:
    indices: np.ndarray
    errors: np.ndarray
    stats: SampleStats


# ---------------------------------------------------------------------------
# running neighbourhood statistics
# ---------------------------------------------------------------------------


def running_stats(E: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and sample sd of the first ``k`` columns of ``E`` for every ``k``.

    Welford's recursion along the neighbour axis; column ``k - 1`` of the
    outputs depends only on the first ``k`` columns of ``E``, so truncating
    ``E`` never changes earlier results. The sd of a single value is 0.
    """
    E = np.asarray(E, dtype=float)
    m, kmax = E.shape
    means = np.empty((m, kmax))
    sds = np.empty((m, kmax))
    mean = np.zeros(m)
    m2 = np.zeros(m)
    for j in range(kmax):
        x = E[:, j]
        delta = x - mean
        mean = mean + delta / (j + 1)
        m2 = m2 + delta * (x - mean)
        means[:, j] = mean
        sds[:, j] = np.sqrt(m2 / j) if j > 0 else 0.0
    return means, sds


def _check_neighbourhood(config: PIMConfig, n: int) -> None:
    if config.max_neighbours > n:
        raise ValueError(
            f"neighbourhood of {config.max_neighbours} exceeds {n} training points"
        )


def _select(means, sds, config: PIMConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Error-interval centre, half-width and chosen K for each row."""
    method = config.method
    if isinstance(method, FixedK):
        k = method.k
        c = howe_factors([k], config.beta, config.gamma)[0]
        chosen = np.full(means.shape[0], k)
        return means[:, k - 1], c * sds[:, k - 1], chosen
    ks = np.arange(method.min_k, method.max_k + 1)
    c = howe_factors(ks, config.beta, config.gamma)
    half = c[None, :] * sds[:, method.min_k - 1 : method.max_k]
    # argmin returns the first minimum, so ties go to the smallest K
    pick = np.argmin(half, axis=1)
    rows = np.arange(means.shape[0])
    centre = means[:, method.min_k - 1 : method.max_k][rows, pick]
    return centre, half[rows, pick], ks[pick]


@dataclass(frozen=True, eq=False)
class IntervalBatch:
    lower: np.ndarray
    upper: np.ndarray
    fhat: np.ndarray
    half: np.ndarray
    chosen_k: np.ndarray | None = None

    @property
    def width(self) -> np.ndarray:
        # exact 2 * half; upper - lower would pick up rounding from fhat
        return 2.0 * self.half

    def __getitem__(self, i) -> Interval:
        return Interval(float(self.lower[i]), float(self.upper[i]))


def interval_bounds(
    model: LoessModel,
    errors: ErrorSet,
    Q,
    config: PIMConfig,
    fhat: np.ndarray | None = None,
) -> IntervalBatch:
    """Predictive intervals at every row of ``Q``.

    ``fhat`` may carry precomputed loess estimates at ``Q``.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 1:
        Q = Q.reshape(1, -1)
    if len(errors) != model.n:
        raise ValueError("error set is not aligned with the model's training data")
    if fhat is None:
        fhat = model.predict(Q)
    fhat = np.asarray(fhat, dtype=float)

    if isinstance(config.method, Conventional):
        sse = errors.sse if config.method.sse is None else config.method.sse
        half = np.full(fhat.shape, normal_quantile(1.0 - (1.0 - config.beta) / 2.0) * sse)
        return IntervalBatch(fhat - half, fhat + half, fhat, half)

    _check_neighbourhood(config, model.n)
    idx, _ = knn_batch(model.X, Q, config.max_neighbours)
    means, sds = running_stats(errors.errors[idx])
    centre, half, chosen = _select(means, sds, config)
    return IntervalBatch(fhat + (centre - half), fhat + (centre + half), fhat, half, chosen)


def error_neighborhood(
    model: LoessModel, errors: ErrorSet, x, k: int
) -> ErrorNeighborhood:
    """The ``k`` nearest training points to ``x`` and their stored errors."""
    if k < 2:
        raise ValueError("an error neighbourhood needs at least 2 members")
    idx, _ = knn_batch(model.X, np.asarray(x, dtype=float).reshape(1, -1), k)
    members = idx[0]
    errs = errors.errors[members]
    return ErrorNeighborhood(members, errs, SampleStats.from_sample(errs))


def fixed_k_interval(model, errors, x, config: PIMConfig) -> Interval:
    if not isinstance(config.method, FixedK):
        raise ValueError("fixed_k_interval needs a FixedK config")
    return interval_bounds(model, errors, x, config)[0]


def var_k_interval(model, errors, x, config: PIMConfig) -> Interval:
    if not isinstance(config.method, VarK):
        raise ValueError("var_k_interval needs a VarK config")
    return interval_bounds(model, errors, x, config)[0]


def conventional_interval(model: LoessModel, sse: float, x, beta: float) -> Interval:
    """``f(x) +/- z * sse`` with ``z`` the ``(1 + beta) / 2`` normal quantile."""
    if not sse >= 0:
        raise ValueError("sse must be nonnegative")
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    f = model.predict(np.asarray(x, dtype=float).reshape(1, -1))[0]
    half = normal_quantile(1.0 - (1.0 - beta) / 2.0) * sse
    return Interval(float(f - half), float(f + half))


def predict_interval(model, errors, x, config: PIMConfig) -> Interval:
    if isinstance(config.method, (FixedK, VarK, Conventional)):
        return interval_bounds(model, errors, x, config)[0]
    raise ValueError(f"unknown method {config.method!r}")


# ---------------------------------------------------------------------------
# hyper-parameter tuning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the tuning search.

    ``strategy="schedule"`` runs the alternating neighbourhood / gamma walk;
    ``strategy="grid"`` scores every neighbourhood in ``k_grid`` (or
    ``range_grid`` for variable K) against every gamma on the ladder.
    """

    gamma_ladder: tuple[float, ...] = GAMMA_LADDER
    gamma_start: float = 0.99
    k_step: int = 5
    k0: int | None = None
    min_k0: int | None = None
    max_k0: int | None = None
    max_iterations: int = 3
    strategy: str = "schedule"
    k_grid: tuple[int, ...] | None = None
    range_grid: tuple[tuple[int, int], ...] | None = None

    def ladder(self) -> tuple[float, ...]:
        lad = tuple(sorted(set(self.gamma_ladder) | {self.gamma_start}, reverse=True))
        if not lad or not all(0 < g < 1 for g in lad):
            raise ValueError("gamma ladder must be non-empty and inside (0, 1)")
        return lad


def default_fixed_k(n: int) -> int:
    return max(MIN_NEIGHBOURS, min(40, n // 4))


def default_var_k(n: int) -> tuple[int, int]:
    lo = max(MIN_NEIGHBOURS, max(10, n // 40))
    hi = min(60, n // 2)
    return min(lo, hi), max(lo, hi)


@dataclass(frozen=True)
class Evaluation:
    neighbourhood: tuple[int, ...]
    gamma: float
    mip: float
    mis: float
    feasible: bool


@dataclass(frozen=True)
class TuneResult:
    config: PIMConfig
    mip: float
    mis: float
    feasible: bool
    history: tuple[Evaluation, ...] = field(repr=False, default=())


class TrainingSetEvaluator:
    """Training-set MIP / MIS of candidate configurations.

    Each training point gets an interval built from the errors of its nearest
    *other* training points, and counts as included when its own stored error
    falls inside. Because the stored error is ``y_i - f^{-i}(x_i)``, this is
    exactly the inclusion of ``y_i`` in ``f^{-i}(x_i) + error interval``.
    """

    def __init__(self, X, errors: ErrorSet, beta: float, kmax: int):
        X = np.asarray(X, dtype=float)
        n = X.shape[0]
        if len(errors) != n:
            raise ValueError("error set is not aligned with X")
        if not 0 < beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {beta}")
        self.n = n
        self.beta = beta
        self.X = X
        self.eps = errors.errors
        self.kmax = 0
        self._cache: dict = {}
        self._grow(min(kmax, n - 1))

    def _grow(self, kmax: int) -> None:
        # prefix statistics do not depend on how far the table extends
        if kmax > self.n - 1:
            raise ValueError(f"neighbourhood of {kmax} exceeds {self.n - 1} other points")
        self.kmax = kmax
        idx, _ = knn_batch(self.X, self.X, kmax, exclude=np.arange(self.n))
        self.means, self.sds = running_stats(self.eps[idx])

    def config(self, neighbourhood: tuple[int, ...], gamma: float) -> PIMConfig:
        if len(neighbourhood) == 1:
            method = FixedK(neighbourhood[0])
        else:
            method = VarK(*neighbourhood)
        return PIMConfig(self.beta, gamma, method)

    def __call__(self, neighbourhood: tuple[int, ...], gamma: float) -> Evaluation:
        key = (neighbourhood, gamma)
        if key not in self._cache:
            if max(neighbourhood) > self.kmax:
                self._grow(min(self.n - 1, max(max(neighbourhood), 2 * self.kmax)))
            cfg = self.config(neighbourhood, gamma)
            centre, half, _ = _select(self.means, self.sds, cfg)
            lower = centre - half
            upper = centre + half
            inside = (self.eps >= lower) & (self.eps <= upper)
            mip = float(np.mean(inside))
            mis = float(np.mean(upper - lower))
            self._cache[key] = Evaluation(
                neighbourhood, gamma, mip, mis, mip >= self.beta
            )
        return self._cache[key]


def _rank(ev: Evaluation):
    # feasibility, then MIS, then smaller neighbourhood, then smaller gamma
    return (not ev.feasible, ev.mis, ev.neighbourhood, ev.gamma)


def tune(
    X,
    errors: ErrorSet,
    beta: float,
    method_kind: str,
    search: SearchConfig = SearchConfig(),
    k_loess: int | None = None,
) -> TuneResult:
    """Pick neighbourhood and gamma minimizing training MIS under MIP >= beta.

    The schedule starts at ``gamma_start`` with the initial neighbourhood,
    enlarges the neighbourhood by ``k_step`` while the constraint holds and
    MIS does not increase, then walks gamma down the ladder while the
    constraint holds, for up to ``max_iterations`` rounds. The best evaluated
    point wins. When nothing is feasible the point with the largest MIP is
    returned with ``feasible=False``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    kmax_allowed = n - 1
    if kmax_allowed < MIN_NEIGHBOURS:
        raise ValueError(f"need more than {MIN_NEIGHBOURS} training points")
    ladder = search.ladder()
    if search.k_step < 1:
        raise ValueError("k_step must be positive")

    if method_kind == "fixedk":
        if search.strategy == "grid":
            grid = [(k,) for k in (search.k_grid or ())
                    if MIN_NEIGHBOURS <= k <= kmax_allowed]
        else:
            k0 = search.k0 if search.k0 is not None else default_fixed_k(n)
            grid = [(min(max(k0, MIN_NEIGHBOURS), kmax_allowed),)]
    elif method_kind == "vark":
        if search.strategy == "grid":
            grid = [tuple(r) for r in (search.range_grid or ())
                    if MIN_NEIGHBOURS <= r[0] <= r[1] <= kmax_allowed]
        else:
            lo0, hi0 = default_var_k(n)
            lo = search.min_k0 if search.min_k0 is not None else lo0
            hi = search.max_k0 if search.max_k0 is not None else hi0
            hi = min(hi, kmax_allowed)
            lo = min(max(lo, MIN_NEIGHBOURS), hi)
            grid = [(lo, hi)]
    else:
        raise ValueError(f"cannot tune method {method_kind!r}")
    if not grid:
        raise ValueError("search grid is empty after validation")

    if search.strategy == "grid":
        kmax = max(max(g) for g in grid)
        ev = TrainingSetEvaluator(X, errors, beta, kmax)
        history = [ev(g, gamma) for g in grid for gamma in ladder]
    elif search.strategy == "schedule":
        ev = TrainingSetEvaluator(X, errors, beta, max(grid[0]))
        history = _schedule(ev, grid[0], ladder, search, kmax_allowed)
    else:
        raise ValueError(f"unknown strategy {search.strategy!r}")

    feasible = [h for h in history if h.feasible]
    if feasible:
        best = min(feasible, key=_rank)
    else:
        best = max(history, key=lambda h: (h.mip, -h.mis))
    cfg = replace(ev.config(best.neighbourhood, best.gamma), k_loess=k_loess)
    return TuneResult(cfg, best.mip, best.mis, best.feasible, tuple(history))


def _shift(nb: tuple[int, ...], step: int, kmax: int) -> tuple[int, ...] | None:
    moved = tuple(k + step for k in nb)
    if moved[0] < MIN_NEIGHBOURS or moved[-1] > kmax:
        return None
    return moved


def _schedule(ev, start, ladder, search: SearchConfig, kmax: int) -> list[Evaluation]:
    history: list[Evaluation] = []

    def evaluate(nb, g):
        r = ev(nb, g)
        history.append(r)
        return r

    g_index = ladder.index(search.gamma_start)
    cur = evaluate(start, ladder[g_index])
    # an infeasible start shrinks the neighbourhood: fewer points, wider intervals
    while not cur.feasible:
        nb = _shift(cur.neighbourhood, -search.k_step, kmax)
        if nb is None:
            break
        cur = evaluate(nb, cur.gamma)

    for _ in range(search.max_iterations):
        before = cur
        while cur.feasible:
            nb = _shift(cur.neighbourhood, search.k_step, kmax)
            if nb is None:
                break
            r = evaluate(nb, cur.gamma)
            if r.feasible and r.mis <= cur.mis:
                cur = r
            else:
                break
        g_index = ladder.index(cur.gamma)
        while cur.feasible and g_index + 1 < len(ladder):
            g_index += 1
            r = evaluate(cur.neighbourhood, ladder[g_index])
            if r.feasible and r.mis <= cur.mis:
                cur = r
            else:
                break
        if cur == before:
            break
    return history
