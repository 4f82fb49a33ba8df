"""Linear loess: degree-1 local regression over the K nearest neighbours with
tricube weights, plus cross-validated prediction errors and bandwidth choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numkit import knn_batch, tricube, wls_fit_batch

#: Weight given to boundary neighbours when too few points have positive weight.
BOUNDARY_WEIGHT = 1e-12
#: Below this size the error set is built by leave-one-out, above it by 10-fold.
LOO_MAX_N = 500


def _as_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, p) and y (n,) with matching n")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("data contain NaN or Inf")
    return X, y


@dataclass(frozen=True)
class LocalFit:
    """Point predictions plus per-query diagnostics."""

    values: np.ndarray
    regularized: np.ndarray
    k_used: int


@dataclass(frozen=True, eq=False)
class LoessModel:
    X: np.ndarray
    y: np.ndarray
    k_loess: int
    kernel: str = "tricube"

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def local_fit(self, Q, exclude: np.ndarray | None = None) -> LocalFit:
        """Local linear estimates at the rows of ``Q``.

        With ``exclude`` the i-th query ignores training row ``exclude[i]``
        (leave-one-out). The neighbour count is clamped to the rows available.
        """
        Q = np.asarray(Q, dtype=float)
        if Q.ndim == 1:
            Q = Q.reshape(1, -1)
        if Q.shape[1] != self.p:
            raise ValueError(f"query dimension {Q.shape[1]} != {self.p}")
        available = self.n - (1 if exclude is not None else 0)
        k = min(self.k_loess, available)
        if Q.shape[0] == 0:
            return LocalFit(np.empty(0), np.empty(0, dtype=bool), k)

        idx, dist = knn_batch(self.X, Q, k, exclude=exclude)
        b = dist[:, -1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(b > 0, dist / np.where(b > 0, b, 1.0), 0.0)
        w = tricube(u)
        # b == 0: every neighbour duplicates the query, weight them uniformly
        w = np.where(b > 0, w, 1.0)
        short = np.count_nonzero(w > 0, axis=1) < self.p + 1
        if np.any(short):
            w[short] = np.where(w[short] > 0, w[short], BOUNDARY_WEIGHT)

        design = np.empty((Q.shape[0], k, self.p + 1))
        design[:, :, 0] = 1.0
        design[:, :, 1:] = self.X[idx] - Q[:, None, :]
        coef, reg = wls_fit_batch(design, self.y[idx], w)
        return LocalFit(coef[:, 0], reg, k)

    def predict(self, Q) -> np.ndarray:
        return self.local_fit(Q).values


def fit(X, y, k_loess: int) -> LoessModel:
    """Store the training data with regression bandwidth ``k_loess``.

    Requires ``p + 2 <= k_loess <= n``.
    """
    X, y = _as_xy(X, y)
    n, p = X.shape
    if int(k_loess) != k_loess or not p + 2 <= k_loess <= n:
        raise ValueError(f"k_loess={k_loess} outside [{p + 2}, {n}]")
    X = X.copy()
    y = y.copy()
    X.setflags(write=False)
    y.setflags(write=False)
    return LoessModel(X, y, int(k_loess))


def predict(model: LoessModel, x) -> float:
    return float(model.predict(np.asarray(x, dtype=float).reshape(1, -1))[0])


# ---------------------------------------------------------------------------
# cross-validated errors
# ---------------------------------------------------------------------------


def fold_assignment(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle of ``range(n)`` cut into ``k`` contiguous blocks."""
    if k < 2 or k > n:
        raise ValueError(f"number of folds must lie in [2, {n}], got {k}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(block) for block in np.array_split(perm, k)]


@dataclass(frozen=True, eq=False)
class ErrorSet:
    """Out-of-sample prediction errors ``y_i - f^{-i}(x_i)``, index-aligned."""

    errors: np.ndarray
    scheme: str
    folds: int | None = None
    seed: int | None = None
    clamped: bool = False
    regularized: int = 0
    predictions: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.errors.shape[0]

    @property
    def mse(self) -> float:
        return float(np.mean(self.errors**2))

    @property
    def sse(self) -> float:
        """Root of the cross-validated mean squared error."""
        return float(np.sqrt(self.mse))


def default_scheme(n: int) -> str:
    return "kfold" if n > LOO_MAX_N else "loo"


def cv_errors(
    X, y, k_loess: int, scheme: str = "loo", folds: int = 10, seed: int = 42
) -> ErrorSet:
    """Leave-one-out or k-fold prediction errors for every training row."""
    X, y = _as_xy(X, y)
    n, p = X.shape
    if not p + 2 <= k_loess <= n:
        raise ValueError(f"k_loess={k_loess} outside [{p + 2}, {n}]")
    preds = np.empty(n)
    if scheme == "loo":
        model = LoessModel(X, y, int(k_loess))
        lf = model.local_fit(X, exclude=np.arange(n))
        preds[:] = lf.values
        clamped = lf.k_used < k_loess
        nreg = int(np.count_nonzero(lf.regularized))
        folds_used, seed_used = None, None
    elif scheme == "kfold":
        clamped = False
        nreg = 0
        for test in fold_assignment(n, folds, seed):
            train = np.setdiff1d(np.arange(n), test, assume_unique=True)
            model = LoessModel(X[train], y[train], int(k_loess))
            lf = model.local_fit(X[test])
            preds[test] = lf.values
            clamped |= lf.k_used < k_loess
            nreg += int(np.count_nonzero(lf.regularized))
        folds_used, seed_used = folds, seed
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    errors = y - preds
    errors.setflags(write=False)
    return ErrorSet(errors, scheme, folds_used, seed_used, bool(clamped), nreg, preds)


def cv_scores(
    X, y, candidates: Sequence[int], folds: int = 10, seed: int = 42
) -> dict[int, float]:
    """Mean squared k-fold CV error for each candidate bandwidth."""
    return {
        int(k): cv_errors(X, y, int(k), "kfold", folds, seed).mse for k in candidates
    }


def select_bandwidth(
    X, y, candidates: Sequence[int], folds: int = 10, seed: int = 42
) -> int:
    """Candidate with the smallest k-fold CV mean squared error; ties go to
    the smaller K."""
    if len(candidates) == 0:
        raise ValueError("empty candidate list")
    scores = cv_scores(X, y, sorted(set(int(k) for k in candidates)), folds, seed)
    return min(scores, key=lambda k: (scores[k], k))
