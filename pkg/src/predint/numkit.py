"""Numerical primitives: kernel weights, nearest neighbours, weighted least
squares and quantile functions of the normal and chi-square distributions.

Everything here is a pure function of its inputs. The quantile functions are
computed by safeguarded Newton iteration on series / continued-fraction CDF
evaluations, so arbitrary probabilities and degrees of freedom are supported.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

#: Gram matrix condition number above which a WLS fit is regularized.
RIDGE_CONDITION = 1e12
#: Tikhonov factor, relative to the mean diagonal of the weighted Gram matrix.
RIDGE_SCALE = 1e-8

# Element budget for one chunk of the brute-force distance computation.
_KNN_CHUNK_ELEMENTS = 4_000_000


def _check_finite(name: str, a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or Inf")


# ---------------------------------------------------------------------------
# kernel
# ---------------------------------------------------------------------------


def tricube(u):
    """Tricube kernel ``(1 - u**3)**3`` on ``[0, 1)``, zero elsewhere.

    Accepts a scalar or an array of nonnegative values and returns the same
    shape (a Python float for scalar input).
    """
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tricube argument must be finite")
    if np.any(arr < 0):
        raise ValueError("tricube argument must be nonnegative")
    w = np.where(arr < 1.0, (1.0 - arr**3) ** 3, 0.0)
    if w.ndim == 0:
        return float(w)
    return w


# ---------------------------------------------------------------------------
# nearest neighbours
# ---------------------------------------------------------------------------


def _smallest_stable(d2: np.ndarray, kk: int) -> np.ndarray:
    """Column indices of the ``kk`` smallest entries per row, ascending, with
    ties broken by the lower index (same result as a stable full argsort)."""
    nrow, ncol = d2.shape
    if kk >= ncol or ncol <= 64:
        return np.argsort(d2, axis=1, kind="stable")[:, :kk]
    part = np.argpartition(d2, kk - 1, axis=1)[:, :kk]
    vals = np.take_along_axis(d2, part, axis=1)
    kth = vals.max(axis=1)
    # lexsort on (index, value) orders the candidates as a stable sort would
    order = np.lexsort((part, vals), axis=1)
    out = np.take_along_axis(part, order, axis=1)
    # rows where the k-th value is tied with an excluded entry need a full sort
    ambiguous = np.count_nonzero(d2 <= kth[:, None], axis=1) > kk
    if np.any(ambiguous):
        out[ambiguous] = np.argsort(d2[ambiguous], axis=1, kind="stable")[:, :kk]
    return out


def knn_batch(
    points: np.ndarray,
    queries: np.ndarray,
    k: int,
    exclude: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force k nearest neighbours under the Euclidean norm.

    Parameters
    ----------
    points : (n, p) array
    queries : (m, p) array
    k : int
        Number of neighbours per query, ``1 <= k <= n`` (``n - 1`` when
        ``exclude`` is given).
    exclude : (m,) int array, optional
        For each query, one index of ``points`` that must not be returned
        (used for leave-one-out evaluation on the training set itself).

    Returns
    -------
    idx : (m, k) int array
        Neighbour indices ordered by ascending distance; ties go to the lower
        index.
    dist : (m, k) float array
        The matching Euclidean distances.
    """
    points = np.asarray(points, dtype=float)
    queries = np.asarray(queries, dtype=float)
    if points.ndim != 2 or queries.ndim != 2:
        raise ValueError("points and queries must be 2-D")
    n, p = points.shape
    if queries.shape[1] != p:
        raise ValueError(f"query dimension {queries.shape[1]} != {p}")
    limit = n - 1 if exclude is not None else n
    if not 1 <= k <= limit:
        raise ValueError(f"k={k} outside [1, {limit}]")
    _check_finite("points", points)
    _check_finite("queries", queries)

    m = queries.shape[0]
    kk = k + 1 if exclude is not None else k
    idx = np.empty((m, k), dtype=np.intp)
    dist = np.empty((m, k), dtype=float)
    step = max(1, _KNN_CHUNK_ELEMENTS // max(1, n * p))
    for start in range(0, m, step):
        stop = min(m, start + step)
        diff = points[None, :, :] - queries[start:stop, None, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        order = _smallest_stable(d2, kk)
        if exclude is not None:
            keep = order != np.asarray(exclude[start:stop])[:, None]
            keep &= np.cumsum(keep, axis=1) <= k
            order = order[keep].reshape(stop - start, k)
        idx[start:stop] = order
        dist[start:stop] = np.sqrt(np.take_along_axis(d2, order, axis=1))
    return idx, dist


def knn(points: np.ndarray, query: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest rows of ``points`` to ``query``."""
    query = np.asarray(query, dtype=float).reshape(1, -1)
    idx, _ = knn_batch(points, query, k)
    return idx[0]


# ---------------------------------------------------------------------------
# weighted least squares
# ---------------------------------------------------------------------------


class WLSFit(NamedTuple):
    coef: np.ndarray
    regularized: bool
    condition: float


def wls_fit_batch(
    designs: np.ndarray, y: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Solve a stack of weighted least-squares problems.

    ``designs`` has shape (b, m, q), ``y`` and ``w`` shape (b, m). Each
    problem is solved through the SVD of the root-weighted design. When the
    weighted Gram matrix has condition number above ``RIDGE_CONDITION`` a
    ridge term ``RIDGE_SCALE * mean(diag(G))`` is added and the problem is
    flagged.

    Returns ``(coef, regularized)`` with shapes (b, q) and (b,).
    """
    designs = np.asarray(designs, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if designs.ndim != 3 or y.shape != designs.shape[:2] or w.shape != y.shape:
        raise ValueError("shape mismatch between design, response and weights")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if np.any(np.sum(w > 0, axis=1) == 0):
        raise ValueError("every problem needs at least one positive weight")

    sw = np.sqrt(w)
    a = designs * sw[:, :, None]
    r = y * sw
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    smax = s[:, 0]
    smin = s[:, -1]
    with np.errstate(divide="ignore"):
        cond = np.where(smin > 0, (smax / np.where(smin > 0, smin, 1.0)) ** 2, np.inf)
    regularized = cond > RIDGE_CONDITION
    # trace(G) = sum of squared singular values
    lam = np.where(regularized, RIDGE_SCALE * np.sum(s**2, axis=1) / s.shape[1], 0.0)
    denom = s**2 + lam[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        filt = np.where(denom > 0, s / np.where(denom > 0, denom, 1.0), 0.0)
    ur = np.einsum("bmq,bm->bq", u, r)
    coef = np.einsum("bqk,bq->bk", vt, filt * ur)
    return coef, regularized


def wls_fit(design: np.ndarray, y: np.ndarray, w: np.ndarray) -> WLSFit:
    """Minimize ``sum_i w_i (y_i - x_i @ beta)**2``.

    ``design`` is (m, q) and should already carry the intercept column.
    """
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if design.ndim != 2 or design.shape[0] != y.shape[0] or w.shape != y.shape:
        raise ValueError("shape mismatch between design, response and weights")
    for name, a in (("design", design), ("y", y), ("w", w)):
        _check_finite(name, a)
    if np.count_nonzero(w > 0) < design.shape[1]:
        raise ValueError(
            f"need at least {design.shape[1]} positively weighted rows"
        )
    coef, reg = wls_fit_batch(design[None], y[None], w[None])
    sw = np.sqrt(w)[:, None] * design
    s = np.linalg.svd(sw, compute_uv=False)
    cond = float((s[0] / s[-1]) ** 2) if s[-1] > 0 else math.inf
    return WLSFit(coef[0], bool(reg[0]), cond)


# ---------------------------------------------------------------------------
# normal distribution
# ---------------------------------------------------------------------------


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / SQRT2)


def normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / SQRT2PI


# Acklam's rational approximation, used only as the starting point.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)


def _acklam(p: float) -> float:
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        return num / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > 1.0 - 0.02425:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    return num / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def _lower_normal_quantile(p: float) -> float:
    # p <= 0.5; refine on the lower tail where the CDF has full relative precision
    z = _acklam(p)
    for _ in range(50):
        f = normal_cdf(z) - p
        dens = normal_pdf(z)
        if dens == 0.0:
            break
        # Halley step
        t = f / dens
        dz = t / (1.0 + 0.5 * z * t)
        z -= dz
        if abs(dz) <= 1e-15 * max(1.0, abs(z)):
            break
    return z


def normal_quantile(p: float) -> float:
    """Standard normal quantile ``z`` such that ``Phi(z) = p``."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return _lower_normal_quantile(p)
    return -_lower_normal_quantile(1.0 - p)


# ---------------------------------------------------------------------------
# chi-square distribution
# ---------------------------------------------------------------------------

_GAMMA_EPS = 1e-16
_GAMMA_MAXITER = 200_000


def _log_gamma_prefix(a: float, x: float) -> float:
    return a * math.log(x) - x - math.lgamma(a)


def _gamma_p_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_GAMMA_MAXITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    return total * math.exp(_log_gamma_prefix(a, x))


def _gamma_q_contfrac(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAXITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return math.exp(_log_gamma_prefix(a, x)) * h


def regularized_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function ``P(a, x)``."""
    if a <= 0:
        raise ValueError("shape must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _gamma_p_series(a, x))
    return max(0.0, 1.0 - _gamma_q_contfrac(a, x))


def chisq_cdf(x: float, dof: float) -> float:
    if x <= 0:
        return 0.0
    return regularized_gamma_p(0.5 * dof, 0.5 * x)


def chisq_pdf(x: float, dof: float) -> float:
    if x <= 0:
        return 0.0
    a = 0.5 * dof
    return math.exp((a - 1.0) * math.log(x) - 0.5 * x - a * math.log(2.0) - math.lgamma(a))


def chisq_quantile(p: float, dof: int) -> float:
    """Chi-square quantile with ``dof`` degrees of freedom.

    Wilson-Hilferty gives the start point, then Newton steps are kept inside a
    bisection bracket that is tightened on every evaluation.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if not dof >= 1 or not math.isfinite(dof):
        raise ValueError(f"degrees of freedom must be >= 1, got {dof}")
    dof = float(dof)

    z = normal_quantile(p)
    h = 2.0 / (9.0 * dof)
    x = dof * max(1.0 - h + z * math.sqrt(h), 0.05) ** 3

    lo, hi = 0.0, math.inf
    for _ in range(400):
        f = chisq_cdf(x, dof) - p
        if f == 0.0:
            return x
        if f < 0:
            lo = x
        else:
            hi = x
        if abs(f) < 1e-14:
            return x
        dens = chisq_pdf(x, dof)
        nxt = x - f / dens if dens > 0 else math.nan
        if not (lo < nxt < hi) or not math.isfinite(nxt):
            nxt = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * x + 1.0
        if math.isfinite(hi) and hi - lo <= 4e-16 * hi:
            return nxt
        x = nxt
    return x
