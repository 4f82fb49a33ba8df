"""Synthetic regression generators with closed-form conditional distributions."""

from __future__ import annotations

import numpy as np

from ..numkit import normal_quantile
from ..tolerance import Interval

KINDS = ("affine", "sine-hetero", "step")
#: Affine coefficients: intercept 1, then 2, -3, then alternating +-1.
AFFINE_INTERCEPT = 1.0


def _affine_coef(p: int) -> np.ndarray:
    base = [2.0, -3.0]
    extra = [(-1.0) ** j for j in range(max(0, p - 2))]
    return np.array((base + extra)[:p])


def true_mean(kind: str, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    x1 = X[:, 0]
    if kind == "affine":
        return X @ _affine_coef(X.shape[1]) + AFFINE_INTERCEPT
    if kind == "sine-hetero":
        return np.sin(3.0 * x1) + 0.5 * x1
    if kind == "step":
        return np.where(x1 >= 0.0, 1.0, -1.0)
    raise ValueError(f"unknown generator {kind!r}; choose from {', '.join(KINDS)}")


def true_sd(kind: str, X, noise: float = 1.0) -> np.ndarray:
    """Conditional sd. ``noise`` scales the sine-hetero profile and is the
    constant sd of the other kinds."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if kind == "sine-hetero":
        return noise * (0.1 + 0.4 * np.abs(X[:, 0]))
    if kind in ("affine", "step"):
        return np.full(X.shape[0], float(noise))
    raise ValueError(f"unknown generator {kind!r}; choose from {', '.join(KINDS)}")


def true_interval(kind: str, x, beta: float, noise: float = 1.0) -> Interval:
    """Central beta-content inter-quantile of ``Y | x``."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    z = normal_quantile((1.0 + beta) / 2.0)
    m = float(true_mean(kind, x)[0])
    s = float(true_sd(kind, x, noise)[0])
    return Interval(m - z * s, m + z * s)


def sample(kind: str, n: int, p: int = 1, noise: float = 1.0, seed: int = 0):
    """Draw ``(X, y)`` with ``x ~ U(-2, 2)^p`` and Gaussian noise."""
    if kind not in KINDS:
        raise ValueError(f"unknown generator {kind!r}; choose from {', '.join(KINDS)}")
    if n < 50:
        raise ValueError(f"need n >= 50, got {n}")
    if p < 1:
        raise ValueError("need at least one predictor")
    if not noise >= 0:
        raise ValueError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2.0, 2.0, size=(n, p))
    eps = rng.standard_normal(n)
    y = true_mean(kind, X) + true_sd(kind, X, noise) * eps
    return X, y
