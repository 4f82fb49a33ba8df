"""Two-sided beta-content gamma-coverage tolerance intervals for normal samples."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numkit import chisq_quantile, normal_quantile


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lower, upper]`` on the response scale."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError("interval bounds must be finite")
        if self.lower > self.upper:
            raise ValueError(f"lower {self.lower} > upper {self.upper}")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def shift(self, delta: float) -> "Interval":
        return Interval(self.lower + delta, self.upper + delta)


def _check_probability(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")


@dataclass(frozen=True)
class ToleranceSpec:
    beta: float
    gamma: float

    def __post_init__(self):
        _check_probability("beta", self.beta)
        _check_probability("gamma", self.gamma)


@dataclass(frozen=True)
class SampleStats:
    """Size, mean and sample standard deviation (divisor ``n - 1``)."""

    n: int
    mean: float
    sd: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 observations, got {self.n}")
        if not self.sd >= 0:
            raise ValueError("standard deviation must be nonnegative")

    @classmethod
    def from_sample(cls, values) -> "SampleStats":
        values = np.asarray(values, dtype=float)
        if values.ndim != 1:
            raise ValueError("sample must be one-dimensional")
        if values.size < 2:
            raise ValueError(f"need at least 2 observations, got {values.size}")
        return cls(values.size, float(np.mean(values)), float(np.std(values, ddof=1)))


@lru_cache(maxsize=65536)
def howe_factor(n: int, beta: float, gamma: float) -> float:
    """Howe's two-sided tolerance factor ``c`` for a normal sample of size ``n``.

    ``c = sqrt((n - 1) (1 + 1/n) z**2 / chi2)`` where ``z`` is the
    ``(1 + beta) / 2`` normal quantile and ``chi2`` the ``1 - gamma`` quantile
    of a chi-square with ``n - 1`` degrees of freedom.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"sample size must be an integer >= 2, got {n}")
    _check_probability("beta", beta)
    _check_probability("gamma", gamma)
    n = int(n)
    z = normal_quantile(1.0 - (1.0 - beta) / 2.0)
    chi2 = chisq_quantile(1.0 - gamma, n - 1)
    return math.sqrt((n - 1) * (1.0 + 1.0 / n) * z * z / chi2)


def howe_factors(ks, beta: float, gamma: float) -> np.ndarray:
    """Vector of Howe factors for each sample size in ``ks``."""
    return np.array([howe_factor(int(k), beta, gamma) for k in ks], dtype=float)


def normal_tolerance_interval(stats: SampleStats, spec: ToleranceSpec) -> Interval:
    c = howe_factor(stats.n, spec.beta, spec.gamma)
    half = c * stats.sd
    return Interval(stats.mean - half, stats.mean + half)
