import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from predint.tolerance import (
    Interval,
    SampleStats,
    ToleranceSpec,
    howe_factor,
    howe_factors,
    normal_tolerance_interval,
)


def _scipy_howe(n, beta, gamma):
    z = stats.norm.ppf((1 + beta) / 2)
    return math.sqrt((n - 1) * (1 + 1 / n) * z * z / stats.chi2.ppf(1 - gamma, n - 1))


@pytest.mark.parametrize("n,beta,gamma,expected", [(20, 0.9, 0.95, 2.310), (50, 0.95, 0.95, 2.379)])
def test_howe_factor_reference_values(n, beta, gamma, expected):
    assert abs(howe_factor(n, beta, gamma) - expected) < 5e-4


@given(st.integers(2, 2000), st.floats(0.05, 0.995), st.floats(0.05, 0.995))
def test_howe_factor_matches_scipy_oracle(n, beta, gamma):
    assert howe_factor(n, beta, gamma) == pytest.approx(_scipy_howe(n, beta, gamma), rel=1e-10)


@given(st.integers(2, 500), st.floats(0.5, 0.99), st.floats(0.5, 0.99))
def test_howe_factor_monotone(n, beta, gamma):
    c = howe_factor(n, beta, gamma)
    assert howe_factor(n + 1, beta, gamma) < c
    assert howe_factor(n, min(beta + 0.005, 0.999), gamma) > c
    assert howe_factor(n, beta, min(gamma + 0.005, 0.999)) > c


def test_howe_factor_tends_to_normal_quantile():
    assert howe_factor(10**6, 0.9, 0.95) == pytest.approx(stats.norm.ppf(0.95), rel=5e-3)


@pytest.mark.parametrize("args", [(1, 0.9, 0.9), (2.5, 0.9, 0.9), (10, 1.0, 0.9), (10, 0.9, 0.0)])
def test_howe_factor_rejects(args):
    with pytest.raises(ValueError):
        howe_factor(*args)


def test_howe_factors_vector():
    np.testing.assert_array_equal(howe_factors([5, 9], 0.9, 0.9),
                                  [howe_factor(5, 0.9, 0.9), howe_factor(9, 0.9, 0.9)])


def test_interval_basics():
    iv = Interval(-1.0, 3.0)
    assert iv.width == 4.0 and iv.center == 1.0
    assert iv.contains(-1.0) and iv.contains(3.0) and not iv.contains(3.0000001)
    assert iv.shift(1.0) == Interval(0.0, 4.0)
    with pytest.raises(ValueError):
        Interval(2.0, 1.0)
    with pytest.raises(ValueError):
        Interval(0.0, math.inf)


def test_sample_stats():
    s = SampleStats.from_sample([1.0, 3.0])
    assert s.n == 2 and s.mean == 2.0 and s.sd == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError):
        SampleStats.from_sample([1.0])
    with pytest.raises(ValueError):
        ToleranceSpec(0.9, 1.0)


def test_tolerance_interval_symmetric_about_mean():
    stats_ = SampleStats(10, 5.0, 2.0)
    iv = normal_tolerance_interval(stats_, ToleranceSpec(0.9, 0.95))
    c = howe_factor(10, 0.9, 0.95)
    assert iv.center == pytest.approx(5.0)
    assert iv.width == pytest.approx(2 * c * 2.0)


def test_zero_sd_gives_point_interval():
    iv = normal_tolerance_interval(SampleStats(5, 1.5, 0.0), ToleranceSpec(0.9, 0.9))
    assert iv == Interval(1.5, 1.5)
