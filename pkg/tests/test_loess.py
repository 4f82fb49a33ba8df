import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predint import loess


def _affine(n, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, size=(n, 2))
    return X, 2 * X[:, 0] - 3 * X[:, 1] + 1


@pytest.mark.parametrize("k", [4, 10, 60])
def test_affine_reproduced(k):
    X, y = _affine(60)
    model = loess.fit(X, y, k)
    Q = np.random.default_rng(1).uniform(-2, 2, size=(20, 2))
    np.testing.assert_allclose(model.predict(Q), 2 * Q[:, 0] - 3 * Q[:, 1] + 1, atol=1e-9)


def test_predict_scalar_and_constant_data():
    X = np.linspace(0, 1, 30)[:, None]
    model = loess.fit(X, np.full(30, 7.0), 5)
    assert loess.predict(model, [0.33]) == pytest.approx(7.0)


def test_matches_direct_weighted_fit():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 1))
    y = np.sin(X[:, 0]) + rng.normal(scale=0.1, size=40)
    q = np.array([0.2])
    k = 12
    d = np.abs(X[:, 0] - q[0])
    nb = np.argsort(d, kind="stable")[:k]
    u = d[nb] / d[nb].max()
    w = (1 - u**3) ** 3
    A = np.column_stack([np.ones(k), X[nb, 0] - q[0]])
    coef = np.linalg.solve(A.T @ (w[:, None] * A), A.T @ (w * y[nb]))
    assert loess.predict(loess.fit(X, y, k), q) == pytest.approx(coef[0], rel=1e-10)


def test_duplicate_points_uniform_weights():
    X = np.zeros((10, 1))
    y = np.arange(10.0)
    X = np.vstack([X, [[5.0]]])
    y = np.append(y, 100.0)
    # all 10 nearest neighbours sit on the query: plain mean of their responses
    assert loess.predict(loess.fit(X, y, 10), [0.0]) == pytest.approx(4.5)


def test_fit_validates():
    X, y = _affine(20)
    with pytest.raises(ValueError):
        loess.fit(X, y, 3)
    with pytest.raises(ValueError):
        loess.fit(X, y, 21)
    with pytest.raises(ValueError):
        loess.fit(X, y[:-1], 5)
    y2 = y.copy()
    y2[0] = np.nan
    with pytest.raises(ValueError):
        loess.fit(X, y2, 5)


def test_model_data_read_only():
    X, y = _affine(20)
    model = loess.fit(X, y, 5)
    X[0, 0] = 99.0
    assert model.X[0, 0] != 99.0
    with pytest.raises(ValueError):
        model.y[0] = 1.0


def test_loo_errors_equal_refits():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(25, 1))
    y = X[:, 0] ** 2 + rng.normal(scale=0.2, size=25)
    es = loess.cv_errors(X, y, 8, "loo")
    for i in range(25):
        keep = np.arange(25) != i
        ref = loess.predict(loess.fit(X[keep], y[keep], 8), X[i])
        assert es.errors[i] == pytest.approx(y[i] - ref, abs=1e-10)
    assert es.scheme == "loo" and not es.clamped


def test_loo_clamps_at_full_bandwidth():
    X, y = _affine(20)
    es = loess.cv_errors(X, y, 20, "loo")
    assert es.clamped
    np.testing.assert_allclose(es.errors, 0.0, atol=1e-9)


def test_kfold_errors_equal_refits():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(50, 2))
    y = X.sum(axis=1) + rng.normal(size=50)
    es = loess.cv_errors(X, y, 10, "kfold", folds=5, seed=7)
    for test in loess.fold_assignment(50, 5, 7):
        train = np.setdiff1d(np.arange(50), test)
        m = loess.fit(X[train], y[train], 10)
        np.testing.assert_allclose(es.errors[test], y[test] - m.predict(X[test]), atol=1e-12)
    assert es.sse == pytest.approx(np.sqrt(np.mean(es.errors**2)))


def test_unknown_scheme():
    X, y = _affine(20)
    with pytest.raises(ValueError):
        loess.cv_errors(X, y, 5, "bootstrap")


@settings(max_examples=50)
@given(st.integers(2, 200), st.integers(2, 20), st.integers(0, 10**6))
def test_fold_partition(n, k, seed):
    if k > n:
        with pytest.raises(ValueError):
            loess.fold_assignment(n, k, seed)
        return
    folds = loess.fold_assignment(n, k, seed)
    allidx = np.concatenate(folds)
    assert sorted(allidx.tolist()) == list(range(n))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_default_scheme():
    assert loess.default_scheme(500) == "loo"
    assert loess.default_scheme(501) == "kfold"


def test_select_bandwidth_prefers_smaller_on_tie():
    X, y = _affine(40)
    # noise-free affine: every candidate has (numerically) zero error
    scores = loess.cv_scores(X, y, [10, 20])
    best = loess.select_bandwidth(X, y, [20, 10])
    assert best == min(scores, key=lambda k: (scores[k], k))
    with pytest.raises(ValueError):
        loess.select_bandwidth(X, y, [])


def test_select_bandwidth_picks_cv_minimum():
    rng = np.random.default_rng(6)
    X = rng.uniform(-3, 3, size=(200, 1))
    y = np.sin(2 * X[:, 0]) + rng.normal(scale=0.1, size=200)
    scores = loess.cv_scores(X, y, [5, 15, 150])
    assert loess.select_bandwidth(X, y, [5, 15, 150]) == min(scores, key=scores.get)
    assert scores[150] > scores[15]
