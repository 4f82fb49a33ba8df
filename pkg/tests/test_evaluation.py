import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from predint import evaluation as ev
from predint import pim
from predint.bench import synthetic
from predint.numkit import normal_quantile


def run(lower, upper, y, beta=0.9, method="m"):
    return ev.MethodRun(method, beta, np.asarray(lower, float), np.asarray(upper, float),
                        np.asarray(y, float))


def test_mip_examples():
    assert ev.mip(run([0, 0], [1, 1], [0.5, 1.0])) == 1.0
    assert ev.mip(run([0, 0], [1, 1], [2, -1])) == 0.0
    # closed intervals: boundary counts
    assert ev.mip(run([0] * 4, [1] * 4, [0.0, 1.0, 0.5, 1.5])) == 0.75


def test_mis_and_sigma():
    r = run([0, 0], [1, 3], [0, 0])
    assert ev.mis(r) == 2.0
    assert ev.sigma_is(r) == pytest.approx(math.sqrt(2))
    same = run([0] * 5, [2.5] * 5, [0] * 5)
    assert ev.mis(same) == 2.5 and ev.sigma_is(same) == 0.0
    scaled = run([0, 0], [3, 9], [0, 0])
    assert ev.mis(scaled) == 3 * ev.mis(r)
    assert ev.sigma_is(scaled) == pytest.approx(3 * ev.sigma_is(r))
    with pytest.raises(ValueError):
        ev.sigma_is(run([0], [1], [0]))


def test_method_run_validation():
    with pytest.raises(ValueError):
        run([], [], [])
    with pytest.raises(ValueError):
        run([0, 0], [1], [0, 0])


def test_exact_widths_preferred():
    r = ev.MethodRun("m", 0.9, np.array([0.1]), np.array([0.3]), np.array([0.0]),
                     width=np.array([0.2]))
    assert ev.mis(r) == 0.2


@pytest.mark.parametrize("beta,n,pct", [(0.8, 5875, 79.14), (0.95, 5875, 94.53)])
def test_threshold_examples(beta, n, pct):
    assert abs(100 * ev.pim_threshold(beta, n) - pct) < 0.005


@given(st.floats(0.01, 0.99), st.integers(1, 10**6))
def test_threshold_below_beta_and_rising(beta, n):
    f = ev.pim_threshold(beta, n)
    assert f < beta
    assert ev.pim_threshold(beta, n + 1) > f


def test_threshold_limit_and_validation():
    assert ev.pim_threshold(0.9, 10**14) == pytest.approx(0.9, abs=1e-7)
    for args in [(1.0, 10), (0.9, 0), (0.9, 10, 1.0)]:
        with pytest.raises(ValueError):
            ev.pim_threshold(*args)


def test_pim_test_examples():
    assert not ev.pim_test(0.9235, 0.95, 5875).passed
    t = ev.pim_test(0.9631, 0.95, 5875)
    assert t.passed and abs(t.threshold - 0.9453) < 5e-5 and not t.small_sample
    assert ev.pim_test(1.0, 0.99, 10).passed
    assert ev.pim_test(1.0, 0.99, 10).small_sample


def test_egsd_examples():
    assert ev.egsd(2 * normal_quantile(0.975), 0.95) == pytest.approx(1.0, abs=1e-12)
    assert ev.egsd(3.919928, 0.95) == pytest.approx(1.0, abs=1e-6)
    assert ev.egsd(2.563103, 0.80) == pytest.approx(1.0, abs=1e-6)
    assert ev.egsd(1.0, 0.9) == pytest.approx(2 * ev.egsd(0.5, 0.9))
    for bad in (0.0, 1.0):
        with pytest.raises(ValueError):
            ev.egsd(1.0, bad)


def test_egsd_literal_variant():
    z = normal_quantile(0.95)
    assert ev.egsd(2.0, 0.8, literal=True, beta=0.9) == pytest.approx(2.0 / (2 * z * 0.8))
    with pytest.raises(ValueError):
        ev.egsd(2.0, 0.8, literal=True)


def test_normalize():
    assert ev.normalize({"a": 3.0}) == {"a": 1.0}
    assert ev.normalize({"a": 2.0, "b": 4.0}) == {"a": 0.5, "b": 1.0}
    assert ev.normalize({"a": None, "b": None}) == {"a": None, "b": None}
    with pytest.raises(ValueError):
        ev.normalize({"a": 0.0})


def test_normalized_mis_skips_failing_methods():
    rows = [
        ev.ReportRow("d", "a", 0.9, 100, mip=0.95, mis=2.0, egsd=1.0, pim_pass=True),
        ev.ReportRow("d", "b", 0.9, 100, mip=0.5, mis=0.5, egsd=0.4, pim_pass=False),
        ev.ReportRow("d", "c", 0.9, 100, mip=0.92, mis=4.0, egsd=2.0, pim_pass=True),
    ]
    failures = ev.finalize(rows)
    assert [r.normalized_mis for r in rows] == [0.5, None, 1.0]
    assert [r.normalized_egsd for r in rows] == [0.5, 0.2, 1.0]
    assert failures == {"a": None, "b": 0.9, "c": None}


def test_failure_mip():
    assert ev.failure_mip([(0.8, True), (0.9, True)]) is None
    grid = [(b, b < 0.93) for b in (0.25, 0.5, 0.8, 0.9, 0.93, 0.95)]
    assert ev.failure_mip(grid) == 0.93


@pytest.fixture(scope="module")
def hetero():
    X, y = synthetic.sample("sine-hetero", 400, 1, 1.0, 3)
    return X, y


def test_compare_single_row(hetero):
    X, y = hetero
    cfgs = {"fixedk": {0.8: pim.PIMConfig(0.8, 0.9, pim.FixedK(30), k_loess=30)}}
    rep = ev.compare(X, y, cfgs, folds=5)
    assert len(rep.rows) == 1
    row = rep.rows[0]
    assert row.valid and row.n_v == 400 and row.normalized_mis in (1.0, None)


def test_compare_identical_methods(hetero):
    X, y = hetero
    c = pim.PIMConfig(0.9, 0.9, pim.VarK(10, 40), k_loess=30)
    rep = ev.compare(X, y, {"a": {0.9: c}, "b": {0.9: c}}, folds=5)
    a, b = rep.rows
    assert (a.mip, a.mis, a.sigma_is) == (b.mip, b.mis, b.sigma_is)
    if a.pim_pass:
        assert a.normalized_mis == b.normalized_mis == 1.0
    assert a.normalized_egsd == b.normalized_egsd == 1.0


def test_fixed_k_beats_conventional_under_heteroscedasticity():
    X, y = synthetic.sample("sine-hetero", 1000, 1, 1.0, 5)
    cfgs = {"fixedk": {0.95: pim.PIMConfig(0.95, 0.9, pim.FixedK(60), k_loess=40)},
            "conventional": {0.95: pim.PIMConfig(0.95, None, pim.Conventional(), k_loess=40)}}
    rep = ev.compare(X, y, cfgs)
    assert rep.row("conventional", 0.95).mip < rep.row("fixedk", 0.95).mip
    assert rep.row("conventional", 0.95).sigma_is == 0.0


def test_compare_marks_failed_cell(hetero):
    X, y = hetero
    cfgs = {"ok": {0.9: pim.PIMConfig(0.9, 0.9, pim.FixedK(20), k_loess=30)},
            "huge": {0.9: pim.PIMConfig(0.9, 0.9, pim.FixedK(399), k_loess=30)}}
    rep = ev.compare(X, y, cfgs, folds=5)
    assert rep.row("ok", 0.9).valid
    bad = rep.row("huge", 0.9)
    assert not bad.valid and "exceeds" in bad.error and bad.mip is None


def test_compare_deterministic_and_thread_independent(hetero):
    X, y = hetero
    cfgs = {"v": {b: pim.PIMConfig(b, 0.9, pim.VarK(10, 30), k_loess=30) for b in (0.8, 0.9)}}
    one = ev.compare(X, y, cfgs, folds=5, workers=1).to_dict()
    many = ev.compare(X, y, cfgs, folds=5, workers=4).to_dict()
    assert one == many


def test_compare_requires_k_loess(hetero):
    X, y = hetero
    with pytest.raises(ValueError):
        ev.compare(X, y, {"a": {0.9: pim.PIMConfig(0.9, 0.9, pim.FixedK(10))}})
    with pytest.raises(ValueError):
        ev.compare(X, y, {})


def test_chart_series_cover_grid(hetero):
    X, y = hetero
    betas = (0.8, 0.9, 0.95)
    cfgs = {m: {b: pim.PIMConfig(b, 0.9, pim.FixedK(k), k_loess=30) for b in betas}
            for m, k in (("a", 20), ("b", 40))}
    rep = ev.compare(X, y, cfgs, folds=5)
    for kind, pts in rep.chart_series().items():
        for m in ("a", "b", "F(beta)", "nominal"):
            assert sorted(p["beta"] for p in pts if p["method"] == m) == list(betas), (kind, m)
        for p in pts:
            if p["method"] == "F(beta)":
                assert p["value"] == ev.pim_threshold(p["beta"], 400)
