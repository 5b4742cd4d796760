import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dirichlet_dpp.estimator import exact_variance_var2, FourierTable
from dirichlet_dpp.kernel import FactorVector, SubsetSelector
from dirichlet_dpp.experiments import (
    ExperimentPlan,
    PlanError,
    anderson_darling,
    convergence_result,
    expected_slope,
    holm_adjust,
    loglog_regression,
    normality_check,
    read_plan,
    run_convergence_study,
    run_projection_study,
    write_study,
)
from dirichlet_dpp.testfuncs import TestFunctionSpec

COS = TestFunctionSpec("cosine")


# --- normality ---------------------------------------------------------------

def test_anderson_darling_matches_statsmodels(rng):
    diag = pytest.importorskip("statsmodels.stats.diagnostic")
    for n in (20, 100, 2000):
        x = rng.standard_t(5, size=n)
        a2, p = anderson_darling(x)
        ref_a2, ref_p = diag.normal_ad(x)
        assert p == pytest.approx(ref_p, rel=1e-8, abs=1e-12)
        assert a2 == pytest.approx(ref_a2 * (1 + 0.75 / n + 2.25 / n**2), rel=1e-10)


def test_normality_calibrated_under_null():
    rng = np.random.default_rng(123)
    pvals = np.array([normality_check(rng.normal(size=2000))[1] for _ in range(200)])
    assert np.all((pvals >= 0) & (pvals <= 1))
    rate = np.mean(pvals < 0.05)
    assert 0.015 <= rate <= 0.095


def test_normality_detects_skew(rng):
    assert normality_check(rng.exponential(size=500))[1] < 1e-6


def test_normality_errors():
    with pytest.raises(ValueError):
        normality_check(np.ones(50))
    with pytest.raises(ValueError):
        normality_check(np.arange(10.0))


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_holm_properties(p):
    p = np.array(p)
    adj = holm_adjust(p)
    assert np.all(adj >= p - 1e-15) and np.all(adj <= 1)
    order = np.argsort(p, kind="stable")
    assert np.all(np.diff(adj[order]) >= -1e-15)


def test_holm_example():
    assert np.allclose(holm_adjust([0.01, 0.04, 0.03]), [0.03, 0.06, 0.06])


# --- regression --------------------------------------------------------------

def test_loglog_exact_power_law():
    Ns = [8, 16, 32, 64]
    rep = loglog_regression(Ns, [3.0 * n**-2 for n in Ns], -2.0)
    assert rep.slope == pytest.approx(-2.0, abs=1e-12)
    assert rep.within_tolerance and rep.ci_contains_expected
    assert rep.slope_ci[1] <= rep.slope <= rep.slope_ci[2]


def test_loglog_ci_covers_noisy_slope(rng):
    Ns = np.array([10, 20, 40, 80, 160])
    hits = 0
    for _ in range(200):
        v = Ns**-1.5 * np.exp(rng.normal(scale=0.1, size=Ns.size))
        hits += loglog_regression(Ns, v, -1.5, level=0.9).ci_contains_expected
    assert 0.84 <= hits / 200 <= 0.96


def test_loglog_rejects_nonpositive():
    with pytest.raises(ValueError):
        loglog_regression([1, 2, 3], [1.0, 0.0, 1.0], -2)


@pytest.mark.parametrize("spec,d,slope", [
    (TestFunctionSpec("bump"), 1, -2.0),
    (TestFunctionSpec("bump", dim=2), 2, -1.5),
    (TestFunctionSpec("gamma_norm", gamma=0.25), 1, -2.0),  # s = 0.75 > 1/2
    (TestFunctionSpec("h_gamma", gamma=0.875), 1, -1.75),
    (TestFunctionSpec("h_gamma", gamma=0.75), 1, -1.5),
    (TestFunctionSpec("h_gamma", gamma=1.0), 1, -2.0),  # s = 1/2 with d = 1
])
def test_expected_slope(spec, d, slope):
    assert expected_slope(spec, d) == pytest.approx(slope)


# --- studies -----------------------------------------------------------------

def test_exact_mode_cosine_slope():
    plan = ExperimentPlan(COS, d=1, N_values=[8, 16, 32, 64], mode="exact")
    reg, norm = run_convergence_study(plan)
    assert reg.slope == pytest.approx(-2.0, abs=1e-6)
    assert norm is None
    assert np.allclose(reg.variances, [1 / (2 * n**2) for n in (8, 16, 32, 64)])


def test_empirical_variance_near_exact_for_trig_polynomial():
    R = 400
    plan = ExperimentPlan(COS, d=1, N_values=[4, 6, 8], R=R, base_seed=5)
    res = convergence_result(plan)
    for N, v in zip(res.regression.N_values, res.regression.variances):
        exact = 1 / (2 * N**2)
        assert abs(v - exact) <= 5 * math.sqrt(2 / (R - 1)) * exact
    assert res.normality.method == "anderson-darling"
    assert len(res.normality.adjusted_p_values) == 3


def test_study_deterministic_and_thread_independent():
    base = dict(function=COS, d=2, N_values=[4, 9, 16], R=30, base_seed=3,
                selector=SubsetSelector([2]))
    a = convergence_result(ExperimentPlan(**base))
    b = convergence_result(ExperimentPlan(**base, threads=3))
    assert a.regression.variances == b.regression.variances


def test_projection_study_exact_mode():
    plan = ExperimentPlan(TestFunctionSpec("cosine"), d=3, N_values=[8, 27, 64], study="projection",
                          mode="exact", iotas=[1, 2, 3], base_seed=1)
    results = run_projection_study(plan)
    assert [r.iota for r in results] == [1, 2, 3]
    for r in results:
        assert r.regression.expected_slope == pytest.approx(-4 / 3)
        assert r.regression.slope == pytest.approx(-4 / 3, abs=0.05)
        assert len(r.selector) == r.iota


def test_projection_equals_full_study_when_iota_is_d():
    spec = TestFunctionSpec("cosine", dim=2)
    full = convergence_result(ExperimentPlan(spec, d=2, N_values=[4, 9, 16], R=20, base_seed=2))
    proj = run_projection_study(ExperimentPlan(spec, d=2, N_values=[4, 9, 16], R=20, base_seed=2,
                                               study="projection", iotas=[2]))
    assert proj[0].regression.variances == full.regression.variances


def test_plan_validation_collects_all_errors():
    plan = ExperimentPlan(COS, d=0, N_values=[4, 4], R=1, mode="bad", level=2.0)
    with pytest.raises(PlanError) as ei:
        plan.validate()
    assert len(ei.value.errors) >= 4


def test_read_plan(tmp_path):
    text = """
    # comment
    study = convergence
    family = gamma_norm
    gamma = 0.75
    d = 2
    N = 36, 64
    N = 100
    R = 50
    seed = 9
    """
    plan = read_plan(text, is_text=True)
    assert plan.N_values == [36, 64, 100] and plan.R == 50 and plan.base_seed == 9
    assert plan.function == TestFunctionSpec("gamma_norm", dim=2, gamma=0.75)
    p = tmp_path / "plan.txt"
    p.write_text(text)
    assert read_plan(p).N_values == [36, 64, 100]


def test_read_plan_errors():
    with pytest.raises(PlanError) as ei:
        read_plan("family = bump\nd = x\nN = 1, 2\nwhat\nseed = 1\nseed = 2\n", is_text=True)
    msg = str(ei.value)
    assert "bad value for 'd'" in msg and "expected 'key = value'" in msg and "2 times" in msg


def test_write_study(tmp_path):
    plan = ExperimentPlan(COS, d=1, N_values=[4, 8, 16], R=25, base_seed=1)
    res = convergence_result(plan)
    write_study([res], plan, tmp_path / "s.csv", tmp_path / "s.json")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "d,iota,N,empirical_variance,p_value_adjusted"
    assert len(lines) == 4
    import json

    rep = json.loads((tmp_path / "s.json").read_text())
    assert rep["results"][0]["regression"]["expected_slope"] == -2.0


def test_projection_slopes_d3_bump_exact():
    plan = ExperimentPlan(TestFunctionSpec("bump", dim=3), d=3, N_values=[27, 64, 125, 216, 343],
                          study="projection", mode="exact", base_seed=3)
    for r in run_projection_study(plan):
        assert r.regression.slope == pytest.approx(-4 / 3, abs=0.2)
