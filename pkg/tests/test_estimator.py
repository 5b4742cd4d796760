import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dirichlet_dpp.estimator import (
    Estimate,
    FourierTable,
    IntegrandHandle,
    KappaVector,
    RectangleDomain,
    ci_clt,
    covariance_matrix,
    estimate_mean,
    estimate_rectangle,
    exact_variance_var1,
    exact_variance_var2,
    fourier_coeff,
    fourier_table,
    kappa_from_design,
    lift_table,
    projected_variance,
    sigma2_asymptotic,
    sigma2_hat,
)
from dirichlet_dpp.kernel import FactorVector, PointPattern, SubsetSelector
from dirichlet_dpp.sampler import batch_sample

COS = FourierTable([[-1], [1]], [0.5, 0.5], 1)


def cos_handle(iota=1):
    return IntegrandHandle(lambda x: np.cos(2 * np.pi * x[:, 0]), iota)


@st.composite
def table_and_design(draw):
    d = draw(st.integers(1, 3))
    fv = FactorVector(draw(st.lists(st.integers(1, 5), min_size=d, max_size=d)))
    bound = draw(st.integers(0, 6))
    size = draw(st.integers(1, 12))
    idx = draw(st.lists(st.tuples(*[st.integers(-bound, bound)] * d), min_size=size,
                        max_size=size, unique=True))
    re = draw(st.lists(st.floats(-2, 2), min_size=len(idx), max_size=len(idx)))
    im = draw(st.lists(st.floats(-2, 2), min_size=len(idx), max_size=len(idx)))
    return FourierTable(np.array(idx).reshape(-1, d), np.array(re) + 1j * np.array(im), d), fv


# --- exact variance ----------------------------------------------------------

@given(table_and_design())
def test_var1_equals_var2(args):
    tbl, fv = args
    v1 = exact_variance_var1(tbl, fv)
    v2 = exact_variance_var2(tbl, fv)
    scale = tbl.power().sum() / fv.N
    assert v1 == pytest.approx(v2, rel=1e-12, abs=1e-14 * max(scale, 1e-300))


@given(table_and_design())
def test_variance_nonnegative(args):
    tbl, fv = args
    assert exact_variance_var2(tbl, fv) >= -1e-12 * tbl.power().sum()


@pytest.mark.parametrize("N", [1, 2, 3, 8, 17, 64])
def test_cosine_variance_closed_form(N):
    expected = 0.0 if N == 1 else 1 / (2 * N**2)
    if N == 1:
        # F_1 = {0}; nothing is cancelled, the variance is (1/1) * 1/2
        expected = 0.5
    assert exact_variance_var2(COS, FactorVector([N])) == pytest.approx(expected, rel=1e-14)
    assert exact_variance_var1(COS, FactorVector([N])) == pytest.approx(expected, rel=1e-14)


def test_constant_has_zero_variance():
    tbl = FourierTable([[0, 0]], [3.0], 2)
    assert exact_variance_var2(tbl, FactorVector([3, 4])) == 0.0


def test_variance_dimension_check():
    with pytest.raises(ValueError):
        exact_variance_var2(COS, FactorVector([3, 3]))


def test_empirical_variance_matches_exact():
    fv = FactorVector([5])
    tbl = FourierTable([[-3], [-1], [1], [3]], [0.2, 0.5, 0.5, 0.2], 1)
    f = IntegrandHandle(lambda x: np.cos(2 * np.pi * x[:, 0]) + 0.4 * np.cos(6 * np.pi * x[:, 0]), 1)
    R = 3000
    est = [estimate_mean(f, p).value for p in batch_sample(fv, 4, R)]
    exact = exact_variance_var2(tbl, fv)
    assert abs(np.var(est, ddof=1) - exact) <= 5 * math.sqrt(2 / (R - 1)) * exact


# --- projection --------------------------------------------------------------

def test_projected_cosine_example():
    fv = FactorVector([8, 8])
    assert projected_variance(COS, SubsetSelector([1]), fv) == pytest.approx(1 / 1024, rel=1e-14)


@given(table_and_design(), st.data())
def test_projection_decomposition(args, data):
    # variance from the projected pattern = variance under the kept factors / N_{I^c}
    tbl, fv = args
    d = fv.d + 1
    extra = data.draw(st.integers(1, 4))
    pos = data.draw(st.integers(0, fv.d))
    facs = list(fv.factors)
    facs.insert(pos, extra)
    big = FactorVector(facs)
    sel = SubsetSelector([i + 1 for i in range(d) if i != pos])
    lhs = projected_variance(tbl, sel, big)
    rhs = exact_variance_var2(tbl, fv) / extra
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-14 * tbl.power().sum())


def test_lift_table():
    lifted = lift_table(COS, SubsetSelector([2]), 3)
    assert lifted.iota == 3
    assert lifted[(0, 1, 0)] == 0.5 and lifted[(1, 0, 0)] == 0
    with pytest.raises(ValueError):
        lift_table(COS, SubsetSelector([1, 2]), 3)


# --- asymptotic variance -----------------------------------------------------

@pytest.mark.parametrize("N", [2, 4, 8, 16, 32, 64, 128, 256])
def test_sigma2_hat_cosine(N):
    assert sigma2_hat(COS, FactorVector([N])) == 0.5


def test_sigma2_hat_ignores_entries_outside_FN():
    tbl = FourierTable([[-1], [1], [5]], [0.5, 0.5, 9.0], 1)
    assert sigma2_hat(tbl, FactorVector([4])) == sigma2_hat(COS, FactorVector([4]))


def test_sigma2_asymptotic_is_limit_of_scaled_variance():
    # for a trig polynomial N^{1+1/d} var -> sigma^2 with an O(1/m) gap
    tbl = FourierTable([[1, 0], [-1, 0], [1, 2], [-1, -2]], [0.5, 0.5, 0.25, 0.25], 2)
    full = SubsetSelector([1, 2])
    sigma2 = sigma2_asymptotic(tbl, full, KappaVector([1.0, 1.0]))
    gaps = []
    for m in (4, 8, 16, 32, 64):
        fv = FactorVector([m, m])
        # plug-in value equals the limit formula with kappa taken from the design
        assert sigma2_hat(tbl, fv) == pytest.approx(sigma2_asymptotic(tbl, full, kappa_from_design(fv)))
        gaps.append(abs(fv.N ** 1.5 * exact_variance_var2(tbl, fv) - sigma2))
    ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
    assert np.allclose(ratios, 2.0, rtol=0.05)


def test_kappa():
    k = kappa_from_design(FactorVector([8, 2]))
    assert k.kappas == (2.0, 0.5)
    with pytest.raises(ValueError):
        KappaVector([1.0, 0.0])


def test_covariance_matrix_properties(rng):
    kappa = KappaVector([1.0, 2.0, 0.5])
    tables, sels = [], []
    for sel in ([1], [2, 3], [1, 2, 3]):
        s = SubsetSelector(sel)
        idx = rng.integers(-3, 4, size=(6, s.iota))
        idx = np.unique(idx, axis=0)
        tables.append(FourierTable(idx, rng.normal(size=len(idx)) + 1j * rng.normal(size=len(idx)), s.iota))
        sels.append(s)
    S = covariance_matrix(tables, sels, kappa)
    assert np.allclose(S, S.conj().T)
    assert np.linalg.eigvalsh(S).min() >= -1e-10
    for t, s, v in zip(tables, sels, np.diag(S).real):
        assert v == pytest.approx(sigma2_asymptotic(t, s, kappa))


def test_covariance_of_identical_functions():
    kappa = KappaVector([1.0])
    S = covariance_matrix([COS, COS], [SubsetSelector([1])] * 2, kappa)
    assert np.allclose(S, 0.5)


# --- estimates and intervals -------------------------------------------------

def test_estimate_mean_and_projection():
    fv = FactorVector([2, 2])
    pts = np.array([[0.1, 0.2], [0.3, 0.4], [0.6, 0.7], [0.8, 0.9]])
    p = PointPattern(pts, fv, seed=1)
    f = IntegrandHandle(lambda x: x[:, 0], 1)
    e = estimate_mean(f, p, SubsetSelector([2]))
    assert e.value == pytest.approx(0.55) and e.I == (2,) and e.N == 4
    with pytest.raises(ValueError):
        estimate_mean(f, p)  # 1-d integrand on a 2-d pattern


def test_estimate_rectangle_scales_by_volume():
    fv = FactorVector([2])
    p = PointPattern([[0.25], [0.75]], fv)
    f = IntegrandHandle(lambda x: np.ones(len(x)), 1)
    e = estimate_rectangle(f, p, None, RectangleDomain([1.0], [4.0]))
    assert e.value == pytest.approx(3.0)
    with pytest.raises(ValueError):
        RectangleDomain([1.0], [1.0])


def test_ci_half_width_example():
    e = Estimate(0.01, N=100, d=1, I=(1,), sigma2_hat=0.5)
    c = ci_clt(e, 0.95)
    level, lo, hi = c.ci
    assert (hi - lo) / 2 == pytest.approx(0.013859, abs=1e-6)
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            ci_clt(e, bad)
    with pytest.raises(ValueError):
        ci_clt(Estimate(0.0, 4, 1, (1,)), 0.95)


def test_estimate_json_roundtrip():
    e = ci_clt(Estimate(0.3, N=16, d=2, I=(1, 2), sigma2_hat=0.2, seed=5), 0.9)
    back = Estimate.from_dict(__import__("json").loads(e.to_json()))
    assert back == e


def test_integrand_rejects_non_finite():
    f = IntegrandHandle(lambda x: np.where(x[:, 0] > 0, 1.0, np.nan), 1)
    with pytest.raises(ValueError):
        f(np.array([[0.0], [0.5]]))


# --- Fourier coefficients ----------------------------------------------------

def test_fourier_coeff_cosine():
    f = cos_handle()
    assert fourier_coeff(f, [1]) == pytest.approx(0.5)
    assert abs(fourier_coeff(f, [2])) < 1e-14


def test_fourier_coeff_refuses_coarse_grid():
    with pytest.raises(ValueError):
        fourier_coeff(cos_handle(), [5], grid=16)
    with pytest.raises(ValueError):
        fourier_table(cos_handle(), 5, grid=16)


def test_fourier_table_matches_single_coefficients():
    f = IntegrandHandle(lambda x: np.exp(np.sin(2 * np.pi * x[:, 0]) + np.cos(2 * np.pi * x[:, 1])), 2)
    tbl = fourier_table(f, 3, grid=64)
    for j in ([0, 0], [1, -2], [-3, 3]):
        assert tbl[j] == pytest.approx(fourier_coeff(f, j, grid=64), abs=1e-13)
    assert tbl.is_conj_symmetric(1e-12)


def test_table_csv_and_dict_roundtrip(tmp_path):
    tbl = FourierTable([[0, 1], [2, -1]], [1 + 2j, -0.5], 2)
    path = tmp_path / "t.csv"
    tbl.write_csv(path)
    back = FourierTable.read_csv(path)
    assert back.to_dict() == tbl.to_dict()
    assert FourierTable.from_dict(tbl.to_dict()).to_dict() == tbl.to_dict()
    assert tbl.support_bound == (2, 1)
    assert not tbl.is_conj_symmetric()
    with pytest.raises(ValueError):
        FourierTable([[1], [1]], [1, 2], 1)
