import numpy as np
import pytest
from scipy import integrate

from dirichlet_dpp import _pycore
from dirichlet_dpp.estimator import fourier_table
from dirichlet_dpp.testfuncs import (
    TestFunctionSpec,
    coefficient_table,
    eval_test_function,
    integrand,
    known_integral,
    parse_spec,
)

try:
    from dirichlet_dpp import _core
except ImportError:
    _core = None


def quad1(spec):
    f = lambda t: float(eval_test_function(spec, np.array([[t]]))[0])  # noqa: E731
    pts = [0.5 + (2 * k + 1) / 10 for k in range(-3, 3) if 0 < 0.5 + (2 * k + 1) / 10 < 1]
    return integrate.quad(f, 0, 1, points=pts + [0.5], limit=400, epsabs=1e-13)[0]


@pytest.mark.parametrize("spec", [
    TestFunctionSpec("bump"),
    TestFunctionSpec("mixcos"),
    TestFunctionSpec("gamma_norm", gamma=0.75),
    TestFunctionSpec("gamma_norm", gamma=2.0),
    TestFunctionSpec("constant"),
    TestFunctionSpec("cosine", frequency=3),
])
def test_one_dimensional_integrals(spec):
    assert quad1(spec) == pytest.approx(known_integral(spec), abs=1e-10)


@pytest.mark.parametrize("family,kw", [("bump", {}), ("mixcos", {}), ("gamma_norm", {"gamma": 0.5})])
def test_two_dimensional_integrals(family, kw):
    spec = TestFunctionSpec(family, dim=2, **kw)
    # periodic trapezoid on a fine grid; these integrands are smooth enough
    g = (np.arange(1024) + 0.5) / 1024
    X, Y = np.meshgrid(g, g, indexing="ij")
    vals = eval_test_function(spec, np.stack([X.ravel(), Y.ravel()], axis=1))
    assert vals.mean() == pytest.approx(1.0, abs=1e-5)


def test_h_gamma_has_zero_mean_and_matches_direct_sum():
    spec = TestFunctionSpec("h_gamma", gamma=0.875, truncation_J=500)
    t = np.linspace(0, 1, 37, endpoint=False)
    j = np.arange(1, 501)
    direct = (np.cos(2 * np.pi * np.outer(t - 0.5, j)) / (2 * np.pi * j**0.875)).sum(axis=1)
    assert np.allclose(eval_test_function(spec, t), direct, atol=1e-12)
    assert np.mean(eval_test_function(spec, np.arange(2048) / 2048)) == pytest.approx(0, abs=1e-12)


@pytest.mark.skipif(_core is None, reason="compiled core not built")
def test_h_gamma_backends_agree(rng):
    t = rng.random(100) - 0.5
    w = 1 / (2 * np.pi * np.arange(1, 20001) ** 0.6)
    assert np.allclose(_core.hgamma_sum(t, w), _pycore.hgamma_sum(t, w), atol=1e-11)
    assert _core.hgamma_sum(np.array([]), w).shape == (0,)


def test_h_gamma_exact_coefficients_match_fft():
    spec = TestFunctionSpec("h_gamma", gamma=0.75, truncation_J=40)
    exact = coefficient_table(spec, 40)
    fft = fourier_table(integrand(spec), 40, grid=256)
    for j in (-40, -7, -1, 1, 2, 39):
        assert exact[[j]] == pytest.approx(fft[[j]], abs=1e-13)
    assert exact[[3]] == pytest.approx(-1 / (4 * np.pi * 3**0.75))


@pytest.mark.parametrize("spec", [
    TestFunctionSpec("bump", dim=2),
    TestFunctionSpec("mixcos", dim=2),
    TestFunctionSpec("gamma_norm", dim=2, gamma=1.5),
    TestFunctionSpec("cosine", dim=2, frequency=2),
])
def test_structured_tables_match_generic_fft(spec):
    fast = coefficient_table(spec, 6, grid=1 << 12)
    slow = fourier_table(integrand(spec), 6, grid=512)
    for j, c in zip(slow.indices.tolist(), slow.coeffs):
        assert fast[j] == pytest.approx(c, abs=2e-5)


@pytest.mark.parametrize("spec,slope", [
    (TestFunctionSpec("bump"), -2.0),
    (TestFunctionSpec("mixcos"), -2.0),
    (TestFunctionSpec("gamma_norm", gamma=0.75), -1.75),
    (TestFunctionSpec("gamma_norm", gamma=0.25), -1.25),
])
def test_coefficient_decay_matches_smoothness(spec, slope):
    tbl = coefficient_table(spec, 400)
    j = np.arange(41, 401, 2)  # odd indices avoid the zeros of mixcos
    mags = np.array([abs(tbl[[k]]) for k in j])
    fit = np.polyfit(np.log(j), np.log(mags), 1)[0]
    assert fit == pytest.approx(slope, abs=0.1)
    # decay |j|^{-1/2-s} is consistent with the recorded Sobolev index
    assert -0.5 - spec.smoothness_class == pytest.approx(slope, abs=1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        TestFunctionSpec("nope")
    with pytest.raises(ValueError):
        TestFunctionSpec("h_gamma", gamma=0.5)
    with pytest.raises(ValueError):
        TestFunctionSpec("h_gamma", dim=2, gamma=0.8)
    with pytest.raises(ValueError):
        TestFunctionSpec("gamma_norm")
    with pytest.raises(ValueError):
        TestFunctionSpec("bump", dim=0)


def test_eval_dimension_check():
    with pytest.raises(ValueError):
        eval_test_function(TestFunctionSpec("bump", dim=2), np.zeros((3, 3)))


def test_parse_spec():
    s = parse_spec("family=gamma_norm gamma=0.75 d=2")
    assert s == TestFunctionSpec("gamma_norm", dim=2, gamma=0.75)
    assert parse_spec("family=h_gamma, gamma=0.875, J=1000").truncation_J == 1000
    assert parse_spec(family="bump", dim=3).dim == 3
    for bad in ("gamma=1", "family=bump colour=red", "family=bump oops"):
        with pytest.raises(ValueError):
            parse_spec(bad)


def test_names_and_metadata():
    s = TestFunctionSpec("h_gamma", gamma=0.875)
    assert "h_gamma" in s.name and s.smoothness_class == pytest.approx(0.375)
    assert integrand(s).iota == 1 and integrand(s).smoothness_class == s.smoothness_class
    assert TestFunctionSpec("constant").smoothness_class == np.inf
