"""Test integrands with known integrals.

``bump``, ``mixcos`` and ``gamma_norm`` are normalized to integrate to 1 on
``[0, 1]^d``; ``h_gamma`` is a zero-mean cosine series on ``[0, 1]``. Two
trivial families, ``constant`` and ``cosine``, are included for smoke tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from ._backend import core
from .estimator import FourierTable, IntegrandHandle, fourier_table

__all__ = [
    "FAMILIES",
    "TestFunctionSpec",
    "eval_test_function",
    "known_integral",
    "integrand",
    "coefficient_table",
    "parse_spec",
    "bump_factor",
    "mixcos_factor",
    "gamma_factor",
]

FAMILIES = ("bump", "mixcos", "gamma_norm", "h_gamma", "constant", "cosine")

DEFAULT_TRUNCATION = 100_000


def bump_factor(t):
    t = np.asarray(t, dtype=float)
    return np.exp(-0.4 / (1.0 - (t - 0.5) ** 2))


def mixcos_factor(t):
    t = np.asarray(t, dtype=float)
    return 0.1 * np.abs(np.cos(5 * np.pi * (t - 0.5))) + (t - 0.5) ** 2


def gamma_factor(t, gamma: float):
    t = np.asarray(t, dtype=float)
    return np.abs(t - 0.5) ** gamma


@lru_cache(maxsize=None)
def _bump_integral() -> float:
    val, _ = integrate.quad(bump_factor, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


@lru_cache(maxsize=None)
def _mixcos_integral() -> float:
    # |cos| has kinks where 5 pi (t - 1/2) = pi/2 mod pi
    kinks = [0.5 + (2 * k + 1) / 10 for k in range(-3, 3) if 0 < 0.5 + (2 * k + 1) / 10 < 1]
    val, _ = integrate.quad(mixcos_factor, 0.0, 1.0, points=kinks, epsabs=1e-14,
                            epsrel=1e-13, limit=200)
    return val


def _gamma_integral(gamma: float) -> float:
    return 2.0 * 0.5 ** (gamma + 1.0) / (gamma + 1.0)


@lru_cache(maxsize=8)
def _hgamma_weights(gamma: float, J: int) -> np.ndarray:
    j = np.arange(1, J + 1, dtype=float)
    return 1.0 / (2.0 * np.pi * j**gamma)


@dataclass(frozen=True)
class TestFunctionSpec:
    """A named integrand family with its parameters.

    ``dim`` is the number of coordinates the function takes. ``h_gamma`` is
    one-dimensional and needs ``gamma > 1/2``; it is the partial sum up to
    ``truncation_J``. ``gamma_norm`` needs ``gamma > 0``.
    """

    __test__ = False  # keep pytest from collecting this class

    family: str
    dim: int = 1
    gamma: float | None = None
    truncation_J: int = DEFAULT_TRUNCATION
    frequency: int = 1  # only used by "cosine"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.family == "gamma_norm" and (self.gamma is None or self.gamma <= 0):
            raise ValueError("gamma_norm needs gamma > 0")
        if self.family == "h_gamma":
            if self.gamma is None or self.gamma <= 0.5:
                raise ValueError("h_gamma needs gamma > 1/2 to be square integrable")
            if self.dim != 1:
                raise ValueError("h_gamma is one-dimensional")
            if self.truncation_J < 1:
                raise ValueError("truncation_J must be >= 1")
        if self.family == "cosine" and self.frequency < 1:
            raise ValueError("cosine frequency must be >= 1")

    @property
    def name(self) -> str:
        parts = [self.family, f"dim={self.dim}"]
        if self.gamma is not None:
            parts.append(f"gamma={self.gamma:g}")
        if self.family == "h_gamma":
            parts.append(f"J={self.truncation_J}")
        return " ".join(parts)

    @property
    def denominator(self) -> float:
        """Integral of the one-dimensional factor used for normalization."""
        if self.family == "bump":
            return _bump_integral()
        if self.family == "mixcos":
            return _mixcos_integral()
        if self.family == "gamma_norm":
            return _gamma_integral(self.gamma)
        return 1.0

    @property
    def smoothness_class(self) -> float:
        """Supremum of the Sobolev indices ``s`` the function belongs to.

        ``bump`` and ``mixcos`` have coefficients decaying like ``|j|^-2``
        as periodic functions (``bump`` has a derivative jump at the
        boundary), ``gamma_norm`` like ``|j|^{-1-gamma}``, ``h_gamma`` like
        ``|j|^-gamma``.
        """
        if self.family in ("bump", "mixcos"):
            return 1.5
        if self.family == "gamma_norm":
            return 0.5 + self.gamma
        if self.family == "h_gamma":
            return self.gamma - 0.5
        return math.inf

    @property
    def is_bounded(self) -> bool:
        # the truncated series is bounded; the infinite one is not for gamma < 1
        return True


def eval_test_function(spec: TestFunctionSpec, x) -> np.ndarray:
    """Evaluate at the rows of ``x`` (shape ``(M, dim)``; a 1-D array is ``M`` points when dim is 1)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x[:, None] if spec.dim == 1 else x[None, :]
    if x.shape[1] != spec.dim:
        raise ValueError(f"{spec.family} takes {spec.dim} coordinates, got {x.shape[1]}")
    fam = spec.family
    if fam == "bump":
        return np.prod(bump_factor(x) / spec.denominator, axis=1)
    if fam == "mixcos":
        return np.mean(mixcos_factor(x) / spec.denominator, axis=1)
    if fam == "gamma_norm":
        return np.mean(gamma_factor(x, spec.gamma) / spec.denominator, axis=1)
    if fam == "h_gamma":
        w = _hgamma_weights(float(spec.gamma), int(spec.truncation_J))
        return core.hgamma_sum(x[:, 0] - 0.5, w)
    if fam == "constant":
        return np.ones(x.shape[0])
    return np.mean(np.cos(2 * np.pi * spec.frequency * x), axis=1)


def known_integral(spec: TestFunctionSpec) -> float:
    if spec.family in ("h_gamma", "cosine"):
        return 0.0
    return 1.0


def integrand(spec: TestFunctionSpec) -> IntegrandHandle:
    return IntegrandHandle(
        evaluate=lambda x: eval_test_function(spec, x),
        iota=spec.dim,
        is_bounded=spec.is_bounded,
        smoothness_class=spec.smoothness_class,
        periodic=True,
        name=spec.name,
    )


def _factor_coefficients(spec: TestFunctionSpec, radius: int, grid: int) -> np.ndarray:
    """Coefficients ``-radius..radius`` of the normalized one-dimensional factor."""
    if spec.family == "bump":
        fn = bump_factor
    elif spec.family == "mixcos":
        fn = mixcos_factor
    else:
        fn = lambda t: gamma_factor(t, spec.gamma)  # noqa: E731
    h = IntegrandHandle(lambda x: fn(x[:, 0]) / spec.denominator, 1)
    return fourier_table(h, radius, grid).coeffs


def coefficient_table(spec: TestFunctionSpec, radius: int, grid: int = 1 << 16) -> FourierTable:
    """Fourier coefficients with ``max |j_i| <= radius``.

    Exact for ``constant``, ``cosine`` and ``h_gamma``; otherwise computed
    from the one-dimensional factor by periodic trapezoid on ``grid`` points
    and assembled using the product (bump) or average (mixcos, gamma_norm)
    structure.
    """
    d = spec.dim
    fam = spec.family
    if fam == "constant":
        return FourierTable(np.zeros((1, d), dtype=np.int64), [1.0], d)
    if fam == "cosine":
        k = spec.frequency
        idx, co = [], []
        if k <= radius:
            for i in range(d):
                for s in (-1, 1):
                    j = [0] * d
                    j[i] = s * k
                    idx.append(j)
                    co.append(0.5 / d)
        return FourierTable(np.array(idx, dtype=np.int64).reshape(-1, d), co, d)
    if fam == "h_gamma":
        j = np.arange(1, radius + 1)
        c = (-1.0) ** j / (4 * np.pi * j**spec.gamma)
        idx = np.concatenate([-j[::-1], j]).reshape(-1, 1)
        return FourierTable(idx, np.concatenate([c[::-1], c]), 1)
    if grid < 4 * (radius + 1):
        raise ValueError(f"grid {grid} too coarse for radius {radius}")
    c1 = _factor_coefficients(spec, radius, grid)
    ks = np.arange(-radius, radius + 1)
    if fam == "bump":
        mesh = np.meshgrid(*[ks] * d, indexing="ij")
        idx = np.stack([m.ravel() for m in mesh], axis=1)
        co = np.ones(idx.shape[0], dtype=complex)
        for i in range(d):
            co *= c1[idx[:, i] + radius]
        return FourierTable(idx, co, d, grid)
    # average of one-dimensional factors: support on the coordinate axes
    idx = [np.zeros(d, dtype=np.int64)]
    co = [complex(c1[radius])]
    for i in range(d):
        for k in ks:
            if k == 0:
                continue
            j = np.zeros(d, dtype=np.int64)
            j[i] = k
            idx.append(j)
            co.append(c1[k + radius] / d)
    return FourierTable(np.array(idx), co, d, grid)


def parse_spec(text: str | None = None, **kwargs) -> TestFunctionSpec:
    """Build a spec from ``"family=gamma_norm gamma=0.75 d=2"`` style text and/or keywords."""
    params = {}
    if text:
        for tok in text.replace(",", " ").split():
            if "=" not in tok:
                raise ValueError(f"expected key=value, got {tok!r}")
            k, v = tok.split("=", 1)
            params[k.strip()] = v.strip()
    params.update({k: v for k, v in kwargs.items() if v is not None})
    if "family" not in params:
        raise ValueError("function spec needs a family")
    dim = params.get("dim", params.get("d", params.get("iota", 1)))
    extra = set(params) - {"family", "dim", "d", "iota", "gamma", "J", "truncation_J", "frequency"}
    if extra:
        raise ValueError(f"unknown function parameters {sorted(extra)}")
    return TestFunctionSpec(
        family=str(params["family"]),
        dim=int(dim),
        gamma=float(params["gamma"]) if "gamma" in params else None,
        truncation_J=int(params.get("truncation_J", params.get("J", DEFAULT_TRUNCATION))),
        frequency=int(params.get("frequency", 1)),
    )
