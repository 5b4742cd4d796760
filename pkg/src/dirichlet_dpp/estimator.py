"""Integral estimates from Dirichlet DPP patterns and their variances.

Variances are computed from a :class:`FourierTable`, a finite set of Fourier
coefficients ``f_hat(j) = int f(u) exp(-2 i pi j.u) du``. Every infinite sum
over frequencies is truncated to the table's support.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .kernel import FactorVector, PointPattern, RectIndexSet, SubsetSelector

__all__ = [
    "IntegrandHandle",
    "FourierTable",
    "RectangleDomain",
    "Estimate",
    "KappaVector",
    "estimate_mean",
    "estimate_rectangle",
    "fourier_coeff",
    "fourier_table",
    "lift_table",
    "exact_variance_var1",
    "exact_variance_var2",
    "projected_variance",
    "sigma2_asymptotic",
    "sigma2_hat",
    "ci_clt",
    "covariance_matrix",
    "kappa_from_design",
]


@dataclass(frozen=True)
class IntegrandHandle:
    """A real integrand on ``[0, 1]^iota``.

    ``evaluate`` takes an ``(M, iota)`` array and returns ``M`` values.
    ``smoothness_class`` is the Sobolev index ``s`` and is metadata only: the
    variance of the estimator is ``O(N^{-1-2s/d})`` for ``0 < s < 1/2`` and
    ``~ sigma^2 N^{-1-1/d}`` for ``s > 1/2`` (``s = 1/2`` included when ``d = 1``).
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    iota: int
    is_bounded: bool = True
    smoothness_class: float | None = None
    periodic: bool = True
    name: str = ""

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.iota == 1 else x[None, :]
        if x.shape[1] != self.iota:
            raise ValueError(f"integrand takes {self.iota} coordinates, got {x.shape[1]}")
        vals = np.asarray(self.evaluate(x), dtype=float).reshape(x.shape[0])
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise ValueError(f"non-finite integrand value at {x[bad].tolist()}")
        return vals


class FourierTable:
    """Finite map from multi-indices in ``Z^iota`` to complex coefficients."""

    def __init__(self, indices, coeffs, iota: int | None = None, grid: int | None = None):
        idx = np.asarray(indices, dtype=np.int64)
        if idx.ndim == 1:
            idx = idx.reshape(-1, iota or 1)
        if iota is None:
            iota = idx.shape[1]
        if idx.shape[1] != iota:
            raise ValueError(f"indices have {idx.shape[1]} columns, expected {iota}")
        c = np.asarray(coeffs, dtype=complex).reshape(-1)
        if c.shape[0] != idx.shape[0]:
            raise ValueError("indices and coefficients differ in length")
        if len({tuple(r) for r in idx.tolist()}) != idx.shape[0]:
            raise ValueError("duplicate multi-index in Fourier table")
        self.indices = idx
        self.coeffs = c
        self.iota = int(iota)
        # quadrature points per axis used to compute the coefficients, if any
        self.grid = grid

    @classmethod
    def from_dict(cls, entries: Mapping, iota: int | None = None) -> "FourierTable":
        keys = [tuple(np.atleast_1d(k).tolist()) for k in entries]
        if iota is None:
            iota = len(keys[0]) if keys else 1
        return cls(np.array(keys, dtype=np.int64).reshape(-1, iota), list(entries.values()), iota)

    def to_dict(self) -> dict:
        return {tuple(int(v) for v in j): complex(c) for j, c in zip(self.indices, self.coeffs)}

    def __len__(self) -> int:
        return self.coeffs.size

    def __getitem__(self, j) -> complex:
        j = tuple(np.atleast_1d(j).tolist())
        hit = np.flatnonzero(np.all(self.indices == np.asarray(j), axis=1))
        return complex(self.coeffs[hit[0]]) if hit.size else 0j

    @property
    def support_bound(self) -> tuple[int, ...]:
        if len(self) == 0:
            return (0,) * self.iota
        return tuple(int(v) for v in np.abs(self.indices).max(axis=0))

    def is_conj_symmetric(self, tol: float = 1e-12) -> bool:
        """``f_hat(-j) == conj(f_hat(j))`` for every entry, as for a real function."""
        d = self.to_dict()
        for j, c in d.items():
            mirror = d.get(tuple(-v for v in j), 0j)
            if abs(mirror - np.conj(c)) > tol * max(1.0, abs(c)):
                return False
        return True

    def restrict(self, fv: FactorVector) -> "FourierTable":
        """Entries inside ``F_N = {|j_i| <= n_i - 1}``."""
        n = np.asarray(fv.factors)
        keep = np.all(np.abs(self.indices) <= n - 1, axis=1)
        return FourierTable(self.indices[keep], self.coeffs[keep], self.iota, self.grid)

    def power(self) -> np.ndarray:
        return self.coeffs.real**2 + self.coeffs.imag**2

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"j{i}" for i in range(1, self.iota + 1)] + ["re", "im"])
            for j, c in zip(self.indices, self.coeffs):
                w.writerow([str(int(v)) for v in j] + [f"{c.real:.17g}", f"{c.imag:.17g}"])

    @classmethod
    def read_csv(cls, path) -> "FourierTable":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: empty coefficient table")
        iota = len(rows[0]) - 2
        idx = [[int(v) for v in r[:iota]] for r in rows]
        co = [complex(float(r[iota]), float(r[iota + 1])) for r in rows]
        return cls(np.array(idx, dtype=np.int64).reshape(-1, iota), co, iota)

    def __repr__(self) -> str:
        return f"FourierTable(iota={self.iota}, entries={len(self)}, support={self.support_bound})"


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class RectangleDomain:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __init__(self, lower: Sequence[float], upper: Sequence[float]):
        lo = tuple(float(v) for v in lower)
        hi = tuple(float(v) for v in upper)
        if len(lo) != len(hi):
            raise ValueError("lower and upper bounds differ in length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"need lower < upper componentwise, got {lo} and {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in zip(self.lower, self.upper))


@dataclass
class Estimate:
    value: float
    N: int
    d: int
    I: tuple[int, ...]
    sigma2_hat: float | None = None
    ci: tuple[float, float, float] | None = None  # (level, lower, upper)
    seed: int | None = None

    def __post_init__(self):
        if self.ci is not None:
            if self.sigma2_hat is None:
                raise ValueError("a confidence interval needs sigma2_hat")
            level, lo, hi = self.ci
            if not lo <= self.value <= hi:
                raise ValueError("interval does not contain the estimate")

    def to_dict(self) -> dict:
        out = {
            "value": self.value,
            "sigma2_hat": self.sigma2_hat,
            "ci": None,
            "N": self.N,
            "d": self.d,
            "I": list(self.I),
            "seed": self.seed,
        }
        if self.ci is not None:
            out["ci"] = {"level": self.ci[0], "lo": self.ci[1], "hi": self.ci[2]}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "Estimate":
        ci = d.get("ci")
        return cls(
            value=d["value"], N=d["N"], d=d["d"], I=tuple(d["I"]),
            sigma2_hat=d.get("sigma2_hat"),
            ci=(ci["level"], ci["lo"], ci["hi"]) if ci else None,
            seed=d.get("seed"),
        )


@dataclass(frozen=True)
class KappaVector:
    """Limits of ``n_i N^{-1/d}`` along a sequence of designs."""

    kappas: tuple[float, ...]

    def __init__(self, kappas: Sequence[float]):
        k = tuple(float(v) for v in kappas)
        if not k or any(v <= 0 for v in k):
            raise ValueError(f"kappas must be strictly positive, got {k}")
        object.__setattr__(self, "kappas", k)

    def __getitem__(self, i: int) -> float:
        return self.kappas[i]

    def __len__(self) -> int:
        return len(self.kappas)


def kappa_from_design(fv: FactorVector) -> KappaVector:
    """``kappa_i = n_i N^{-1/d}`` for a single (usually the largest) design."""
    scale = fv.N ** (-1.0 / fv.d)
    return KappaVector([n * scale for n in fv])


def _projected_points(p: PointPattern, selector: SubsetSelector | None) -> tuple[np.ndarray, SubsetSelector]:
    if p.selector is not None:
        if selector is not None and selector != p.selector:
            raise ValueError(f"pattern projected on {p.selector}, asked for {selector}")
        return p.points, p.selector
    if selector is None:
        selector = SubsetSelector.full(p.d)
    selector.check(p.d)
    return p.points[:, list(selector.zero_based)], selector


def estimate_mean(f: IntegrandHandle, p: PointPattern, selector: SubsetSelector | None = None) -> Estimate:
    """``(1/N) sum_k f((u_k)_I)`` over the (projected) pattern."""
    pts, sel = _projected_points(p, selector)
    if f.iota != sel.iota:
        raise ValueError(f"integrand dimension {f.iota} != |I| = {sel.iota}")
    vals = f(pts)
    return Estimate(float(np.mean(vals)), N=p.N, d=p.d, I=sel.indices, seed=p.seed)


def estimate_rectangle(
    f: IntegrandHandle,
    p: PointPattern,
    selector: SubsetSelector | None,
    dom: RectangleDomain,
) -> Estimate:
    """Integral of ``f`` over the rectangle ``dom`` (given on the kept coordinates)."""
    pts, sel = _projected_points(p, selector)
    if f.iota != sel.iota:
        raise ValueError(f"integrand dimension {f.iota} != |I| = {sel.iota}")
    if len(dom.lower) != sel.iota:
        raise ValueError(f"domain has dimension {len(dom.lower)}, expected {sel.iota}")
    lo = np.asarray(dom.lower)
    hi = np.asarray(dom.upper)
    vals = f(lo + (hi - lo) * pts)
    return Estimate(dom.volume * float(np.mean(vals)), N=p.N, d=p.d, I=sel.indices, seed=p.seed)


def _default_grid(bound: int) -> int:
    need = 4 * (bound + 1)
    return 1 << max(3, (need - 1).bit_length())


def _grid_values(f: IntegrandHandle, grid: int) -> np.ndarray:
    axes = [np.arange(grid) / grid] * f.iota
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return f(pts).reshape((grid,) * f.iota)


def fourier_coeff(f: IntegrandHandle, j, grid: int | None = None) -> complex:
    """Trapezoid approximation of ``f_hat(j)`` on a periodic grid.

    ``grid`` points per axis must be at least ``4 * max(|j_i| + 1)``.
    """
    j = np.atleast_1d(np.asarray(j, dtype=np.int64))
    if j.size != f.iota:
        raise ValueError(f"index of dimension {j.size} for a {f.iota}-dimensional integrand")
    bound = int(np.abs(j).max())
    if grid is None:
        grid = _default_grid(bound)
    if grid < 4 * (bound + 1):
        raise ValueError(f"grid of {grid} points per axis too coarse for |j| = {bound}")
    vals = _grid_values(f, grid)
    u = np.arange(grid) / grid
    out = vals.astype(complex)
    # contract one axis at a time
    for ji in j:
        out = np.tensordot(out, np.exp(-2j * np.pi * ji * u), axes=([0], [0]))
    return complex(out) / grid**f.iota


def fourier_table(f: IntegrandHandle, radius, grid: int | None = None) -> FourierTable:
    """All coefficients with ``|j_i| <= radius_i`` via one FFT of grid samples."""
    radius = np.broadcast_to(np.asarray(radius, dtype=np.int64), (f.iota,))
    bound = int(radius.max())
    if grid is None:
        grid = _default_grid(bound)
    if grid < 4 * (bound + 1):
        raise ValueError(f"grid of {grid} points per axis too coarse for |j| = {bound}")
    spec = np.fft.fftn(_grid_values(f, grid)) / grid**f.iota
    ranges = [np.arange(-r, r + 1) for r in radius]
    mesh = np.meshgrid(*ranges, indexing="ij")
    idx = np.stack([m.ravel() for m in mesh], axis=1)
    coeffs = spec[tuple((idx % grid).T)]
    return FourierTable(idx, coeffs, f.iota, grid=grid)


def lift_table(tbl: FourierTable, selector: SubsetSelector, d: int) -> FourierTable:
    """Coefficients of ``x -> f(x_I)`` on ``[0, 1]^d``: the slice ``j_{I^c} = 0``."""
    selector.check(d)
    if tbl.iota != selector.iota:
        raise ValueError(f"table dimension {tbl.iota} != |I| = {selector.iota}")
    idx = np.zeros((len(tbl), d), dtype=np.int64)
    idx[:, list(selector.zero_based)] = tbl.indices
    return FourierTable(idx, tbl.coeffs.copy(), d, tbl.grid)


def _check_dim(tbl: FourierTable, fv: FactorVector) -> None:
    if tbl.iota != fv.d:
        raise ValueError(f"table dimension {tbl.iota} != d = {fv.d}; lift it first")


def exact_variance_var1(tbl: FourierTable, fv: FactorVector) -> float:
    """``(1/N) sum_j |f_hat(j)|^2 - (1/N^2) sum_{j,k in E_N} |f_hat(j - k)|^2``.

    The double sum runs over all ordered pairs of ``E_N``.
    """
    _check_dim(tbl, fv)
    N = fv.N
    pw = tbl.power()
    bound = np.asarray(tbl.support_bound, dtype=np.int64)
    shape = tuple(2 * bound + 1)
    dense = np.zeros(shape)
    dense[tuple((tbl.indices + bound).T)] = pw
    E = RectIndexSet(fv).array()
    terms = [pw / N]
    step = max(1, 2_000_000 // max(N, 1))
    for a in range(0, N, step):
        diff = E[a : a + step, None, :] - E[None, :, :]
        diff = diff.reshape(-1, fv.d)
        inside = np.all(np.abs(diff) <= bound, axis=1)
        vals = dense[tuple((diff[inside] + bound).T)]
        terms.append(-vals / N**2)
    return math.fsum(np.concatenate(terms).tolist())


def exact_variance_var2(tbl: FourierTable, fv: FactorVector) -> float:
    """``(1/N) sum_j |f_hat(j)|^2 - (1/N^2) sum_{j in F_N} prod(n_i - |j_i|) |f_hat(j)|^2``."""
    _check_dim(tbl, fv)
    N = fv.N
    pw = tbl.power()
    n = np.asarray(fv.factors)
    w = np.prod(np.clip(n - np.abs(tbl.indices), 0, None), axis=1).astype(float)
    return math.fsum(np.concatenate([pw / N, -w * pw / N**2]).tolist())


def projected_variance(tbl: FourierTable, selector: SubsetSelector, fv: FactorVector) -> float:
    """Exact variance of the estimator of an ``iota``-dimensional integral from a projected pattern."""
    return exact_variance_var2(lift_table(tbl, selector, fv.d), fv)


def sigma2_asymptotic(tbl: FourierTable, selector: SubsetSelector, kappa: KappaVector) -> float:
    """``sum_j (sum_{i in I} |j_i| / kappa_i) |f_hat(j)|^2`` over the table (``j in Z^iota``)."""
    if tbl.iota != selector.iota:
        raise ValueError(f"table dimension {tbl.iota} != |I| = {selector.iota}")
    selector.check(len(kappa))
    k = np.asarray([kappa[i] for i in selector.zero_based])
    w = (np.abs(tbl.indices) / k).sum(axis=1)
    return math.fsum((w * tbl.power()).tolist())


def sigma2_hat(tbl: FourierTable, fv: FactorVector) -> float:
    """Plug-in ``N^{1/d} sum_{j in F_N} (sum_i |j_i| / n_i) |f_hat(j)|^2``.

    Entries outside ``F_N`` are ignored. For an integrand of fewer
    coordinates, pass its lifted table.
    """
    _check_dim(tbl, fv)
    sub = tbl.restrict(fv)
    n = np.asarray(fv.factors, dtype=float)
    w = (np.abs(sub.indices) / n).sum(axis=1)
    return fv.N ** (1.0 / fv.d) * math.fsum((w * sub.power()).tolist())


def ci_clt(e: Estimate, level: float = 0.95) -> Estimate:
    """Interval ``value +- z sigma_hat / sqrt(N^{1 + 1/d})``."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    if e.sigma2_hat is None or e.sigma2_hat < 0:
        raise ValueError("estimate carries no non-negative sigma2_hat")
    z = stats.norm.ppf(0.5 * (1.0 + level))
    half = z * math.sqrt(e.sigma2_hat) / math.sqrt(e.N ** (1.0 + 1.0 / e.d))
    return Estimate(e.value, e.N, e.d, e.I, e.sigma2_hat,
                    (level, e.value - half, e.value + half), e.seed)


def covariance_matrix(
    tables: Sequence[FourierTable],
    selectors: Sequence[SubsetSelector],
    kappa: KappaVector,
) -> np.ndarray:
    """Asymptotic covariance of several estimates computed from one pattern."""
    d = len(kappa)
    lifted = [lift_table(t, s, d) for t, s in zip(tables, selectors)]
    keys = sorted({tuple(r) for t in lifted for r in t.indices.tolist()})
    pos = {k: i for i, k in enumerate(keys)}
    F = np.zeros((len(lifted), len(keys)), dtype=complex)
    for row, t in enumerate(lifted):
        for j, c in zip(t.indices.tolist(), t.coeffs):
            F[row, pos[tuple(j)]] = c
    idx = np.array(keys, dtype=float).reshape(len(keys), d)
    w = (np.abs(idx) / np.asarray(kappa.kappas)).sum(axis=1)
    return (F * w) @ F.conj().T
