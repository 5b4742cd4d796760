"""Dirichlet projection kernel on [0, 1]^d.

The kernel is built from the Fourier exponentials indexed by the rectangle
``E_N = {0..n_1-1} x ... x {0..n_d-1}``. Every eigenvalue on ``E_N`` equals 1
and every other eigenvalue is 0, so the associated DPP is a projection DPP
with exactly ``N = prod(n_i)`` points.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "FactorVector",
    "RectIndexSet",
    "SymIndexSet",
    "SubsetSelector",
    "PointPattern",
    "eigenfunction_eval",
    "kernel_eval",
    "kernel_factor",
    "intensity_k",
    "pcf_eval",
    "pcf_projected_eval",
    "balanced_factorization",
]

# |sin(pi * delta)| below this is treated as delta integral
_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class FactorVector:
    """The integers ``n = (n_1, ..., n_d)`` defining the index rectangle."""

    factors: tuple[int, ...]

    def __init__(self, factors: Sequence[int]):
        facs = tuple(int(n) for n in factors)
        if len(facs) == 0:
            raise ValueError("a factor vector needs at least one entry")
        if any(n < 1 for n in facs):
            raise ValueError(f"factors must be positive integers, got {facs}")
        object.__setattr__(self, "factors", facs)

    @property
    def d(self) -> int:
        return len(self.factors)

    @property
    def N(self) -> int:
        return math.prod(self.factors)

    def sub(self, selector: "SubsetSelector") -> "FactorVector":
        """Factor vector of the coordinates kept by ``selector``."""
        selector.check(self.d)
        return FactorVector([self.factors[i] for i in selector.zero_based])

    def __iter__(self) -> Iterator[int]:
        return iter(self.factors)

    def __len__(self) -> int:
        return len(self.factors)

    def __str__(self) -> str:
        return ",".join(str(n) for n in self.factors)


@dataclass(frozen=True)
class RectIndexSet:
    """The frequency rectangle ``E_N``.

    The kernel's eigenvalues are 1 on this set and 0 elsewhere.
    """

    fv: FactorVector

    def __len__(self) -> int:
        return self.fv.N

    def __contains__(self, j) -> bool:
        j = tuple(j)
        return len(j) == self.fv.d and all(0 <= ji < n for ji, n in zip(j, self.fv))

    def array(self) -> np.ndarray:
        """All indices as an ``(N, d)`` integer array in C order."""
        grids = np.meshgrid(*[np.arange(n) for n in self.fv], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)


@dataclass(frozen=True)
class SymIndexSet:
    """``F_N = {j : |j_i| <= n_i - 1}``, the support of all differences of ``E_N``."""

    fv: FactorVector

    def __len__(self) -> int:
        return math.prod(2 * n - 1 for n in self.fv)

    def __contains__(self, j) -> bool:
        j = tuple(j)
        return len(j) == self.fv.d and all(abs(ji) <= n - 1 for ji, n in zip(j, self.fv))

    def array(self) -> np.ndarray:
        grids = np.meshgrid(*[np.arange(-(n - 1), n) for n in self.fv], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def weights(self) -> np.ndarray:
        """``prod(n_i - |j_i|)`` for each row of :meth:`array`."""
        idx = self.array()
        n = np.asarray(self.fv.factors)
        return np.prod(n - np.abs(idx), axis=1).astype(float)


@dataclass(frozen=True)
class SubsetSelector:
    """A non-empty set of coordinates ``I``, stored 1-based and increasing."""

    indices: tuple[int, ...]

    def __init__(self, indices: Sequence[int]):
        idx = tuple(int(i) for i in indices)
        if not idx:
            raise ValueError("selector must be non-empty")
        if any(i < 1 for i in idx):
            raise ValueError(f"selector positions are 1-based, got {idx}")
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate positions in selector {idx}")
        object.__setattr__(self, "indices", tuple(sorted(idx)))

    @classmethod
    def full(cls, d: int) -> "SubsetSelector":
        return cls(range(1, d + 1))

    @property
    def iota(self) -> int:
        return len(self.indices)

    @property
    def zero_based(self) -> tuple[int, ...]:
        return tuple(i - 1 for i in self.indices)

    def check(self, d: int) -> None:
        if self.indices[-1] > d:
            raise ValueError(f"selector {self.indices} out of range for d={d}")

    def complement(self, d: int) -> tuple[int, ...]:
        self.check(d)
        return tuple(i for i in range(1, d + 1) if i not in self.indices)

    def is_full(self, d: int) -> bool:
        return self.indices == tuple(range(1, d + 1))

    def __str__(self) -> str:
        return ",".join(str(i) for i in self.indices)


@dataclass
class PointPattern:
    """A realization of ``N`` points in ``[0, 1)^k``.

    ``factors`` and ``seed`` record where the pattern came from. A pattern
    obtained by projection keeps the parent's factors and records the kept
    coordinates in ``selector``; ``points`` then has ``selector.iota`` columns.
    """

    points: np.ndarray
    factors: FactorVector
    seed: int | None = None
    selector: SubsetSelector | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        self.points = pts
        if not isinstance(self.factors, FactorVector):
            self.factors = FactorVector(self.factors)
        if pts.shape[0] != self.factors.N:
            raise ValueError(
                f"pattern has {pts.shape[0]} points, factors imply N={self.factors.N}"
            )
        if pts.shape[1] != self.dim:
            raise ValueError(f"points have {pts.shape[1]} columns, expected {self.dim}")
        if pts.size and (pts.min() < 0.0 or pts.max() >= 1.0):
            raise ValueError("coordinates must lie in [0, 1)")

    @property
    def N(self) -> int:
        return self.factors.N

    @property
    def d(self) -> int:
        """Dimension of the parent process."""
        return self.factors.d

    @property
    def dim(self) -> int:
        """Number of coordinate columns actually stored."""
        return self.selector.iota if self.selector is not None else self.factors.d

    def __len__(self) -> int:
        return self.points.shape[0]


def eigenfunction_eval(j, x) -> complex:
    """Fourier eigenfunction ``exp(2 i pi j.x)``."""
    j = np.atleast_1d(np.asarray(j))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if j.shape != x.shape:
        raise ValueError(f"index of dimension {j.size} vs point of dimension {x.size}")
    return complex(np.exp(2j * np.pi * np.dot(j, x)))


def kernel_factor(n: int, delta) -> np.ndarray:
    """One-dimensional factor ``sum_{k<n} exp(2 i pi k delta)``, vectorized over ``delta``."""
    delta = np.asarray(delta, dtype=float)
    s = np.sin(np.pi * delta)
    phase = np.exp(1j * np.pi * (n - 1) * delta)
    singular = np.abs(s) < _SINGULAR_TOL
    safe = np.where(singular, 1.0, s)
    ratio = np.sin(np.pi * n * delta) / safe
    # at integer delta every term of the sum is 1
    return np.where(singular, complex(n), phase * ratio)


def kernel_eval(fv: FactorVector, delta) -> complex | np.ndarray:
    """Dirichlet kernel ``K(delta) = prod_i K_i(delta_i)``.

    ``delta`` may be a single displacement of length ``d`` or an array of
    shape ``(..., d)``; the result has the leading shape.
    """
    delta = np.asarray(delta, dtype=float)
    scalar = delta.ndim <= 1
    delta = np.atleast_1d(delta)
    if delta.shape[-1] != fv.d:
        raise ValueError(f"displacement has dimension {delta.shape[-1]}, expected {fv.d}")
    out = np.ones(delta.shape[:-1], dtype=complex)
    for i, n in enumerate(fv):
        if n > 1:
            out = out * kernel_factor(n, delta[..., i])
    return complex(out) if scalar else out


def _kernel_matrix(fv: FactorVector, pts: np.ndarray) -> np.ndarray:
    diff = pts[:, None, :] - pts[None, :, :]
    return kernel_eval(fv, diff)


def intensity_k(fv: FactorVector, points) -> float:
    """k-th order intensity ``det[K(x_a - x_b)]``; 0 when two points coincide."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != fv.d:
        raise ValueError(f"points have dimension {pts.shape[1]}, expected {fv.d}")
    k = pts.shape[0]
    if k > 1 and len(np.unique(pts, axis=0)) < k:
        return 0.0
    det = np.linalg.det(_kernel_matrix(fv, pts))
    return float(det.real)


def pcf_eval(fv: FactorVector, x, y) -> float:
    """Pair correlation ``1 - |K(x - y)|^2 / N^2``; 0 at ``x == y``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.array_equal(x, y):
        return 0.0
    k = kernel_eval(fv, x - y)
    return float(1.0 - abs(k) ** 2 / fv.N**2)


def pcf_projected_eval(fv: FactorVector, selector: SubsetSelector, x, y) -> float:
    """Pair correlation of the pattern projected onto the coordinates in ``selector``.

    Equals ``1 - |K_I(x - y)|^2 / (N N_I)`` with ``K_I`` the Dirichlet kernel of
    the kept factors; it stays in ``[1 - N_I/N, 1]``.
    """
    sub = fv.sub(selector)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.size != selector.iota or y.size != selector.iota:
        raise ValueError("points must have the selector's dimension")
    if np.array_equal(x, y):
        return 0.0
    k = kernel_eval(sub, x - y)
    return float(1.0 - abs(k) ** 2 / (fv.N * sub.N))


def _multiplicative_partitions(n: int, max_parts: int, min_factor: int = 2):
    """Non-increasing tuples of factors >= 2 with product ``n``, at most ``max_parts`` long."""
    if n == 1:
        yield ()
        return
    if max_parts == 0:
        return
    # largest factor first; remaining factors are <= f
    for f in range(n, min_factor - 1, -1):
        if n % f:
            continue
        for rest in _multiplicative_partitions(n // f, max_parts - 1, min_factor):
            if not rest or rest[0] <= f:
                yield (f,) + rest


def balanced_factorization(N: int, d: int) -> FactorVector:
    """Factor ``N`` into ``d`` integers whose spread is as small as possible.

    Candidates are all multiplicative partitions of ``N`` into at most ``d``
    factors, padded with ones. The winner minimizes ``max(n) / min(n)``;
    ties go to the smallest variance of ``log n``, then to the
    lexicographically largest tuple. Output is sorted in decreasing order.
    """
    if N < 1 or d < 1:
        raise ValueError(f"need N >= 1 and d >= 1, got N={N}, d={d}")
    best_key = None
    best = None
    for parts in _multiplicative_partitions(N, d):
        cand = tuple(parts) + (1,) * (d - len(parts))
        logs = np.log(np.asarray(cand, dtype=float))
        key = (cand[0] / cand[-1], round(float(np.var(logs)), 12), tuple(-c for c in cand))
        if best_key is None or key < best_key:
            best_key, best = key, cand
    return FactorVector(best)


def iter_rect(fv: FactorVector):
    """Iterate over ``E_N`` in C order."""
    return itertools.product(*[range(n) for n in fv])
