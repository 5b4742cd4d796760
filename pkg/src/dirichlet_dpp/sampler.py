"""Exact sampling of the Dirichlet projection DPP.

Points are drawn one at a time. Each proposal is uniform on ``[0, 1)^d`` and
is accepted with probability ``(N - sum_l |<e_l, phi(x)>|^2) / N``, where
``phi(x) = (exp(2 i pi j.x))_{j in E_N}`` and ``e_1..e_m`` is an orthonormal
basis of the feature vectors of the points accepted so far. Since
``K(x, x) = N`` everywhere, the uniform envelope is tight.

Random stream contract
----------------------
A pattern drawn with integer ``seed`` uses
``numpy.random.Generator(PCG64(SeedSequence(seed)))``. Each proposal consumes
``d + 1`` consecutive doubles from ``Generator.random``: the ``d``
coordinates, then the acceptance uniform. Replication ``r`` of a batch with
``base_seed`` uses the integer seed
``SeedSequence(base_seed, spawn_key=(r,)).generate_state(1, uint64)[0]``
(see :func:`derive_seed`), so batches are identical for any thread count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._backend import core
from .kernel import FactorVector, PointPattern, SubsetSelector

__all__ = [
    "SamplerConfig",
    "SampleDiagnostics",
    "SamplerError",
    "sample_pattern",
    "batch_sample",
    "derive_seed",
    "project_pattern",
    "write_pattern",
    "read_pattern",
]


class SamplerError(RuntimeError):
    """Raised when a point exceeds its rejection budget."""

    def __init__(self, message, point_index=None, replication=None, diagnostics=None):
        super().__init__(message)
        self.point_index = point_index
        self.replication = replication
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class SamplerConfig:
    seed: int
    max_rejections_per_point: int | None = None  # None means 1000 * N
    reorthogonalization_threshold: float = 1 / math.sqrt(2)

    def __post_init__(self):
        if self.max_rejections_per_point is not None and self.max_rejections_per_point < 1:
            raise ValueError("max_rejections_per_point must be >= 1")
        if not 0.0 < self.reorthogonalization_threshold < 1.0:
            raise ValueError("reorthogonalization_threshold must lie in (0, 1)")

    def cap(self, N: int) -> int:
        if self.max_rejections_per_point is None:
            return 1000 * N
        return self.max_rejections_per_point


@dataclass
class SampleDiagnostics:
    total_proposals: int
    per_point_rejections: list[int]
    max_gram_schmidt_residual: float

    def to_dict(self) -> dict:
        return asdict(self)


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def derive_seed(base_seed: int, replication: int) -> int:
    """Integer seed of replication ``replication`` in a batch."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(replication),))
    return int(ss.generate_state(1, np.uint64)[0])


def sample_pattern(fv: FactorVector, cfg: SamplerConfig) -> tuple[PointPattern, SampleDiagnostics]:
    """Draw one realization of the ``(N, d)``-Dirichlet DPP."""
    if not isinstance(fv, FactorVector):
        fv = FactorVector(fv)
    rng = _generator(cfg.seed)
    pts, total, rej, max_res, failed_at = core.sample_core(
        np.asarray(fv.factors, dtype=np.int_),
        rng,
        cfg.cap(fv.N),
        cfg.reorthogonalization_threshold,
    )
    diag = SampleDiagnostics(int(total), [int(r) for r in rej], float(max_res))
    if failed_at >= 0:
        raise SamplerError(
            f"point {failed_at} exceeded {cfg.cap(fv.N)} rejections "
            f"(max Gram-Schmidt residual {max_res:.3g})",
            point_index=int(failed_at),
            diagnostics=diag,
        )
    pattern = PointPattern(np.array(pts), fv, seed=int(cfg.seed), diagnostics=diag.to_dict())
    return pattern, diag


def batch_sample(
    fv: FactorVector,
    base_seed: int,
    R: int,
    *,
    threads: int = 1,
    max_rejections_per_point: int | None = None,
) -> list[PointPattern]:
    """``R`` independent patterns; replication ``r`` uses ``derive_seed(base_seed, r)``."""
    if R < 1:
        raise ValueError("R must be >= 1")
    if not isinstance(fv, FactorVector):
        fv = FactorVector(fv)

    def one(r):
        cfg = SamplerConfig(derive_seed(base_seed, r), max_rejections_per_point)
        try:
            return sample_pattern(fv, cfg)[0]
        except SamplerError as exc:
            exc.replication = r
            raise SamplerError(
                f"replication {r}: {exc}", exc.point_index, r, exc.diagnostics
            ) from exc

    if threads <= 1:
        return [one(r) for r in range(R)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(R)))


def project_pattern(p: PointPattern, selector: SubsetSelector) -> PointPattern:
    """Keep the coordinates in ``selector``; point order is preserved."""
    if p.selector is not None:
        raise ValueError("pattern is already projected")
    selector.check(p.d)
    pts = p.points[:, list(selector.zero_based)]
    return PointPattern(pts, p.factors, seed=p.seed, selector=selector,
                        diagnostics=p.diagnostics)


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_pattern(path, p: PointPattern) -> None:
    """Write ``p`` as CSV (header ``x1..xk``) plus a JSON sidecar."""
    path = Path(path)
    cols = p.selector.indices if p.selector is not None else range(1, p.d + 1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in cols])
        for row in p.points:
            w.writerow([f"{v:.17g}" for v in row])
    meta = {
        "factors": list(p.factors.factors),
        "seed": p.seed,
        "N": p.N,
        "d": p.d,
        "diagnostics": p.diagnostics,
    }
    if p.selector is not None:
        meta["selector"] = list(p.selector.indices)
    sidecar_path(path).write_text(json.dumps(meta, indent=2))


def read_pattern(path) -> PointPattern:
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    pts = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    selector = SubsetSelector(meta["selector"]) if meta.get("selector") else None
    return PointPattern(pts, FactorVector(meta["factors"]), seed=meta.get("seed"),
                        selector=selector, diagnostics=meta.get("diagnostics", {}))
