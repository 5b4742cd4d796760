"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_core`` extension is unavailable or when
``DIRICHLET_DPP_BACKEND=python`` is set. Signatures and random-stream
consumption match ``_core`` exactly, so both backends produce the same
patterns from the same generator.
"""

from __future__ import annotations

import math

import numpy as np

# uniforms are requested from the generator this many proposals at a time
CHUNK = 256
# re-projection magnitude above which another orthogonalization pass runs
RESIDUAL_TOL = 1e-8
MAX_PASSES = 4


def feature_vectors(factors, xs: np.ndarray) -> np.ndarray:
    """Rows ``(exp(2 i pi j.x))_{j in E_N}`` in C order, one per row of ``xs``."""
    xs = np.atleast_2d(xs)
    out = np.ones((xs.shape[0], 1), dtype=complex)
    for i, n in enumerate(factors):
        ax = np.exp(2j * np.pi * np.outer(xs[:, i], np.arange(n)))
        out = (out[:, :, None] * ax[:, None, :]).reshape(xs.shape[0], -1)
    return out


def _orthogonalize(E: np.ndarray, m: int, phi: np.ndarray, threshold: float):
    """Orthogonalize ``phi`` against rows ``E[:m]``; returns (unit vector, residual)."""
    r = phi.copy()
    norm0 = math.sqrt(phi.size)
    if m == 0:
        return r / np.linalg.norm(r), 0.0
    basis = E[:m]
    # two classical passes; a third only if the first two cancel heavily
    for _ in range(2):
        r -= (basis.conj() @ r) @ basis
    passes = 2
    nrm = np.linalg.norm(r)
    while nrm < threshold * norm0 and passes < MAX_PASSES:
        r -= (basis.conj() @ r) @ basis
        passes += 1
        nrm = np.linalg.norm(r)
    e = r / nrm
    res = float(np.linalg.norm(basis.conj() @ e))
    while res > RESIDUAL_TOL and passes < MAX_PASSES:
        e -= (basis.conj() @ e) @ basis
        e /= np.linalg.norm(e)
        passes += 1
        res = float(np.linalg.norm(basis.conj() @ e))
    return e, res


def sample_core(factors, rng, max_rejections: int, reorth_threshold: float):
    """Draw one pattern of the Dirichlet projection DPP.

    Returns ``(points, total_proposals, rejections_per_point, max_residual,
    failed_at)`` where ``failed_at`` is -1 on success, otherwise the index of
    the point whose rejection count exceeded ``max_rejections``.
    """
    factors = tuple(int(n) for n in factors)
    d = len(factors)
    N = math.prod(factors)
    E = np.zeros((N, N), dtype=complex)
    pts = np.empty((N, d))
    rej = np.zeros(N, dtype=np.int64)
    total = 0
    max_res = 0.0
    buf = rng.random(CHUNK * (d + 1)).reshape(CHUNK, d + 1)
    pos = 0
    for m in range(N):
        tries = 0
        while True:
            if pos == CHUNK:
                buf = rng.random(CHUNK * (d + 1)).reshape(CHUNK, d + 1)
                pos = 0
            # about twice the expected number of proposals N / (N - m)
            b = min(CHUNK - pos, -(-2 * N // (N - m)))
            props = buf[pos : pos + b]
            if m == 0:
                s = np.zeros(b)
            else:
                coef = feature_vectors(factors, props[:, :d]) @ E[:m].conj().T
                s = np.einsum("ij,ij->i", coef.real, coef.real) + np.einsum(
                    "ij,ij->i", coef.imag, coef.imag
                )
            ok = np.flatnonzero(N - s > props[:, d] * N)
            if ok.size:
                k = int(ok[0])
                if tries + k > max_rejections:
                    rej[m] = max_rejections + 1
                    return pts[:m], total + max_rejections + 1, rej[: m + 1], max_res, m
                tries += k
                total += k + 1
                pos += k + 1
                x = props[k, :d]
                break
            tries += b
            total += b
            pos += b
            if tries > max_rejections:
                rej[m] = tries
                return pts[:m], total, rej[: m + 1], max_res, m
        rej[m] = tries
        pts[m] = x
        phi = feature_vectors(factors, x[None, :])[0]
        E[m], res = _orthogonalize(E, m, phi, reorth_threshold)
        max_res = max(max_res, res)
    return pts, total, rej, max_res, -1


def hgamma_sum(t: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``sum_{j=1}^{J} weights[j-1] * cos(2 pi j t)`` for each entry of ``t``."""
    t = np.ascontiguousarray(t, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float)
    out = np.zeros_like(t)
    jblock = 4096
    pblock = 512
    for p0 in range(0, t.size, pblock):
        tp = t[p0 : p0 + pblock]
        acc = np.zeros_like(tp)
        for j0 in range(0, weights.size, jblock):
            js = np.arange(j0 + 1, min(j0 + jblock, weights.size) + 1)
            acc += np.cos(2 * np.pi * np.outer(tp, js)) @ weights[j0 : j0 + js.size]
        out[p0 : p0 + pblock] = acc
    return out
