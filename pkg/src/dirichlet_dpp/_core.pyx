# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: the sequential DPP sampler and the h_gamma series.

Random numbers are drawn from a numpy Generator in blocks of CHUNK
proposals, each proposal consuming d + 1 doubles (d coordinates, then the
acceptance uniform), identically to the pure numpy fallback.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, M_PI, floor
from scipy.linalg.cython_blas cimport zgemv, zgeru, zdotc, zaxpy, dznrm2, zdscal, zcopy

cdef extern from "_series.h" nogil:
    enum: SERIES_LANES
    void cos_series_block(const double* t, const double* w, long J, double* out)

cnp.import_array()

cdef enum:
    CHUNK = 256
    ROWBLOCK = 128
    MAX_PASSES = 4

cdef double RESIDUAL_TOL = 1e-8
# below this size the complement basis does not pay for its setup
cdef int COMPLEMENT_MIN_N = 32


cdef void _features(const long* factors, int d, const double* x, double complex* phi,
                    double complex* axis) noexcept nogil:
    """Kronecker product of the per-axis exponentials, C order."""
    cdef int i, k, a, n, size = 1
    cdef double ang
    phi[0] = 1.0
    for i in range(d):
        n = factors[i]
        for k in range(n):
            ang = 2.0 * M_PI * k * x[i]
            axis[k] = cos(ang) + 1j * sin(ang)
        # expand in place from the back so entries are not overwritten early
        for a in range(size - 1, -1, -1):
            for k in range(n - 1, -1, -1):
                phi[a * n + k] = phi[a] * axis[k]
        size *= n


cdef double _proj_norm2(double complex* E, int N, int m, double complex* phi,
                        double complex* coef, double limit) noexcept nogil:
    """Squared norm of the projection of phi on rows E[:m].

    Stops early once the partial sum exceeds ``limit``.
    """
    cdef char trans = b'C'
    cdef int one = 1, lda = N, rows, r0, l
    cdef double complex alpha = 1.0, beta = 0.0
    cdef double s = 0.0
    r0 = 0
    while r0 < m:
        rows = m - r0
        if rows > ROWBLOCK:
            rows = ROWBLOCK
        # rows of E in C order are columns of an N x m Fortran matrix
        zgemv(&trans, &lda, &rows, &alpha, E + <Py_ssize_t>r0 * N, &lda,
              phi, &one, &beta, coef, &one)
        for l in range(rows):
            s += coef[l].real * coef[l].real + coef[l].imag * coef[l].imag
        if s >= limit:
            return s
        r0 += rows
    return s


cdef double _mgs_pass(double complex* E, int N, int m, double complex* r) noexcept nogil:
    """One modified Gram-Schmidt sweep of r against rows E[:m]; returns ||r||."""
    cdef int one = 1, n = N, l
    cdef double complex c
    for l in range(m):
        c = zdotc(&n, E + <Py_ssize_t>l * N, &one, r, &one)
        c = -c
        zaxpy(&n, &c, E + <Py_ssize_t>l * N, &one, r, &one)
    return dznrm2(&n, r, &one)


cdef double _reprojection(double complex* E, int N, int m, double complex* e,
                          double complex* coef) noexcept nogil:
    cdef char trans = b'C'
    cdef int one = 1, lda = N, rows = m
    cdef double complex alpha = 1.0, beta = 0.0
    cdef double s = 0.0
    cdef int l
    if m == 0:
        return 0.0
    zgemv(&trans, &lda, &rows, &alpha, E, &lda, e, &one, &beta, coef, &one)
    for l in range(m):
        s += coef[l].real * coef[l].real + coef[l].imag * coef[l].imag
    return sqrt(s)


cdef void _complement_accept(double complex* W, int N, int r, double complex* phi,
                             double complex* v, double complex* ubar, double complex* t,
                             double complex* erow) noexcept nogil:
    """Split the complement basis W (r rows) into the new direction and the rest.

    A Householder reflector maps the coefficients of phi in W onto the first
    basis vector, which becomes ``erow``; the remaining r - 1 rows span the
    new complement and are compacted into W[:r-1].
    """
    cdef char trans = b'C', notrans = b'N'
    cdef int one = 1, lda = N, rr = r, n = N, k
    cdef double complex alpha = 1.0, beta = 0.0, g, ph
    cdef double vn, a0, uhu, scale
    zgemv(&trans, &lda, &rr, &alpha, W, &lda, phi, &one, &beta, v, &one)
    vn = dznrm2(&rr, v, &one)
    a0 = sqrt(v[0].real * v[0].real + v[0].imag * v[0].imag)
    ph = v[0] / a0 if a0 > 0 else 1.0
    v[0] = v[0] + ph * vn
    uhu = dznrm2(&rr, v, &one)
    uhu = uhu * uhu
    zgemv(&notrans, &lda, &rr, &alpha, W, &lda, v, &one, &beta, t, &one)
    for k in range(r):
        ubar[k] = v[k].conjugate()
    g = -2.0 / uhu
    zgeru(&n, &rr, &g, t, &one, ubar, &one, W, &lda)
    zcopy(&n, W, &one, erow, &one)
    scale = 1.0 / dznrm2(&n, erow, &one)
    zdscal(&n, &scale, erow, &one)
    if r > 1:
        zcopy(&n, W + <Py_ssize_t>(r - 1) * N, &one, W, &one)


def sample_core(factors, rng, long max_rejections, double reorth_threshold):
    """Draw one pattern; see ``_pycore.sample_core`` for the return contract."""
    cdef cnp.ndarray[long, ndim=1] fac = np.ascontiguousarray(factors, dtype=np.int_)
    cdef int d = fac.shape[0]
    cdef int N = 1
    cdef int i
    for i in range(d):
        N *= fac[i]
    cdef int maxn = int(fac.max())

    cdef cnp.ndarray[cnp.complex128_t, ndim=2] E_arr = np.zeros((N, N), dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts_arr = np.empty((N, d))
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rej_arr = np.zeros(N, dtype=np.int64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] phi_arr = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] coef_arr = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] axis_arr = np.empty(maxn, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf_arr = rng.random(CHUNK * (d + 1))

    cdef double complex* E = <double complex*> E_arr.data
    cdef double* pts = <double*> pts_arr.data
    cdef double complex* phi = <double complex*> phi_arr.data
    cdef double complex* coef = <double complex*> coef_arr.data
    cdef double complex* axis = <double complex*> axis_arr.data
    cdef const long* fp = <const long*> fac.data
    cdef double* buf = <double*> buf_arr.data

    cdef int pos = 0, m, one = 1, n = N, passes
    cdef long tries
    cdef long long total = 0
    cdef double s, u, nrm, res, max_res = 0.0, norm0 = sqrt(<double> N)
    cdef double complex* row
    cdef double scale
    cdef int switch_m = N // 2 if N >= COMPLEMENT_MIN_N else N
    cdef int r = 0
    cdef double complex* W = NULL
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] W_arr
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] ubar_arr = np.empty(N, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] t_arr = np.empty(N, dtype=np.complex128)
    cdef double complex* ubar = <double complex*> ubar_arr.data
    cdef double complex* tv = <double complex*> t_arr.data

    for m in range(N):
        tries = 0
        if m == switch_m:
            # orthonormal basis of the complement of span(e_1..e_m), as rows
            q = np.linalg.qr(E_arr[:m].T, mode="complete")[0]
            W_arr = np.ascontiguousarray(q[:, m:].T)
            W = <double complex*> W_arr.data
            r = N - m
        while True:
            if pos == CHUNK:
                buf_arr = rng.random(CHUNK * (d + 1))
                buf = <double*> buf_arr.data
                pos = 0
            u = buf[pos * (d + 1) + d]
            with nogil:
                if m == 0:
                    s = 0.0
                elif m < switch_m:
                    _features(fp, d, buf + pos * (d + 1), phi, axis)
                    s = _proj_norm2(E, N, m, phi, coef, N - u * N)
                else:
                    # N - s equals the squared norm of the complement projection
                    _features(fp, d, buf + pos * (d + 1), phi, axis)
                    s = N - _proj_norm2(W, N, r, phi, coef, u * N)
            total += 1
            if N - s > u * N:
                break
            pos += 1
            tries += 1
            if tries > max_rejections:
                rej_arr[m] = tries
                return pts_arr[:m], total, rej_arr[:m + 1], max_res, m
        rej_arr[m] = tries
        for i in range(d):
            pts[m * d + i] = buf[pos * (d + 1) + i]
        pos += 1
        row = E + <Py_ssize_t>m * N
        if m >= switch_m:
            with nogil:
                _complement_accept(W, N, r, phi, coef, ubar, tv, row)
                r -= 1
                passes = 1
                res = _reprojection(E, N, m, row, coef)
                while res > RESIDUAL_TOL and passes < MAX_PASSES:
                    nrm = _mgs_pass(E, N, m, row)
                    scale = 1.0 / nrm
                    zdscal(&n, &scale, row, &one)
                    passes += 1
                    res = _reprojection(E, N, m, row, coef)
            if res > max_res:
                max_res = res
            continue
        with nogil:
            _features(fp, d, pts + m * d, row, axis)
            passes = 1
            nrm = _mgs_pass(E, N, m, row) if m > 0 else norm0
            if nrm < reorth_threshold * norm0 and m > 0:
                nrm = _mgs_pass(E, N, m, row)
                passes += 1
            scale = 1.0 / nrm
            zdscal(&n, &scale, row, &one)
            res = _reprojection(E, N, m, row, coef)
            while res > RESIDUAL_TOL and passes < MAX_PASSES:
                nrm = _mgs_pass(E, N, m, row)
                scale = 1.0 / nrm
                zdscal(&n, &scale, row, &one)
                passes += 1
                res = _reprojection(E, N, m, row, coef)
        if res > max_res:
            max_res = res
    return pts_arr, total, rej_arr, max_res, -1


def hgamma_sum(t, weights):
    """``sum_{j=1}^{J} weights[j-1] * cos(2 pi j t)`` for each entry of ``t``.

    Chebyshev recurrence across j, re-seeded with exact cosines every 64
    terms (see ``_series.h``); 32 points advance together so the inner loop
    vectorizes.
    """
    tt_arr = np.ascontiguousarray(t, dtype=np.float64).ravel()
    cdef Py_ssize_t P = tt_arr.shape[0]
    # pad to a multiple of the lane count
    cdef Py_ssize_t Ppad = ((P + SERIES_LANES - 1) // SERIES_LANES) * SERIES_LANES
    cdef double[::1] tt = np.concatenate([tt_arr, np.zeros(Ppad - P)])
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    out_arr = np.zeros(Ppad)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t J = w.shape[0], p0
    if P == 0:
        return out_arr[:0]
    with nogil:
        p0 = 0
        while p0 < Ppad:
            cos_series_block(&tt[p0], &w[0] if J > 0 else NULL, J, &out[p0])
            p0 += SERIES_LANES
    return out_arr[:P]
