# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pivoted Gram-Schmidt append."""
import numpy as np
from scipy.linalg.cython_blas cimport dger, dgemv, dnrm2


cdef void _project_out(double[:, ::1] Q, int k, int n, double[::1] v, double[::1] h) noexcept nogil:
    # v -= Q[:k]^T Q[:k] v; rows of Q are columns of an n-by-k column-major matrix
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0, mone = -1.0
    cdef char trans_t = b'T'
    cdef char trans_n = b'N'
    if k == 0:
        return
    dgemv(&trans_t, &n, &k, &one, &Q[0, 0], &n, &v[0], &inc, &zero, &h[0], &inc)
    dgemv(&trans_n, &n, &k, &mone, &Q[0, 0], &n, &h[0], &inc, &one, &v[0], &inc)


def gs_extend(double[:, ::1] Q, Py_ssize_t k, double[:, ::1] C, double tol):
    """Append an orthonormal basis of the part of ``span(C)`` orthogonal to ``Q[:k]``.

    Candidates are projected against the basis, then repeatedly the one
    with the largest remaining norm is normalised and appended while that
    norm exceeds ``tol`` (absolute); the others are deflated by a rank-one
    update.  ``Q`` is filled in place and the new basis size returned.
    """
    cdef int n = <int>Q.shape[1]
    cdef int cap = <int>Q.shape[0]
    cdef int m = <int>C.shape[0]
    cdef int kk = <int>k
    cdef int i, j, p, best
    cdef int inc = 1
    cdef double mone = -1.0, one = 1.0, zero = 0.0
    cdef char trans_t = b'T'
    cdef double r, bestn
    if C.shape[1] != n:
        raise ValueError("candidate length does not match basis length")
    if m == 0 or kk >= cap:
        return kk
    cdef double[:, ::1] R = np.array(C, dtype=np.float64, order="C")
    cdef double[::1] h = np.empty(max(cap, m, 1))
    cdef double[::1] hm = np.empty(max(m, 1))
    cdef double[::1] q = np.empty(max(n, 1))
    cdef double[::1] nrm = np.empty(m)
    with nogil:
        for j in range(m):
            for p in range(2):
                _project_out(Q, kk, n, R[j], h)
            nrm[j] = dnrm2(&n, &R[j, 0], &inc)
        while kk < cap:
            best = -1
            bestn = tol
            for j in range(m):
                if nrm[j] > bestn:
                    bestn = nrm[j]
                    best = j
            if best < 0:
                break
            for i in range(n):
                q[i] = R[best, i]
            for p in range(2):
                _project_out(Q, kk, n, q, h)
            r = dnrm2(&n, &q[0], &inc)
            if r <= tol:
                nrm[best] = 0.0
                continue
            for i in range(n):
                q[i] = q[i] / r
                Q[kk, i] = q[i]
            kk += 1
            # R -= (R q) q^T, with R viewed as an n-by-m column-major matrix
            dgemv(&trans_t, &n, &m, &one, &R[0, 0], &n, &q[0], &inc, &zero, &hm[0], &inc)
            dger(&n, &m, &mone, &q[0], &inc, &hm[0], &inc, &R[0, 0], &n)
            for j in range(m):
                nrm[j] = dnrm2(&n, &R[j, 0], &inc)
            nrm[best] = 0.0
    return kk
