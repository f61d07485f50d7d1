# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in _kernels_py.py (same signatures)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, pow, INFINITY

cnp.import_array()

cdef double A11 = 0.25
cdef double A12 = 0.25 - 0.28867513459481287
cdef double A21 = 0.25 + 0.28867513459481287
cdef double A22 = 0.25


def pair_terms(q, masses, int d, double alpha, double floor):
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[::1] m = np.ascontiguousarray(masses, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0]
    cdef Py_ssize_t nd = n * d
    cdef Py_ssize_t i, j, a, b
    cdef double r2, r, c, rpa, g, t, B, U = 0.0, min_dist = INFINITY
    grad_a = np.zeros(nd)
    hess_a = np.zeros((nd, nd))
    cdef double[::1] grad = grad_a
    cdef double[:, ::1] H = hess_a
    cdef double[::1] D = np.empty(d)

    for i in range(n):
        for j in range(i + 1, n):
            r2 = 0.0
            for a in range(d):
                D[a] = qv[i * d + a] - qv[j * d + a]
                r2 += D[a] * D[a]
            r = sqrt(r2)
            if r < min_dist:
                min_dist = r
    if min_dist < floor:
        return np.inf, np.zeros(nd), np.zeros((nd, nd)), min_dist

    for i in range(n):
        for j in range(i + 1, n):
            r2 = 0.0
            for a in range(d):
                D[a] = qv[i * d + a] - qv[j * d + a]
                r2 += D[a] * D[a]
            c = m[i] * m[j]
            rpa = pow(r2, -0.5 * alpha)
            U += c * rpa
            g = -alpha * c * rpa / r2
            t = alpha * (alpha + 2.0) * c * rpa / (r2 * r2)
            for a in range(d):
                grad[i * d + a] += g * D[a]
                grad[j * d + a] -= g * D[a]
                for b in range(d):
                    B = t * D[a] * D[b]
                    if a == b:
                        B += g
                    H[i * d + a, i * d + b] += B
                    H[j * d + a, j * d + b] += B
                    H[i * d + a, j * d + b] -= B
                    H[j * d + a, i * d + b] -= B
    return U, grad_a, hess_a, min_dist


def band_inertia(ab, double tol):
    cdef double[:, ::1] a = np.array(ab, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t bw = a.shape[0] - 1
    cdef Py_ssize_t n = a.shape[1]
    cdef Py_ssize_t j, p, qq, m
    cdef int neg = 0, zero = 0, pos = 0
    cdef double dj, min_piv = INFINITY
    cdef double[::1] col = np.empty(bw + 1)
    for j in range(n):
        dj = a[0, j]
        if fabs(dj) < min_piv:
            min_piv = fabs(dj)
        if fabs(dj) <= tol:
            zero += 1
            dj = tol
        elif dj < 0:
            neg += 1
        else:
            pos += 1
        m = bw
        if n - 1 - j < m:
            m = n - 1 - j
        for p in range(1, m + 1):
            col[p] = a[p, j]
        for qq in range(1, m + 1):
            for p in range(qq, m + 1):
                # A[j+p, j+qq] -= l_p * col_qq, stored at a[p-qq, j+qq]
                a[p - qq, j + qq] -= (col[p] / dj) * col[qq]
    return neg, zero, pos, float(min_piv)


cdef void _solve(double[:, ::1] A, double[:, ::1] X, Py_ssize_t n, Py_ssize_t ncol) noexcept nogil:
    # Gaussian elimination with partial pivoting; A and X are overwritten.
    cdef Py_ssize_t i, j, k, piv
    cdef double amax, tmp, f
    for k in range(n):
        piv = k
        amax = fabs(A[k, k])
        for i in range(k + 1, n):
            if fabs(A[i, k]) > amax:
                amax = fabs(A[i, k])
                piv = i
        if piv != k:
            for j in range(n):
                tmp = A[k, j]; A[k, j] = A[piv, j]; A[piv, j] = tmp
            for j in range(ncol):
                tmp = X[k, j]; X[k, j] = X[piv, j]; X[piv, j] = tmp
        for i in range(k + 1, n):
            f = A[i, k] / A[k, k]
            if f != 0.0:
                for j in range(k, n):
                    A[i, j] -= f * A[k, j]
                for j in range(ncol):
                    X[i, j] -= f * X[k, j]
    for k in range(n - 1, -1, -1):
        for j in range(ncol):
            tmp = X[k, j]
            for i in range(k + 1, n):
                tmp -= A[k, i] * X[i, j]
            X[k, j] = tmp / A[k, k]


cdef double _omega_max(double[:, ::1] Z, double[:, ::1] W, Py_ssize_t half, Py_ssize_t N) noexcept nogil:
    # max_ij |(Z^T J Z - W^T J W)_ij| with J = [[0,-I],[I,0]]; W may be Z's predecessor
    cdef Py_ssize_t i, j, k
    cdef double s, t, best = 0.0
    for i in range(N):
        for j in range(N):
            s = 0.0
            t = 0.0
            for k in range(half):
                s += -Z[k, i] * Z[half + k, j] + Z[half + k, i] * Z[k, j]
                t += -W[k, i] * W[half + k, j] + W[half + k, i] * W[k, j]
            if fabs(s - t) > best:
                best = fabs(s - t)
    return best


cdef double _omega_abs(double[:, ::1] Z, Py_ssize_t half, Py_ssize_t N) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double s, best = 0.0
    for i in range(N):
        for j in range(N):
            s = 0.0
            for k in range(half):
                s += -Z[k, i] * Z[half + k, j] + Z[half + k, i] * Z[k, j]
            if fabs(s) > best:
                best = fabs(s)
    return best


cdef void _mgs(double[:, ::1] Z, Py_ssize_t n2, Py_ssize_t N) noexcept nogil:
    # two-pass modified Gram-Schmidt on the columns; R has positive diagonal
    cdef Py_ssize_t i, j, k, rep
    cdef double s
    for j in range(N):
        for rep in range(2):
            for i in range(j):
                s = 0.0
                for k in range(n2):
                    s += Z[k, i] * Z[k, j]
                for k in range(n2):
                    Z[k, j] -= s * Z[k, i]
        s = 0.0
        for k in range(n2):
            s += Z[k, j] * Z[k, j]
        s = sqrt(s)
        for k in range(n2):
            Z[k, j] /= s


def gauss_sweep(H1, H2, h, F0):
    cdef double[:, :, ::1] h1 = np.ascontiguousarray(H1, dtype=np.float64)
    cdef double[:, :, ::1] h2 = np.ascontiguousarray(H2, dtype=np.float64)
    cdef double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    F0a = np.ascontiguousarray(F0, dtype=np.float64)
    cdef Py_ssize_t K = h1.shape[0]
    cdef Py_ssize_t n2 = F0a.shape[0]
    cdef Py_ssize_t N = F0a.shape[1]
    cdef Py_ssize_t half = n2 // 2
    cdef Py_ssize_t k, i, j, l
    cdef double hk, s1, s2, drift = 0.0, iso, tmp
    frames_a = np.empty((K + 1, n2, N))
    cdef double[:, :, ::1] frames = frames_a
    cdef double[:, ::1] F = F0a.copy()
    cdef double[:, ::1] Z = np.empty((n2, N))
    cdef double[:, ::1] A = np.empty((2 * n2, 2 * n2))
    cdef double[:, ::1] X = np.empty((2 * n2, N))

    _mgs(F, n2, N)
    frames[0, :, :] = F
    iso = _omega_abs(F, half, N)
    with nogil:
        for k in range(K):
            hk = hv[k]
            for i in range(n2):
                for j in range(n2):
                    A[i, j] = -hk * A11 * h1[k, i, j]
                    A[i, n2 + j] = -hk * A12 * h1[k, i, j]
                    A[n2 + i, j] = -hk * A21 * h2[k, i, j]
                    A[n2 + i, n2 + j] = -hk * A22 * h2[k, i, j]
                A[i, i] += 1.0
                A[n2 + i, n2 + i] += 1.0
                for j in range(N):
                    s1 = 0.0
                    s2 = 0.0
                    for l in range(n2):
                        s1 += h1[k, i, l] * F[l, j]
                        s2 += h2[k, i, l] * F[l, j]
                    X[i, j] = s1
                    X[n2 + i, j] = s2
            _solve(A, X, 2 * n2, N)
            for i in range(n2):
                for j in range(N):
                    Z[i, j] = F[i, j] + 0.5 * hk * (X[i, j] + X[n2 + i, j])
            tmp = _omega_max(Z, F, half, N)
            if tmp > drift:
                drift = tmp
            _mgs(Z, n2, N)
            tmp = _omega_abs(Z, half, N)
            if tmp > iso:
                iso = tmp
            for i in range(n2):
                for j in range(N):
                    F[i, j] = Z[i, j]
                    frames[k + 1, i, j] = Z[i, j]
    return frames_a, drift, iso
