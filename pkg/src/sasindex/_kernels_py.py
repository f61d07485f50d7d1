"""Pure numpy implementations of the hot kernels.

Each function here has a compiled twin in ``_kernels.pyx`` with the same
signature and return values; ``sasindex.kernels`` picks one at import.
"""
import numpy as np

_S3 = np.sqrt(3.0) / 6.0
GAUSS_A = np.array([[0.25, 0.25 - _S3], [0.25 + _S3, 0.25]])
GAUSS_C = np.array([0.5 - _S3, 0.5 + _S3])


def pair_terms(q, masses, d, alpha, floor):
    """Potential, ambient gradient and ambient Hessian of U at q.

    Returns ``(U, grad, hess, min_dist)``.  When some mutual distance is
    below ``floor`` the derivatives are not evaluated and ``U`` is ``inf``.
    """
    q = np.ascontiguousarray(q, dtype=float)
    m = np.ascontiguousarray(masses, dtype=float)
    n = m.shape[0]
    X = q.reshape(n, d)
    iu, ju = np.triu_indices(n, 1)
    D = X[iu] - X[ju]
    r2 = np.einsum("pk,pk->p", D, D)
    r = np.sqrt(r2)
    min_dist = float(r.min())
    nd = n * d
    if min_dist < floor:
        return np.inf, np.zeros(nd), np.zeros((nd, nd)), min_dist
    c = m[iu] * m[ju]
    rpa = r ** (-alpha)
    U = float(np.sum(c * rpa))
    g = -alpha * c * rpa / r2
    t = alpha * (alpha + 2.0) * c * rpa / (r2 * r2)
    G = np.zeros((n, d))
    np.add.at(G, iu, g[:, None] * D)
    np.add.at(G, ju, -g[:, None] * D)
    B = g[:, None, None] * np.eye(d)[None] + t[:, None, None] * np.einsum("pa,pb->pab", D, D)
    H = np.zeros((n, n, d, d))
    np.add.at(H, (iu, iu), B)
    np.add.at(H, (ju, ju), B)
    np.add.at(H, (iu, ju), -B)
    np.add.at(H, (ju, iu), -B)
    H = H.transpose(0, 2, 1, 3).reshape(nd, nd)
    return U, G.ravel(), H, min_dist


def band_inertia(ab, tol):
    """Inertia of a symmetric banded matrix by LDL^T without pivoting.

    ``ab`` holds the lower band, ``ab[i, j] = A[j + i, j]`` (LAPACK lower
    storage); it is not modified.  Returns ``(n_neg, n_zero, n_pos,
    min_abs_pivot)``; a pivot with ``|d| <= tol`` counts as zero and the
    factorization continues with that pivot replaced by ``tol``.
    """
    a = np.array(ab, dtype=float, copy=True)
    bw = a.shape[0] - 1
    n = a.shape[1]
    neg = zero = pos = 0
    min_piv = np.inf
    for j in range(n):
        dj = a[0, j]
        if abs(dj) < min_piv:
            min_piv = abs(dj)
        if abs(dj) <= tol:
            zero += 1
            dj = tol
        elif dj < 0:
            neg += 1
        else:
            pos += 1
        m = min(bw, n - 1 - j)
        if m == 0:
            continue
        col = a[1:m + 1, j].copy()
        lcol = col / dj
        for qq in range(1, m + 1):
            a[0:m - qq + 1, j + qq] -= lcol[qq - 1:m] * col[qq - 1]
    return neg, zero, pos, float(min_piv)


def _qr_pos(Z):
    Qm, Rm = np.linalg.qr(Z)
    s = np.sign(np.diag(Rm))
    s[s == 0] = 1.0
    return Qm * s


def gauss_sweep(H1, H2, h, F0):
    """Propagate a frame through z' = H(t) z with 2-stage Gauss-Legendre steps.

    ``H1[k]``, ``H2[k]`` are H at the two Gauss nodes of step k and ``h[k]``
    the signed step.  After each step the frame is re-orthonormalized by a
    QR factorization with positive diagonal.  Returns ``(frames, drift,
    iso)`` where ``frames[k]`` is the frame after k steps, ``drift`` the
    largest per-step change of the matrix Z^T J Z and ``iso`` the largest
    isotropy residual |F^T J F| of the stored frames.
    """
    H1 = np.asarray(H1, dtype=float)
    H2 = np.asarray(H2, dtype=float)
    K = H1.shape[0]
    n2, N = F0.shape
    half = n2 // 2
    I2 = np.eye(n2)
    frames = np.empty((K + 1, n2, N))
    F = _qr_pos(np.asarray(F0, dtype=float))
    frames[0] = F

    def omega(Z):
        JZ = np.vstack([-Z[half:], Z[:half]])
        return Z.T @ JZ

    drift = 0.0
    iso = float(np.max(np.abs(omega(F)))) if N else 0.0
    A = np.empty((2 * n2, 2 * n2))
    for k in range(K):
        hk = h[k]
        A[:n2, :n2] = I2 - hk * GAUSS_A[0, 0] * H1[k]
        A[:n2, n2:] = -hk * GAUSS_A[0, 1] * H1[k]
        A[n2:, :n2] = -hk * GAUSS_A[1, 0] * H2[k]
        A[n2:, n2:] = I2 - hk * GAUSS_A[1, 1] * H2[k]
        rhs = np.vstack([H1[k] @ F, H2[k] @ F])
        S = np.linalg.solve(A, rhs)
        Z = F + 0.5 * hk * (S[:n2] + S[n2:])
        drift = max(drift, float(np.max(np.abs(omega(Z) - omega(F)))))
        F = _qr_pos(Z)
        iso = max(iso, float(np.max(np.abs(omega(F)))))
        frames[k + 1] = F
    return frames, drift, iso
