"""Mass-metric linear algebra on the barycenter-free configuration space.

Ambient vectors live in R^{nd} with particle-major ordering
``q = (q_1[0..d), q_2[0..d), ...)``.  A :class:`Chart` is an M-orthonormal
basis of the zero-barycenter subspace, so chart coordinates carry the plain
Euclidean product and M-selfadjoint endomorphisms become symmetric N x N
matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class MassSystem:
    """Masses, space dimension and homogeneity exponent of the potential."""

    masses: tuple
    d: int = 2
    alpha: float = 1.0

    def __post_init__(self):
        m = tuple(float(x) for x in np.atleast_1d(np.asarray(self.masses, dtype=float)))
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "alpha", float(self.alpha))
        if len(m) < 2:
            raise ValueError(f"masses: need at least 2 particles, got {len(m)}")
        if not all(np.isfinite(x) and x > 0 for x in m):
            raise ValueError("masses: every mass must be a positive finite number")
        if self.d < 2:
            raise ValueError(f"d: space dimension must be >= 2, got {self.d}")
        if not (0.0 < self.alpha < 2.0):
            raise ValueError(f"alpha: must lie in the open interval (0, 2), got {self.alpha}")

    @property
    def n(self) -> int:
        return len(self.masses)

    @property
    def N(self) -> int:
        return self.d * (self.n - 1)

    @property
    def m(self) -> np.ndarray:
        return np.asarray(self.masses)

    @property
    def mass_diag(self) -> np.ndarray:
        """Diagonal of M, length nd."""
        return np.repeat(self.m, self.d)


@dataclass(frozen=True)
class Chart:
    """M-orthonormal basis ``basis`` (nd x N) of the barycenter-free subspace."""

    system: MassSystem
    basis: np.ndarray = field(repr=False)

    def to_ambient(self, x) -> np.ndarray:
        return self.basis @ np.asarray(x, dtype=float)

    def to_chart(self, q) -> np.ndarray:
        """Chart coordinates of an ambient vector (after removing its barycenter)."""
        q = np.asarray(q, dtype=float)
        return self.basis.T @ (self.system.mass_diag * q)

    def orthonormality_residual(self) -> float:
        G = self.basis.T @ (self.system.mass_diag[:, None] * self.basis)
        return float(np.max(np.abs(G - np.eye(G.shape[0]))))

    def barycenters(self) -> np.ndarray:
        """Mass-weighted barycenter of each column, shape (N, d)."""
        sys = self.system
        cols = self.basis.T.reshape(sys.N, sys.n, sys.d)
        return np.einsum("i,kid->kd", sys.m, cols) / sys.m.sum()


def build_chart(sys: MassSystem) -> Chart:
    """Gram-Schmidt in the mass metric over relative-position seeds.

    Seeds are ``e_{j,k} - barycenter`` for particles j = 0..n-2 and axes
    k = 0..d-1, taken in that fixed order; two passes of modified
    Gram-Schmidt keep the result orthonormal to rounding.
    """
    n, d = sys.n, sys.d
    w = sys.mass_diag
    total = sys.m.sum()
    cols = []
    for j in range(n - 1):
        for k in range(d):
            v = np.zeros((n, d))
            v[j, k] = 1.0
            v[:, k] -= sys.m[j] / total
            v = v.ravel()
            for _ in range(2):
                for c in cols:
                    v = v - np.dot(c * w, v) * c
            v = v / np.sqrt(np.dot(v * w, v))
            cols.append(v)
    chart = Chart(sys, np.array(cols).T)
    res = chart.orthonormality_residual()
    if res > ORTHO_TOL:
        raise ArithmeticError(f"chart orthonormality residual {res:.3e} exceeds {ORTHO_TOL}")
    return chart


def mass_inner(sys: MassSystem, u, v) -> float:
    """Mass scalar product <Mu, v> of two ambient vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nd = sys.n * sys.d
    if u.shape != (nd,) or v.shape != (nd,):
        raise ValueError(f"mass_inner: expected vectors of length {nd}, got {u.shape} and {v.shape}")
    return float(np.dot(sys.mass_diag * u, v))


def tensor_M(u, w) -> np.ndarray:
    """Chart matrix of u (x)_M w, i.e. the map v -> <w, v> u."""
    return np.outer(np.asarray(u, dtype=float), np.asarray(w, dtype=float))
