"""Coefficient matrices of the second variation and the linear Hamiltonian systems.

Index form:  int <P u', v'> + <Q u, v'> + <Q^T u', v> + <R~ u, v>  dtau.
Hamiltonian: z = (P u' + Q u, u),  z' = J B z,  J = [[0, -I], [I, 0]].
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .config_space import MassSystem
from .mcgehee import Constants, TrajectoryData, constants
from .potential import CentralConfiguration, _terms, hess_U_tilde


@dataclass(frozen=True)
class LimitBlocks:
    P0: np.ndarray
    Q0: np.ndarray
    R_tilde0: np.ndarray
    R0: Optional[np.ndarray] = None

    @property
    def N(self):
        return self.P0.shape[0]


@dataclass(frozen=True)
class CoefficientPath:
    """Sampled coefficients on ``grid`` plus an evaluator for arbitrary tau.

    ``evaluator(taus)`` returns (P, Q, R~) stacks at sigma = 0 for taus in
    [grid[0], grid[-1]]; beyond the last sample the limit blocks are used.
    """

    grid: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)
    R_tilde: np.ndarray = field(repr=False)
    limit: LimitBlocks = field(repr=False)
    sigma: float = 0.0
    evaluator: Optional[Callable] = field(default=None, repr=False, compare=False)
    trajectory: Optional[TrajectoryData] = field(default=None, repr=False, compare=False)

    @property
    def N(self) -> int:
        return self.limit.N

    @property
    def tau_max(self) -> float:
        return float(self.grid[-1])

    def with_sigma(self, sigma: float) -> "CoefficientPath":
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        return replace(self, sigma=float(sigma))

    def R_tilde_sigma(self) -> np.ndarray:
        return self.R_tilde + self.sigma * np.eye(self.N)

    def at(self, taus):
        """(P, Q, R~_sigma) stacks at the given taus, limit blocks past the grid."""
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        K = taus.size
        N = self.N
        P = np.empty((K, N, N))
        Q = np.empty((K, N, N))
        R = np.empty((K, N, N))
        inside = taus <= self.grid[-1]
        if np.any(inside):
            if self.evaluator is not None:
                P[inside], Q[inside], R[inside] = self.evaluator(taus[inside])
            else:
                P[inside], Q[inside], R[inside] = _linear_interp(self, taus[inside])
        out = ~inside
        P[out] = self.limit.P0
        Q[out] = self.limit.Q0
        R[out] = self.limit.R_tilde0
        R += self.sigma * np.eye(N)
        return P, Q, R

    def limit_sigma(self):
        L = self.limit
        return L.P0, L.Q0, L.R_tilde0 + self.sigma * np.eye(self.N)

    def distance_to_limit(self) -> np.ndarray:
        """||D(tau_k) - D0|| (spectral norm of the stacked block difference)."""
        L = self.limit
        out = np.empty(self.grid.size)
        for k in range(self.grid.size):
            D = np.block([[self.P[k] - L.P0, self.Q[k] - L.Q0],
                          [self.Q[k].T - L.Q0.T, self.R_tilde[k] - L.R_tilde0]])
            out[k] = np.linalg.norm(D, 2)
        return out


def _linear_interp(coeff, taus):
    g = coeff.grid
    idx = np.clip(np.searchsorted(g, taus) - 1, 0, g.size - 2)
    w = ((taus - g[idx]) / (g[idx + 1] - g[idx]))[:, None, None]
    out = []
    for A in (coeff.P, coeff.Q, coeff.R_tilde):
        out.append((1 - w) * A[idx] + w * A[idx + 1])
    return tuple(out)


def limit_blocks(sys: MassSystem, cc: CentralConfiguration, consts: Constants) -> LimitBlocks:
    s0 = cc.s0
    N = s0.size
    c, db, U = consts.c_alpha, consts.delta_bar, cc.u_value
    S0 = np.outer(s0, s0)
    I = np.eye(N)
    P0 = c * S0 + I
    Q0 = c * db * (I - S0)
    R0 = c * db ** 2 * S0 + (2 * U - c * db ** 2) * I
    Rt0 = R0 + hess_U_tilde(sys, cc)
    return LimitBlocks(P0, Q0, 0.5 * (Rt0 + Rt0.T), R0)


def d2W(sys: MassSystem, u0: float, s) -> np.ndarray:
    """Second derivative of W(y) = |y|^{2+alpha} U(y) - |y|^2 U(s0) at y = s, |s| = 1.

    W is homogeneous of degree two, so D^2W(rho s) = D^2W(s).
    """
    a = sys.alpha
    U, g, H, _ = _terms(sys, s)
    N = s.size
    out = (a * (a + 2) * U * np.outer(s, s) + (a + 2) * U * np.eye(N)
           + (a + 2) * (np.outer(s, g) + np.outer(g, s)) + H - 2 * u0 * np.eye(N))
    return 0.5 * (out + out.T)


def coefficients_from_state(sys: MassSystem, cc: CentralConfiguration, consts: Constants, h: float,
                            rho, rho_p, S, Sp):
    """Vectorized P, Q, R~ (sigma = 0) for states (rho, rho', s, s')."""
    c, beta = consts.c_alpha, consts.beta
    u0 = cc.u_value
    K, N = S.shape
    I = np.eye(N)
    a = rho_p / rho
    SS = np.einsum("ki,kj->kij", S, S)
    SSp = np.einsum("ki,kj->kij", S, Sp)
    SpSp = np.einsum("ki,kj->kij", Sp, Sp)
    hr = h * rho ** (beta - 2)
    P = c * SS + I
    Q = c * a[:, None, None] * (I - SS) + c * SSp
    R = ((c * a ** 2 + beta * (beta - 2) * hr)[:, None, None] * SS
         + (2 * u0 - c * a ** 2 + beta * hr)[:, None, None] * I
         + c * SpSp
         - c * a[:, None, None] * (SSp + SSp.transpose(0, 2, 1)))
    Rt = np.empty_like(R)
    for k in range(K):
        Rt[k] = R[k] + d2W(sys, u0, S[k])
    Rt = 0.5 * (Rt + Rt.transpose(0, 2, 1))
    return P, Q, Rt


def assemble_coefficients(sys: MassSystem, cc: CentralConfiguration, traj: TrajectoryData,
                          sigma: float = 0.0) -> CoefficientPath:
    consts = constants(sys, cc, traj.mode)
    if traj.N != sys.N:
        raise ValueError(f"trajectory has N = {traj.N}, system has N = {sys.N}")
    lim = limit_blocks(sys, cc, consts)
    h = traj.energy_h
    P, Q, Rt = coefficients_from_state(sys, cc, consts, h, traj.rho, traj.rho_prime, traj.s, traj.s_prime)

    def evaluator(taus):
        rho, rp, S, Sp = traj.state_at(taus)
        return coefficients_from_state(sys, cc, consts, h, rho, rp, S, Sp)

    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    return CoefficientPath(traj.grid.copy(), P, Q, Rt, lim, float(sigma), evaluator, traj)


def coefficient_path_from_functions(fP, fQ, fR, limit: LimitBlocks, tau_max: float,
                                   n_samples: int = 401, sigma: float = 0.0) -> CoefficientPath:
    """Generic coefficient path from vectorized callables tau -> (K, N, N) stacks."""
    grid = np.linspace(0.0, tau_max, n_samples)

    def evaluator(taus):
        return fP(taus), fQ(taus), fR(taus)

    P, Q, R = evaluator(grid)
    return CoefficientPath(grid, P, Q, R, limit, float(sigma), evaluator)


def constant_coefficient_path(P0, Q0, Rt0, tau_max: float = 10.0, n_samples: int = 11,
                              sigma: float = 0.0) -> CoefficientPath:
    P0, Q0, Rt0 = (np.atleast_2d(np.asarray(A, dtype=float)) for A in (P0, Q0, Rt0))
    lim = LimitBlocks(P0, Q0, Rt0)

    def rep(A):
        return lambda t: np.repeat(A[None], np.atleast_1d(t).size, axis=0)

    return coefficient_path_from_functions(rep(P0), rep(Q0), rep(Rt0), lim, tau_max, n_samples, sigma)


@dataclass(frozen=True)
class LimitSpectra:
    P0_eigs: np.ndarray
    R0_eigs: np.ndarray
    P0_vectors: np.ndarray = field(repr=False)
    R0_vectors: np.ndarray = field(repr=False)
    r1: float
    r2: float
    R_tilde0_eigs: np.ndarray

    def as_dict(self):
        return {"P0": self.P0_eigs.tolist(), "R0": self.R0_eigs.tolist(), "r1": self.r1,
                "r2": self.r2, "R_tilde0": self.R_tilde0_eigs.tolist()}


def limit_spectra(sys: MassSystem, cc: CentralConfiguration, consts: Constants) -> LimitSpectra:
    """Spectra of P0 and R0 (numerical) next to the closed forms r1, r2."""
    lim = limit_blocks(sys, cc, consts)
    ep, vp = np.linalg.eigh(lim.P0)
    er, vr = np.linalg.eigh(lim.R0)
    a, U = sys.alpha, cc.u_value
    return LimitSpectra(ep, er, vp, vr, (2 - a) ** 2 / 8 * U, 2 * U, np.linalg.eigvalsh(lim.R_tilde0))


def symplectic_J(N: int) -> np.ndarray:
    I = np.eye(N)
    Z = np.zeros((N, N))
    return np.block([[Z, -I], [I, Z]])


def B_from_blocks(P, Q, R):
    """Stacked B(tau) from stacked (P, Q, R~); works for single matrices too."""
    single = P.ndim == 2
    if single:
        P, Q, R = P[None], Q[None], R[None]
    Pi = np.linalg.inv(P)
    Pi = 0.5 * (Pi + Pi.transpose(0, 2, 1))
    PiQ = Pi @ Q
    Qt = Q.transpose(0, 2, 1)
    low = Qt @ PiQ - R
    low = 0.5 * (low + low.transpose(0, 2, 1))
    B = np.concatenate([np.concatenate([Pi, -PiQ], axis=2),
                        np.concatenate([-PiQ.transpose(0, 2, 1), low], axis=2)], axis=1)
    return B[0] if single else B


def H_from_blocks(P, Q, R):
    B = B_from_blocks(P, Q, R)
    N = P.shape[-1]
    J = symplectic_J(N)
    return J @ B


@dataclass(frozen=True)
class HamiltonianPath:
    grid: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    B_star: np.ndarray = field(repr=False)
    H_star: np.ndarray = field(repr=False)
    coeff: CoefficientPath = field(repr=False)

    @property
    def N(self):
        return self.coeff.N

    def H_at(self, taus):
        P, Q, R = self.coeff.at(taus)
        return symplectic_J(self.N) @ B_from_blocks(P, Q, R)


def assemble_hamiltonian(coeff: CoefficientPath) -> HamiltonianPath:
    P = coeff.P
    if np.min(np.linalg.eigvalsh(P)) <= 1e-12:
        raise np.linalg.LinAlgError("P(tau) numerically singular")
    B = B_from_blocks(P, coeff.Q, coeff.R_tilde_sigma())
    Bs = B_from_blocks(*coeff.limit_sigma())
    return HamiltonianPath(coeff.grid, B, Bs, symplectic_J(coeff.N) @ Bs, coeff)


def schur_min_eigs(P, Q, R) -> np.ndarray:
    """Smallest eigenvalue of R - Q^T P^{-1} Q for each stacked sample."""
    S = R - Q.transpose(0, 2, 1) @ np.linalg.solve(P, Q)
    S = 0.5 * (S + S.transpose(0, 2, 1))
    return np.linalg.eigvalsh(S)[:, 0]


def compute_sigma0(coeff: CoefficientPath, margin: float = 0.1, floor: float = 0.1, refine: int = 4) -> float:
    """sigma0 making R~_sigma - Q^T P^{-1} Q positive definite everywhere.

    The check runs on a grid ``refine`` times finer than the samples and on
    the limit blocks; the result is max(1.1 * need, need + floor).
    """
    base = coeff.with_sigma(0.0)
    fine = np.linspace(coeff.grid[0], coeff.grid[-1], refine * (coeff.grid.size - 1) + 1)
    P, Q, R = base.at(fine)
    m = schur_min_eigs(P, Q, R).min()
    P0, Q0, R0 = base.limit_sigma()
    m = min(m, schur_min_eigs(P0[None], Q0[None], R0[None])[0])
    need = max(0.0, -m)
    return float(max((1 + margin) * need, need + floor))


def write_coefficients(coeff: CoefficientPath, path) -> None:
    """Trajectory columns (when available) followed by flattened P, Q, R~ entries."""
    N = coeff.N
    names = ["tau"]
    traj = coeff.trajectory
    if traj is not None:
        names += ["rho", "rho_prime", "h"] + [f"s_{i + 1}" for i in range(N)] + [f"sp_{i + 1}" for i in range(N)]
    for M in ("P", "Q", "Rt"):
        names += [f"{M}_{i + 1}_{j + 1}" for i in range(N) for j in range(N)]
    lines = [f"# sigma={coeff.sigma!r}", "# matrices flattened row-major", ",".join(names)]
    Rt = coeff.R_tilde_sigma()
    for k, t in enumerate(coeff.grid):
        row = [t]
        if traj is not None:
            row += [traj.rho[k], traj.rho_prime[k], traj.energy_h] + list(traj.s[k]) + list(traj.s_prime[k])
        row += list(coeff.P[k].ravel()) + list(coeff.Q[k].ravel()) + list(Rt[k].ravel())
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
