"""Lagrangian frames, hyperbolic splittings of H* and stable-space propagation.

Phase space is R^{2N} with z = (p, u) and omega(x, y) = <J x, y>,
J = [[0, -I], [I, 0]].  L0 is the horizontal Lagrangian {u = 0}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sla

from . import kernels
from ._kernels_py import GAUSS_C
from .forms import B_from_blocks, HamiltonianPath, symplectic_J

GAP_TOL = 1e-8
TRANSVERSALITY_TOL = 1e-8
FRAME_TOL = 1e-7
ISOTROPY_TOL = 1e-8


class NotHyperbolicError(RuntimeError):
    pass


class PropagationError(RuntimeError):
    pass


def _orthonormal(F):
    Q, R = np.linalg.qr(F)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


@dataclass(frozen=True)
class LagrangianFrame:
    """Orthonormal 2N x N frame; isotropy is checked on construction."""

    F: np.ndarray = field(repr=False)
    isotropy: float = 0.0

    @classmethod
    def from_columns(cls, F, check: bool = True, tol: float = 1e-9) -> "LagrangianFrame":
        F = np.asarray(F, dtype=float)
        n2, N = F.shape
        if n2 != 2 * N:
            raise ValueError(f"a Lagrangian frame must be 2N x N, got {F.shape}")
        sv = np.linalg.svd(F, compute_uv=False)
        if sv[-1] < 1e-12 * max(1.0, sv[0]):
            raise ValueError("frame is rank deficient")
        Q = _orthonormal(F)
        iso = isotropy_residual(Q)
        if check and iso > tol:
            raise ValueError(f"frame is not isotropic (|F^T J F| = {iso:.2e})")
        Q.setflags(write=False)
        return cls(Q, iso)

    @property
    def N(self) -> int:
        return self.F.shape[1]

    @property
    def top(self):
        return self.F[: self.N]

    @property
    def bottom(self):
        return self.F[self.N:]

    def projector(self) -> np.ndarray:
        return self.F @ self.F.T

    def transformed(self, Phi) -> "LagrangianFrame":
        return LagrangianFrame.from_columns(np.asarray(Phi) @ self.F)


def isotropy_residual(F) -> float:
    F = np.asarray(F)
    N = F.shape[0] // 2
    JF = np.vstack([-F[N:], F[:N]])
    return float(np.max(np.abs(F.T @ JF))) if F.size else 0.0


def horizontal_lagrangian(N: int) -> LagrangianFrame:
    return LagrangianFrame.from_columns(np.vstack([np.eye(N), np.zeros((N, N))]))


def vertical_lagrangian(N: int) -> LagrangianFrame:
    return LagrangianFrame.from_columns(np.vstack([np.zeros((N, N)), np.eye(N)]))


def gap_distance(V: LagrangianFrame, W: LagrangianFrame) -> float:
    """Spectral norm of P_V - P_W."""
    return float(np.linalg.norm(V.projector() - W.projector(), 2))


def principal_angles(V: LagrangianFrame, W: LagrangianFrame) -> np.ndarray:
    return sla.subspace_angles(V.F, W.F)[::-1]


@dataclass(frozen=True)
class HyperbolicSplitting:
    stable: LagrangianFrame
    unstable: LagrangianFrame
    spectral_gap: float
    eigenvalues: np.ndarray = field(repr=False)
    condition: float = 1.0
    exists: bool = True


@dataclass(frozen=True)
class NotHyperbolic:
    eigenvalues: np.ndarray = field(repr=False)
    min_abs_real: float
    reason: str
    exists: bool = False


def hyperbolic_splitting(H_star, gap_tol: float = GAP_TOL):
    """Stable/unstable splitting of H* by ordered real Schur decompositions.

    Returns :class:`NotHyperbolic` when an eigenvalue has |Re| < gap_tol.
    """
    H = np.asarray(H_star, dtype=float)
    n2 = H.shape[0]
    N = n2 // 2
    ev = np.linalg.eigvals(H)
    mre = float(np.min(np.abs(ev.real)))
    if mre < gap_tol:
        return NotHyperbolic(ev, mre, f"eigenvalue with |Re| = {mre:.3e} below gap_tol {gap_tol:.1e}")
    _, Zs, sdim = sla.schur(H, output="real", sort="lhp")
    _, Zu, udim = sla.schur(H, output="real", sort="rhp")
    if sdim != N or udim != N:
        return NotHyperbolic(ev, mre, f"stable dimension {sdim}, unstable {udim}, expected {N}")
    Fs, Fu = Zs[:, :N], Zu[:, :N]
    iso = max(isotropy_residual(Fs), isotropy_residual(Fu))
    if iso > 1e-8:
        raise NotHyperbolicError(f"invariant subspaces not Lagrangian (isotropy {iso:.2e}); defective clustering")
    # invariance residuals guard against near-defective eigenvalue clusters
    res = max(np.linalg.norm(H @ Fs - Fs @ (Fs.T @ H @ Fs)), np.linalg.norm(H @ Fu - Fu @ (Fu.T @ H @ Fu)))
    if res > 1e-8 * max(1.0, np.linalg.norm(H)):
        raise NotHyperbolicError(f"invariant subspace residual {res:.2e}")
    cond = float(np.linalg.cond(np.hstack([Fs, Fu])))
    return HyperbolicSplitting(LagrangianFrame.from_columns(Fs), LagrangianFrame.from_columns(Fu), mre, ev, cond)


@dataclass(frozen=True)
class SymplecticSimilarity:
    P_transform: np.ndarray
    Z: np.ndarray
    Z_hat: np.ndarray
    congruence_residual: float
    similarity_residual: float


def symplectic_similarity(A, C) -> SymplecticSimilarity:
    """Z = [[I, A], [A^T, A^T A - C]] is carried to Z^ = [[I, 0], [0, -C]] by P = [[I, -A], [0, I]]."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    N = A.shape[0]
    if A.shape != (N, N) or C.shape != (N, N):
        raise ValueError("A and C must be N x N")
    if np.max(np.abs(A - A.T)) > 1e-12 * max(1.0, np.abs(A).max()):
        raise ValueError("A must be symmetric")
    I, O = np.eye(N), np.zeros((N, N))
    Z = np.block([[I, A], [A.T, A.T @ A - C]])
    P = np.block([[I, -A], [O, I]])
    Zh = np.block([[I, O], [O, -C]])
    J = symplectic_J(N)
    cong = float(np.max(np.abs(P.T @ Z @ P - Zh)))
    sim = float(np.max(np.abs(J @ Zh - np.linalg.solve(P, J @ Z @ P))))
    return SymplecticSimilarity(P, Z, Zh, cong, sim)


@dataclass(frozen=True)
class StablePath:
    """Frames of E^s(tau) on a decreasing grid from tau_far down to tau_min."""

    taus: np.ndarray = field(repr=False)
    frames: np.ndarray = field(repr=False)
    omega_drift: float
    isotropy: float
    ham: HamiltonianPath = field(repr=False, compare=False)
    splitting: HyperbolicSplitting = field(repr=False, compare=False)

    @property
    def tau_min(self):
        return float(self.taus[-1])

    @property
    def tau_far(self):
        return float(self.taus[0])

    def frame_at(self, tau: float) -> LagrangianFrame:
        """Frame at any tau in [tau_min, tau_far] (one Gauss step from the next grid frame)."""
        return LagrangianFrame.from_columns(self.matrix_at(tau))

    def matrix_at(self, tau: float) -> np.ndarray:
        t = self.taus
        if tau > self.tau_far:
            # beyond the seed the coefficients are taken constant at their limit
            if tau <= self.ham.coeff.tau_max:
                raise ValueError(f"tau = {tau} beyond tau_far = {self.tau_far}")
            return self.splitting.stable.F.copy()
        if tau < t[-1] - 1e-12:
            raise ValueError(f"tau = {tau} below tau_min = {t[-1]}")
        # taus decrease; find k with t[k] >= tau >= t[k+1]
        k = int(np.clip(np.searchsorted(-t, -tau, side="right") - 1, 0, t.size - 1))
        if t[k] == tau:
            return self.frames[k]
        h = tau - t[k]
        H1, H2 = _gauss_nodes(self.ham, np.array([t[k]]), np.array([h]))
        fr, _, _ = kernels.gauss_sweep(H1, H2, np.array([h]), self.frames[k])
        return fr[1]


def _gauss_nodes(ham, starts, hs):
    H1 = ham.H_at(starts + GAUSS_C[0] * hs)
    H2 = ham.H_at(starts + GAUSS_C[1] * hs)
    return H1, H2


@dataclass(frozen=True)
class SweepPlan:
    """Backward step grid with sigma-free coefficients at the Gauss nodes.

    H at the nodes for any shift sigma is rebuilt from the stored blocks, so a
    sigma-family shares one coefficient evaluation.
    """

    taus: np.ndarray = field(repr=False)
    hs: np.ndarray = field(repr=False)
    H1: np.ndarray = field(repr=False)
    H2: np.ndarray = field(repr=False)

    def nodes(self, sigma: float):
        # sigma enters H = J B only through the upper-right block: + sigma I
        if sigma == 0.0:
            return self.H1, self.H2
        N = self.H1.shape[-1] // 2
        out = []
        for H in (self.H1, self.H2):
            Hs = H.copy()
            idx = np.arange(N)
            Hs[:, idx, N + idx] += sigma
            out.append(Hs)
        return out


def sweep_plan(coeff, tau_min: float, tau_far: float, step: float = 0.02) -> SweepPlan:
    if tau_far <= tau_min:
        raise ValueError("tau_far must exceed tau_min")
    K = max(1, int(np.ceil((tau_far - tau_min) / step)))
    taus = np.linspace(tau_far, tau_min, K + 1)
    hs = np.diff(taus)
    base = coeff.with_sigma(0.0)
    J = symplectic_J(base.N)
    H1, H2 = (J @ B_from_blocks(*base.at(taus[:-1] + c * hs)) for c in GAUSS_C)
    return SweepPlan(taus, hs, H1, H2)


def default_tau_far(ham: HamiltonianPath, far_tol: float = 1e-6) -> float:
    coeff = ham.coeff
    d = coeff.distance_to_limit()
    if d[-1] > far_tol:
        raise PropagationError(f"coefficients at the last sample are {d[-1]:.2e} from the limit (> {far_tol:.1e})")
    return coeff.tau_max


def stable_path(ham: HamiltonianPath, tau_min: float = 0.0, tau_far: Optional[float] = None,
                step: float = 0.02, splitting=None, plan: Optional[SweepPlan] = None) -> StablePath:
    """Integrate z' = H(tau) z backwards from the frame of E^s_* seeded at tau_far."""
    if splitting is None:
        splitting = hyperbolic_splitting(ham.H_star)
    if not splitting.exists:
        raise NotHyperbolicError(f"limit system not hyperbolic: {splitting.reason}")
    if plan is None:
        if tau_far is None:
            tau_far = default_tau_far(ham)
        plan = sweep_plan(ham.coeff, tau_min, tau_far, step)
        H1, H2 = _gauss_nodes(ham, plan.taus[:-1], plan.hs)
    else:
        H1, H2 = plan.nodes(ham.coeff.sigma)
    frames, drift, iso = kernels.gauss_sweep(H1, H2, plan.hs, splitting.stable.F)
    if iso > ISOTROPY_TOL:
        raise PropagationError(f"propagated frames lost isotropy ({iso:.2e})")
    frames.setflags(write=False)
    return StablePath(plan.taus, frames, float(drift), float(iso), ham, splitting)


@dataclass(frozen=True)
class PropagationResult:
    frame: LagrangianFrame
    refinement_gap: float
    omega_drift: float
    isotropy: float


def propagate_stable(ham: HamiltonianPath, tau0: float, tau_far: Optional[float] = None,
                     step: float = 0.02, frame_tol: float = FRAME_TOL, check: bool = True) -> PropagationResult:
    """Frame of E^s(tau0) with a refinement check (1.5 tau_far and half the step)."""
    split = hyperbolic_splitting(ham.H_star)
    if not split.exists:
        raise NotHyperbolicError(f"limit system not hyperbolic: {split.reason}")
    if tau_far is None:
        tau_far = max(default_tau_far(ham), tau0 + step)
    path = stable_path(ham, tau0, tau_far, step, split)
    frame = LagrangianFrame.from_columns(path.frames[-1])
    gap = 0.0
    if check:
        for tf, st in ((1.5 * tau_far, step), (tau_far, 0.5 * step)):
            other = stable_path(ham, tau0, tf, st, split)
            gap = max(gap, gap_distance(frame, LagrangianFrame.from_columns(other.frames[-1])))
        if gap > frame_tol:
            raise PropagationError(f"refinement check failed: gap {gap:.2e} > frame_tol {frame_tol:.1e}")
    return PropagationResult(frame, gap, path.omega_drift, path.isotropy)


@dataclass(frozen=True)
class BNDReport:
    limit_transversal: bool
    initial_transversal: bool
    min_principal_angle: float
    limit_sigma_min: float
    initial_sigma_min: float

    def as_dict(self):
        return {k: getattr(self, k) for k in ("limit_transversal", "initial_transversal", "min_principal_angle",
                                              "limit_sigma_min", "initial_sigma_min")}


def transversality_margin(frame: LagrangianFrame) -> float:
    """Smallest singular value of the bottom block = sine of the smallest angle with L0."""
    return float(np.linalg.svd(frame.bottom, compute_uv=False)[-1])


def bnd_check(splitting, E_s_at_0: LagrangianFrame, tol: float = TRANSVERSALITY_TOL) -> BNDReport:
    if not splitting.exists:
        raise NotHyperbolicError("BND needs a hyperbolic limit system")
    a = transversality_margin(splitting.stable)
    b = transversality_margin(E_s_at_0)
    ang = float(np.arcsin(np.clip(min(a, b), 0.0, 1.0)))
    return BNDReport(bool(a > tol), bool(b > tol), ang, a, b)


def write_frame(frame: LagrangianFrame, path, label: str = "") -> None:
    """Text export: header line with shape, then the 2N x N entries column-major, one per line."""
    F = frame.F
    lines = [f"# lagrangian frame {label}".rstrip(), f"# rows={F.shape[0]} cols={F.shape[1]} order=column-major"]
    lines += [repr(float(v)) for v in F.ravel(order="F")]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_frame(path) -> LagrangianFrame:
    rows = cols = None
    vals = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("rows="):
                    rows = int(tok[5:])
                elif tok.startswith("cols="):
                    cols = int(tok[5:])
        elif line.strip():
            vals.append(float(line))
    if rows is None or cols is None or len(vals) != rows * cols:
        raise ValueError("malformed frame file")
    return LagrangianFrame.from_columns(np.array(vals).reshape((rows, cols), order="F"))
