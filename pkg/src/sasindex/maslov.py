"""Maslov index of Lagrangian paths against a fixed Lagrangian L0.

Two independent routes are implemented:

* crossing forms (regular-path formula with the n+ / -n- endpoint rule);
* the rotation definition: count eigenphases of the unitary
  W(t) = U0^* U(t) U(t)^T conj(U0) of e^{-eps J} l(t) passing through 1.

Sign convention.  For a path l and a fixed L0 the crossing-form sum
``rs_index`` is mu(L0, l) with Q(v) = d/dt omega(v, w(t)), omega(x, y) =
<Jx, y>, so that t -> e^{tJ} l crosses positively.  ``index`` is the pair
taken in the order (l, L0), mu(l, L0) = -mu(L0, l); the geometric index is
-mu(E^s(tau0), L0).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from . import kernels
from .forms import B_from_blocks, CoefficientPath, assemble_hamiltonian, symplectic_J
from .symplectic import (LagrangianFrame, NotHyperbolicError, StablePath, gap_distance, horizontal_lagrangian,
                         hyperbolic_splitting, stable_path, sweep_plan, transversality_margin)

LOCATION_TOL = 1e-9
RANK_TOL = 1e-7
REGULAR_TOL = 1e-7


class MaslovError(RuntimeError):
    pass


def _orthonormal(F):
    Q, R = np.linalg.qr(F)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


class LagrangianPath:
    """A continuous path t -> frame (2N x N) on [a, b], evaluated lazily with a cache.

    ``func`` may return any full-rank frame; it is orthonormalized here.
    ``n_samples`` is the initial sampling density for crossing detection.
    """

    def __init__(self, func: Callable, a: float, b: float, n_samples: int = 129, name: str = ""):
        if not b > a:
            raise ValueError("path interval must have a < b")
        self.func = func
        self.a = float(a)
        self.b = float(b)
        self.n_samples = int(n_samples)
        self.name = name
        self._cache = {}

    def __call__(self, t: float) -> np.ndarray:
        t = float(t)
        F = self._cache.get(t)
        if F is None:
            F = _orthonormal(np.asarray(self.func(t), dtype=float))
            if len(self._cache) < 200000:
                self._cache[t] = F
        return F

    @property
    def N(self) -> int:
        return self(self.a).shape[1]

    def restricted(self, a: float, b: float) -> "LagrangianPath":
        if a < self.a - 1e-15 or b > self.b + 1e-15:
            raise ValueError("sub-interval outside the path domain")
        frac = (b - a) / (self.b - self.a)
        return LagrangianPath(self.func, a, b, max(17, int(self.n_samples * frac) + 1), self.name)

    def reparametrized(self, psi: Callable, c: float, d: float) -> "LagrangianPath":
        """t in [c, d] -> l(psi(t)); psi must map c to a and d to b monotonically."""
        return LagrangianPath(lambda t: self.func(psi(t)), c, d, self.n_samples, self.name)

    def transformed(self, Phi) -> "LagrangianPath":
        Phi = np.asarray(Phi, dtype=float)
        return LagrangianPath(lambda t: Phi @ self.func(t), self.a, self.b, self.n_samples, self.name)

    def concatenated(self, other: "LagrangianPath") -> "LagrangianPath":
        if abs(other.a - self.b) > 1e-12:
            raise ValueError("paths must share the junction parameter")
        f, g, c = self.func, other.func, self.b
        return LagrangianPath(lambda t: f(t) if t <= c else g(t), self.a, other.b,
                              self.n_samples + other.n_samples, self.name)


def as_frame_matrix(L0, N: int) -> np.ndarray:
    if L0 is None:
        return horizontal_lagrangian(N).F
    if isinstance(L0, LagrangianFrame):
        return L0.F
    return _orthonormal(np.asarray(L0, dtype=float))


def _intersection_matrix(F0, F):
    """F0^T J F; singular exactly when span F meets span F0."""
    N = F.shape[1]
    JF = np.vstack([-F[N:], F[:N]])
    return F0.T @ JF


@dataclass(frozen=True)
class Crossing:
    location: float
    kernel_dim: int
    signature: int = 0
    n_plus: int = 0
    n_minus: int = 0
    regular: bool = True
    form_eigs: tuple = ()

    def as_dict(self):
        return {"location": self.location, "kernel_dim": self.kernel_dim, "signature": self.signature,
                "n_plus": self.n_plus, "n_minus": self.n_minus, "regular": self.regular}


@dataclass(frozen=True)
class MaslovResult:
    crossings: list
    index: int
    rs_index: int
    method: str
    endpoint_convention_applied: bool
    reliable: bool = True
    oracle_index: Optional[int] = None

    def as_dict(self):
        return {"index": self.index, "method": self.method, "reliable": self.reliable,
                "endpoint_convention_applied": self.endpoint_convention_applied,
                "crossings": [c.as_dict() for c in self.crossings]}


def _smin(path, F0, t):
    return np.linalg.svd(_intersection_matrix(F0, path(t)), compute_uv=False)[-1]


def _det(path, F0, t, ref=None):
    """det(F0^T J F(t)), with the frame orientation normalized against ``ref``."""
    F = path(t)
    d = np.linalg.det(_intersection_matrix(F0, F))
    if ref is not None and np.linalg.det(ref.T @ F) < 0:
        d = -d
    return d


def _adaptive_grid(path, n, a, b, max_gap=0.25, max_points=20000):
    """Uniform grid refined until consecutive subspaces are within max_gap."""
    ts = list(np.linspace(a, b, n))
    proj = {t: path(t) @ path(t).T for t in ts}
    i = 0
    while i < len(ts) - 1:
        t0, t1 = ts[i], ts[i + 1]
        if np.linalg.norm(proj[t0] - proj[t1], 2) > max_gap and t1 - t0 > 1e-12 * max(1.0, abs(b - a)):
            if len(ts) >= max_points:
                raise MaslovError("path moves too fast to sample: refinement budget exhausted")
            m = 0.5 * (t0 + t1)
            proj[m] = path(m) @ path(m).T
            ts.insert(i + 1, m)
            continue
        i += 1
    return np.array(ts)


def _scan(path, F0, n, a, b, rank_tol, location_tol):
    ts = _adaptive_grid(path, n, a, b)
    n = ts.size
    sm = np.array([_smin(path, F0, t) for t in ts])
    found = []
    for i in range(n - 1):
        ref = path(ts[i])
        d0 = _det(path, F0, ts[i])
        d1 = _det(path, F0, ts[i + 1], ref)
        if d0 == 0.0 or d0 * d1 >= 0:
            continue
        r = brentq(lambda t: _det(path, F0, t, ref), ts[i], ts[i + 1], xtol=location_tol,
                   rtol=4 * np.finfo(float).eps)
        found.append(r)
    # local minima of the smallest singular value catch even-multiplicity touches
    for i in range(n):
        left = sm[i - 1] if i > 0 else np.inf
        right = sm[i + 1] if i < n - 1 else np.inf
        # flat stretches (a settled tail) produce rounding-level dips; skip them
        if not (sm[i] < (1 - 1e-8) * min(left, right) or sm[i] < rank_tol):
            continue
        lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, n - 1)]
        res = minimize_scalar(lambda t: _smin(path, F0, t), bounds=(lo, hi), method="bounded",
                              options={"xatol": location_tol})
        cand = [(res.fun, res.x), (sm[i], ts[i])]
        val, loc = min(cand)
        found.append(loc if val < 1e3 * rank_tol else None)
    locs = sorted(t for t in found if t is not None)
    out = []
    for t in locs:
        if out and abs(t - out[-1][0]) < 1e3 * location_tol:
            continue
        j = int(np.clip(np.searchsorted(ts, t) - 1, 0, n - 2))
        out.append((t, float(ts[j + 1] - ts[j])))
    return out


def _kernel(path, F0, t, rank_tol, spacing):
    M = _intersection_matrix(F0, path(t))
    _, s, Vt = np.linalg.svd(M)
    # tolerance scaled with the local slope of s_min: a root located to
    # location_tol leaves a residual of order slope * location_tol
    h = 1e-3 * spacing
    slope = max(_smin(path, F0, t + h) if t + h <= path.b else 0.0,
                _smin(path, F0, t - h) if t - h >= path.a else 0.0) / h
    tol = max(rank_tol, 1e2 * LOCATION_TOL * slope)
    k = int(np.sum(s < tol))
    return k, Vt[len(s) - k:].T


class CrossingBracket(NamedTuple):
    location: float
    kernel_dim: int
    spacing: float


def detect_crossings(path: LagrangianPath, L0=None, rank_tol: float = RANK_TOL,
                     location_tol: float = LOCATION_TOL, max_refine: int = 4) -> list:
    """Locate parameters where path(t) meets L0, as CrossingBracket(location, kernel_dim, spacing).

    ``spacing`` is the local sampling interval around the root; sampling is
    adaptive, so intervals where the subspace moves fast are finer.

    The sampling is doubled until two successive passes agree on the
    located crossings; raises :class:`MaslovError` otherwise.
    """
    F0 = as_frame_matrix(L0, path.N)
    n = path.n_samples
    prev = None
    for _ in range(max_refine + 1):
        cur = []
        for t, spacing in _scan(path, F0, n, path.a, path.b, rank_tol, location_tol):
            k, _ = _kernel(path, F0, t, rank_tol, spacing)
            if k > 0:
                cur.append(CrossingBracket(float(t), k, spacing))
        if prev is not None and len(prev) == len(cur) and all(
                p[1] == c[1] and abs(p[0] - c[0]) < 1e3 * location_tol for p, c in zip(prev, cur)):
            return cur
        prev = cur
        n = 2 * n - 1
    raise MaslovError(f"crossing set did not stabilize after {max_refine} refinements: {prev}")


def _transversal_complement(F, W):
    N = F.shape[1]
    return np.linalg.svd(np.hstack([F, W]), compute_uv=False)[-1] > 1e-6 * np.sqrt(N)


def crossing_form(path: LagrangianPath, t_star: float, L0=None, W=None, delta: Optional[float] = None,
                  rank_tol: float = RANK_TOL, regular_tol: float = REGULAR_TOL,
                  spacing: Optional[float] = None) -> Crossing:
    """Crossing form on l(t*) meet L0 by a symmetric difference quotient.

    For kernel vectors v_i, w_j(t) in W solves v_j + w_j(t) in l(t) and the
    form is d/dt omega(v_i, w_j(t)) at t*.  W defaults to J L0, rotated by
    e^{theta J} if it is not transversal to l(t*); a user supplied W must
    be transversal.
    """
    N = path.N
    F0 = as_frame_matrix(L0, N)
    if spacing is None:
        spacing = (path.b - path.a) / max(path.n_samples - 1, 1)
    if delta is None:
        delta = max(1e-6, 1e-3 * spacing)
    k, C = _kernel(path, F0, t_star, rank_tol, spacing)
    if k == 0:
        raise MaslovError(f"no intersection with L0 at t = {t_star}")
    Fs = path(t_star)
    V = Fs @ C
    J = symplectic_J(N)
    if W is None:
        Wf = None
        for theta in (0.0, 0.3, 0.7, 1.1, 1.9, 2.5):
            cand = sla.expm(theta * J) @ J @ F0
            if _transversal_complement(Fs, cand):
                Wf = cand
                break
        if Wf is None:
            raise MaslovError("no transversal complement found")
    else:
        Wf = as_frame_matrix(W, N)
        if not _transversal_complement(Fs, Wf):
            raise MaslovError("complement W is not transversal to the path at the crossing")

    def wvec(t):
        A = np.hstack([path(t), -Wf])
        coef = np.linalg.solve(A, V)
        return Wf @ coef[N:]

    if t_star - delta < path.a:
        t0, t1, t2 = t_star, t_star + delta, t_star + 2 * delta
        dW = (-3 * wvec(t0) + 4 * wvec(t1) - wvec(t2)) / (2 * delta)
    elif t_star + delta > path.b:
        t0, t1, t2 = t_star, t_star - delta, t_star - 2 * delta
        dW = (3 * wvec(t0) - 4 * wvec(t1) + wvec(t2)) / (2 * delta)
    else:
        dW = (wvec(t_star + delta) - wvec(t_star - delta)) / (2 * delta)
    G = (J @ V).T @ dW
    G = 0.5 * (G + G.T)
    ev = np.linalg.eigvalsh(G)
    npos = int(np.sum(ev > regular_tol))
    nneg = int(np.sum(ev < -regular_tol))
    return Crossing(float(t_star), k, npos - nneg, npos, nneg, bool(npos + nneg == k), tuple(float(e) for e in ev))


def _unitary_W(F, F0):
    N = F.shape[1]
    U = F[:N] + 1j * F[N:]
    U0 = F0[:N] + 1j * F0[N:]
    A = U0.conj().T @ U
    return A @ A.T


def _phases(path, F0, t):
    return np.angle(np.linalg.eigvals(_unitary_W(path(t), F0)))


def _wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


def _match(p, q):
    D = np.abs(_wrap(q[None, :] - p[:, None]))
    r, c = linear_sum_assignment(D)
    return q[c[np.argsort(r)]]


def _count_passes(path, F0, eps, ts0, max_depth=30):
    """Net counterclockwise passes of the eigenphases of e^{-2i eps} W(t) through 0."""
    shift = -2.0 * eps
    total = 0
    stack = [(ts0[i], ts0[i + 1], 0) for i in range(len(ts0) - 1)][::-1]
    ph_cache = {}

    def ph(t):
        v = ph_cache.get(t)
        if v is None:
            v = _wrap(_phases(path, F0, t) + shift)
            ph_cache[t] = v
        return v

    while stack:
        a, b, depth = stack.pop()
        p = ph(a)
        q = _match(p, ph(b))
        d = _wrap(q - p)
        if np.max(np.abs(d)) > np.pi / 4 and depth < max_depth:
            m = 0.5 * (a + b)
            stack.append((m, b, depth + 1))
            stack.append((a, m, depth + 1))
            continue
        end = p + d
        total += int(np.sum((p < 0) & (end >= 0)) - np.sum((p >= 0) & (end < 0)))
    return total


def epsilon_rotation_index(path: LagrangianPath, L0=None, eps: Optional[float] = None,
                           zero_tol: float = 1e-6, n_samples: Optional[int] = None) -> int:
    """mu(L0, l) as the intersection number of e^{-eps J} l with the cycle of L0.

    With eps unset, it starts below a quarter of the smallest nonzero
    endpoint eigenphase and is halved until the count is stable twice.
    """
    F0 = as_frame_matrix(L0, path.N)
    ts = np.linspace(path.a, path.b, n_samples or path.n_samples)
    if eps is not None:
        return _count_passes(path, F0, eps, ts)
    end = np.concatenate([_phases(path, F0, path.a), _phases(path, F0, path.b)])
    nz = np.abs(end)
    nz = nz[nz > zero_tol]
    e = min(0.05, 0.25 * float(nz.min())) if nz.size else 0.05
    counts = [_count_passes(path, F0, e, ts)]
    for _ in range(12):
        e *= 0.5
        counts.append(_count_passes(path, F0, e, ts))
        if len(counts) >= 3 and counts[-1] == counts[-2] == counts[-3]:
            return counts[-1]
    raise MaslovError(f"rotation count did not stabilize: {counts}")


def maslov_index(path: LagrangianPath, L0=None, W=None, oracle: bool = False,
                 rank_tol: float = RANK_TOL, location_tol: float = LOCATION_TOL) -> MaslovResult:
    """mu(l, L0) over the path interval (see the module docstring for the sign).

    Crossing forms are used when every crossing is regular; otherwise the
    rotation count is used.  ``oracle=True`` runs both and raises on a
    mismatch.
    """
    F0 = as_frame_matrix(L0, path.N)
    cr = detect_crossings(path, F0, rank_tol, location_tol)
    forms = [crossing_form(path, c.location, F0, W, rank_tol=rank_tol, spacing=c.spacing) for c in cr]
    ends = 1e3 * location_tol
    rs = 0
    applied = False
    for c in forms:
        if c.location - path.a <= ends:
            rs += c.n_plus
            applied = True
        elif path.b - c.location <= ends:
            rs -= c.n_minus
            applied = True
        else:
            rs += c.signature
    regular = all(c.regular for c in forms)
    method = "crossing-form"
    orc = None
    if not regular or oracle:
        orc = epsilon_rotation_index(path, F0)
        if not regular:
            rs, method = orc, "epsilon-rotation"
        elif orc != rs:
            raise MaslovError(f"crossing-form sum {rs} disagrees with rotation count {orc}")
    return MaslovResult(forms, -rs, rs, method, applied, True, None if orc is None else -orc)


def balancing(F, cap: float = 1e6) -> np.ndarray:
    """Symplectic Phi = diag(I/s, s I) that balances the two blocks of a frame.

    Phi maps L0 = {u = 0} to itself, so indices against L0 are unchanged;
    it keeps Lagrangians with |p| >> |u| (large cross terms Q) away from
    the nearly degenerate regime where crossings become needle-like.
    """
    F = np.asarray(F, dtype=float)
    N = F.shape[1]
    X, Y = F[:N], F[N:]
    sv = np.linalg.svd(Y, compute_uv=False)
    if sv[-1] < 1e-8:
        s = 1.0
    else:
        r = np.linalg.svd(X @ np.linalg.inv(Y), compute_uv=False)
        ratio = np.sqrt(max(r[0], 1e-300) * max(r[-1], 1e-300))
        s = float(np.clip(np.sqrt(ratio), 1.0 / np.sqrt(cap), np.sqrt(cap))) if ratio > 0 else 1.0
    return np.diag(np.r_[np.full(N, 1.0 / s), np.full(N, s)])


def stable_lagrangian_path(sp: StablePath, tau_end: Optional[float] = None, n_samples: Optional[int] = None,
                           balance: bool = True) -> LagrangianPath:
    b = sp.tau_far if tau_end is None else tau_end
    n = n_samples or max(129, int(8 * (b - sp.tau_min)) + 1)
    if balance:
        Phi = balancing(sp.splitting.stable.F)
        return LagrangianPath(lambda t: Phi @ sp.matrix_at(t), sp.tau_min, b, n, "stable")
    return LagrangianPath(sp.matrix_at, sp.tau_min, b, n, "stable")


@dataclass(frozen=True)
class GeometricIndexResult:
    index: int
    tau_end: float
    tail_margin: float
    tail_gap: float
    maslov: MaslovResult = field(repr=False)
    stable: StablePath = field(repr=False, compare=False)

    def as_dict(self):
        return {"iota_geo": self.index, "tau_end": self.tau_end, "tail_margin": self.tail_margin,
                "tail_gap": self.tail_gap, "maslov": self.maslov.as_dict(),
                "omega_drift": self.stable.omega_drift, "isotropy": self.stable.isotropy}


def settle_tau(sp: StablePath, fraction: float = 0.5):
    """Smallest tau beyond which every stored frame stays within fraction*margin of E^s_*.

    margin is the transversality of E^s_* to L0; inside this gap no frame
    can meet L0, so the tail contributes no crossing.
    """
    Es = sp.splitting.stable
    margin = transversality_margin(Es)
    P = Es.projector()
    gaps = np.array([np.linalg.norm(F @ F.T - P, 2) for F in sp.frames])
    ok = gaps < fraction * margin
    if not ok[0]:
        raise MaslovError(f"tail not settled: gap {gaps[0]:.2e} at tau_far vs margin {margin:.2e}")
    # taus decrease; find the first index where the tail condition fails
    bad = np.nonzero(~ok)[0]
    k = bad[0] if bad.size else len(ok)
    idx = k - 1
    return float(sp.taus[idx]), margin, float(gaps[: k].max())


def geometric_index(source, tau_end: Optional[float] = None, step: float = 0.02, oracle: bool = False,
                    bs_holds: Optional[bool] = None) -> GeometricIndexResult:
    """iota_geo = -mu(E^s(tau0), L0; tau0 in [0, tau_end]).

    ``source`` is a CoefficientPath, a HamiltonianPath or a StablePath.
    """
    if bs_holds is False:
        raise MaslovError("[BS] fails: the stable family is not defined, geometric index refused")
    if isinstance(source, StablePath):
        sp = source
    else:
        ham = assemble_hamiltonian(source) if isinstance(source, CoefficientPath) else source
        split = hyperbolic_splitting(ham.H_star)
        if not split.exists:
            raise NotHyperbolicError(f"limit system not hyperbolic ({split.reason}); geometric index refused")
        sp = stable_path(ham, 0.0, None, step, split)
    if transversality_margin(sp.splitting.stable) <= 1e-8:
        raise MaslovError("limit stable space meets L0 (BND fails at the limit)")
    t_set, margin, tail_gap = settle_tau(sp)
    if tau_end is None:
        tau_end = max(t_set, sp.tau_min + 1.0)
    elif tau_end < t_set:
        raise MaslovError(f"tau_end = {tau_end} before the tail settles at {t_set}")
    path = stable_lagrangian_path(sp, tau_end)
    res = maslov_index(path, None, oracle=oracle)
    # the geometric index carries one overall minus sign, applied here only
    return GeometricIndexResult(-res.index, float(tau_end), margin, tail_gap, res, sp)


@dataclass(frozen=True)
class SigmaPathResult:
    index: int
    sigma0: float
    maslov: MaslovResult = field(repr=False)
    limit_edge_margin: float
    limit_edge_zero: bool
    far_edge_crossings: int
    far_edge_zero: bool
    crossing_signs: tuple

    @property
    def uniform_sign(self) -> bool:
        s = set(np.sign(self.crossing_signs))
        return len(s) <= 1

    def as_dict(self):
        return {"sigma_path_maslov": self.index, "sigma0": self.sigma0,
                "limit_edge_margin": self.limit_edge_margin, "limit_edge_zero": self.limit_edge_zero,
                "far_edge_crossings": self.far_edge_crossings, "far_edge_zero": self.far_edge_zero,
                "uniform_sign": self.uniform_sign, "maslov": self.maslov.as_dict()}


def sigma_family(coeff: CoefficientPath, tau0: float = 0.0, tau_far: Optional[float] = None, step: float = 0.02):
    """sigma -> (frame of E^s_sigma(tau0), transversality margin of E^s_{*,sigma}), cached per sigma."""
    base = coeff.with_sigma(0.0)
    if tau_far is None:
        tau_far = coeff.tau_max
    plan = sweep_plan(base, tau0, tau_far, step)

    @lru_cache(maxsize=4096)
    def run(sigma: float):
        P0, Q0, R0 = base.with_sigma(sigma).limit_sigma()
        split = hyperbolic_splitting(symplectic_J(base.N) @ B_from_blocks(P0, Q0, R0))
        if not split.exists:
            raise NotHyperbolicError(f"limit system at sigma = {sigma} not hyperbolic")
        H1, H2 = plan.nodes(sigma)
        frames, _, iso = kernels.gauss_sweep(H1, H2, plan.hs, split.stable.F)
        if iso > 1e-8:
            raise MaslovError(f"sigma = {sigma}: propagated frames lost isotropy ({iso:.2e})")
        F = frames[-1]
        F.setflags(write=False)
        return F, transversality_margin(split.stable)

    run.plan = plan
    return run


def _sigma_stable_path(base, sigma, plan):
    ham = assemble_hamiltonian(base.with_sigma(sigma))
    split = hyperbolic_splitting(ham.H_star)
    if not split.exists:
        raise NotHyperbolicError(f"limit system at sigma = {sigma} not hyperbolic")
    return stable_path(ham, splitting=split, plan=plan)


def sigma_parameter(sigma0: float, sigma_ref: float = 1.0):
    """s in [0, 1] -> sigma = sigma_ref ((1 + sigma0/sigma_ref)^s - 1) and its inverse.

    Uniform in log(1 + sigma/sigma_ref): resonances of the sigma-path are
    narrow at small sigma and widen with sigma.
    """
    base = 1.0 + sigma0 / sigma_ref

    def fwd(u):
        return 0.0 if u <= 0 else (sigma0 if u >= 1 else sigma_ref * (base ** u - 1.0))

    def inv(sig):
        return np.log1p(sig / sigma_ref) / np.log(base)

    return fwd, inv


def sigma_path_maslov(coeff: CoefficientPath, sigma0: float, tau0: float = 0.0, step: float = 0.02,
                      n_samples: int = 257, oracle: bool = False, tau_far: Optional[float] = None) -> SigmaPathResult:
    """mu(E^s_sigma(tau0), L0; sigma in [0, sigma0]) with the other rectangle edges checked.

    The path is computed in the balanced coordinates of :func:`balancing`
    and in the logarithmic parameter of :func:`sigma_parameter`; neither
    changes the index.  Reported crossing locations are sigma values.
    """
    run = sigma_family(coeff, tau0, tau_far, step)
    Phi = balancing(run(0.0)[0])
    fwd, _ = sigma_parameter(sigma0)
    path = LagrangianPath(lambda u: Phi @ run(float(fwd(u)))[0], 0.0, 1.0, n_samples, "sigma")
    res = maslov_index(path, None, oracle=oracle)
    res = replace(res, crossings=[replace(c, location=float(fwd(c.location))) for c in res.crossings])
    # limit edge: E^s_{*,sigma} transversal to L0 for every sigma
    lim = min(run(float(fwd(u)))[1] for u in np.linspace(0.0, 1.0, n_samples))
    # far sigma edge: tau -> E^s_{sigma0}(tau) meets L0 nowhere
    sp = _sigma_stable_path(coeff.with_sigma(0.0), float(sigma0), run.plan)
    far = detect_crossings(stable_lagrangian_path(sp, balance=True))
    signs = tuple(c.signature for c in res.crossings)
    return SigmaPathResult(res.index, float(sigma0), res, float(lim), bool(lim > 1e-8), len(far), len(far) == 0, signs)


def planar_rotation_path(a: float = 0.1, b: float = np.pi - 0.1, n_samples: int = 65) -> LagrangianPath:
    """t -> e^{tJ} span(0, 1) = span(-sin t, cos t) in R^2; meets span(1, 0) at pi/2."""
    return LagrangianPath(lambda t: np.array([[-np.sin(t)], [np.cos(t)]]), a, b, n_samples, "planar")


def random_symplectic(N: int, rng, scale: float = 1.0) -> np.ndarray:
    """exp(J S) for a random symmetric S."""
    A = rng.normal(size=(2 * N, 2 * N)) * scale
    S = 0.5 * (A + A.T)
    return sla.expm(symplectic_J(N) @ S)


def random_lagrangian_path(N: int, rng, a: float = 0.0, b: float = 1.0, n_samples: int = 129,
                           scale: float = 2.0) -> LagrangianPath:
    """t -> exp(t J S) Phi L0 with random symmetric S and random symplectic Phi."""
    A = rng.normal(size=(2 * N, 2 * N)) * scale
    S = 0.5 * (A + A.T)
    JS = symplectic_J(N) @ S
    F = random_symplectic(N, rng, 0.5) @ np.vstack([np.eye(N), np.zeros((N, N))])
    return LagrangianPath(lambda t: sla.expm(t * JS) @ F, a, b, n_samples, "random")


def crossing_table(result: MaslovResult) -> list:
    return [dict(c.as_dict(), method=result.method) for c in result.crossings]


def gap_between(path: LagrangianPath, t: float, s: float) -> float:
    return gap_distance(LagrangianFrame.from_columns(path(t)), LagrangianFrame.from_columns(path(s)))
