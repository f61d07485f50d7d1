"""Spectral index of the index form by P1 finite elements on [0, L].

Index form: I(u) = int <P u', u'> + 2 <Q u, u'> + <R~ u, u> dtau on
W_0^{1,2}; Dirichlet conditions at both ends of the truncated interval.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .forms import CoefficientPath, assemble_coefficients, compute_sigma0, schur_min_eigs
from .mcgehee import TrajectoryData, constants
from .potential import CentralConfiguration, check_bs

_G = np.sqrt(3.0) / 6.0
GAUSS2 = (np.array([0.5 - _G, 0.5 + _G]), np.array([0.5, 0.5]))
ELEMENT_SIZE = 0.025
PIVOT_TOL = 1e-12


class HypothesisError(RuntimeError):
    """A theorem hypothesis ([BS], BND) fails; the computation is refused."""


@dataclass(frozen=True)
class Discretization:
    L: float
    mesh: int
    quadrature: int = 2
    boundary: str = "dirichlet"

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.mesh < 16:
            raise ValueError("mesh must be at least 16 elements")
        if self.quadrature not in (1, 2, 3):
            raise ValueError("quadrature must be 1, 2 or 3 points per element")
        if self.boundary != "dirichlet":
            raise ValueError("only Dirichlet boundary conditions are supported")

    @property
    def h(self) -> float:
        return self.L / self.mesh

    def scaled(self, L_factor: float, mesh_factor: float) -> "Discretization":
        return Discretization(self.L * L_factor, int(round(self.mesh * mesh_factor)), self.quadrature, self.boundary)


def default_discretization(coeff: CoefficientPath, delta_tilde: Optional[float] = None,
                           element_size: float = ELEMENT_SIZE, settle_tol: float = 1e-6) -> Discretization:
    """L = max(40/|delta_tilde|, tau where the coefficients have settled), h ~ element_size."""
    L = 0.0
    if delta_tilde is not None and delta_tilde != 0:
        L = 40.0 / abs(delta_tilde)
    d = coeff.distance_to_limit()
    far = np.nonzero(d > settle_tol)[0]
    if far.size:
        L = max(L, float(coeff.grid[min(far[-1] + 1, coeff.grid.size - 1)]))
    if L <= 0:
        L = 10.0
    return Discretization(L, max(16, int(math.ceil(L / element_size))))


def _quadrature(q):
    if q == 2:
        return GAUSS2
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1), 0.5 * w


@dataclass(frozen=True)
class FormMatrices:
    A: sp.csr_matrix = field(repr=False)
    G_l2: sp.csr_matrix = field(repr=False)
    G_w12: sp.csr_matrix = field(repr=False)
    disc: Discretization
    N: int
    nodes: np.ndarray = field(repr=False)

    @property
    def bandwidth(self) -> int:
        return 2 * self.N - 1


def assemble_form(coeff: CoefficientPath, disc: Discretization) -> FormMatrices:
    """Stiffness matrix A of the index form (sigma of ``coeff`` included) and the L2 / W^{1,2} Grams.

    Unknowns are the N components at the interior nodes, node-major.
    """
    N = coeff.N
    M = disc.mesh
    h = disc.h
    xq, wq = _quadrature(disc.quadrature)
    if coeff.evaluator is None:
        dg = float(np.max(np.diff(coeff.grid)))
        if dg > 4 * h:
            warnings.warn(f"coefficient grid spacing {dg:.3g} is coarse relative to the element size {h:.3g}")
    nodes = np.linspace(0.0, disc.L, M + 1)
    # coefficients at all quadrature points, element-major
    tq = (nodes[:-1, None] + h * xq[None, :]).ravel()
    P, Q, R = coeff.at(tq)
    nq = len(xq)
    P = P.reshape(M, nq, N, N)
    Q = Q.reshape(M, nq, N, N)
    R = R.reshape(M, nq, N, N)
    phi = np.stack([1 - xq, xq])           # (2, nq)
    dphi = np.array([-1.0, 1.0]) / h        # (2,)
    w = wq * h
    # local blocks K[e, a, b] (N x N)
    K = (np.einsum("q,a,b,eqij->eabij", w, dphi, dphi, P)
         + np.einsum("q,a,bq,eqij->eabij", w, dphi, phi, Q)
         + np.einsum("q,aq,b,eqji->eabij", w, phi, dphi, Q)
         + np.einsum("q,aq,bq,eqij->eabij", w, phi, phi, R))
    mass = np.einsum("q,aq,bq->ab", w, phi, phi)
    stiff = np.outer(dphi, dphi) * h
    n_dof = (M - 1) * N
    I = np.eye(N)
    rows, cols, va, vl, vw = [], [], [], [], []
    comp = np.arange(N)
    for a in range(2):
        for b in range(2):
            node_a = np.arange(M) + a
            node_b = np.arange(M) + b
            keep = (node_a > 0) & (node_a < M) & (node_b > 0) & (node_b < M)
            ea = np.nonzero(keep)[0]
            ra = ((node_a[ea] - 1) * N)[:, None, None] + comp[None, :, None]
            cb = ((node_b[ea] - 1) * N)[:, None, None] + comp[None, None, :]
            ra, cb = np.broadcast_arrays(ra, cb)
            rows.append(ra.ravel())
            cols.append(cb.ravel())
            va.append(K[ea, a, b].ravel())
            vl.append(np.broadcast_to(mass[a, b] * I, (ea.size, N, N)).ravel())
            vw.append(np.broadcast_to((mass[a, b] + stiff[a, b]) * I, (ea.size, N, N)).ravel())
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    shape = (n_dof, n_dof)
    A = sp.coo_matrix((np.concatenate(va), (r, c)), shape=shape).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    Gl = sp.coo_matrix((np.concatenate(vl), (r, c)), shape=shape).tocsr()
    Gw = sp.coo_matrix((np.concatenate(vw), (r, c)), shape=shape).tocsr()
    return FormMatrices(A, Gl, Gw, disc, N, nodes)


def form_value(fm: FormMatrices, u: np.ndarray) -> float:
    """u^T A u for nodal values u of shape (mesh - 1, N)."""
    x = np.asarray(u, dtype=float).ravel()
    return float(x @ (fm.A @ x))


def to_band(A, bw: int) -> np.ndarray:
    """Lower band storage ab[i, j] = A[j + i, j] of a symmetric sparse or dense matrix."""
    A = sp.csr_matrix(A)
    n = A.shape[0]
    ab = np.zeros((bw + 1, n))
    for i in range(bw + 1):
        d = A.diagonal(-i)
        ab[i, : d.size] = d
    return ab


@dataclass(frozen=True)
class Inertia:
    n_neg: int
    n_zero: int
    n_pos: int
    min_pivot: float
    perturbed: bool = False


def inertia_banded(A, bw: int, tol: float = PIVOT_TOL) -> Inertia:
    """Inertia by banded LDL^T without pivoting.

    A pivot smaller than tol * scale is a breakdown; the factorization is
    then repeated on A + eta I with eta a small multiple of the scale and
    the result is flagged as perturbed.
    """
    ab = to_band(A, bw)
    scale = max(1.0, float(np.abs(ab).max()))
    neg, zero, pos, mp = kernels.band_inertia(ab, tol * scale)
    if zero == 0:
        return Inertia(neg, zero, pos, mp)
    ab2 = ab.copy()
    ab2[0] += 1e3 * tol * scale
    neg, zero, pos, mp = kernels.band_inertia(ab2, tol * scale)
    return Inertia(neg, zero, pos, mp, True)


def inertia_dense(A, tol: float = 1e-10) -> Inertia:
    """Inertia from the Bunch-Kaufman factorization A = L D L^T (scipy.linalg.ldl)."""
    A = np.asarray(A.toarray() if sp.issparse(A) else A, dtype=float)
    _, D, _ = sla.ldl(A)
    n = D.shape[0]
    ev = []
    i = 0
    while i < n:
        if i + 1 < n and D[i + 1, i] != 0.0:
            ev.extend(np.linalg.eigvalsh(D[i:i + 2, i:i + 2]))
            i += 2
        else:
            ev.append(D[i, i])
            i += 1
    ev = np.array(ev)
    s = tol * max(1.0, float(np.abs(ev).max()))
    return Inertia(int(np.sum(ev < -s)), int(np.sum(np.abs(ev) <= s)), int(np.sum(ev > s)), float(np.abs(ev).min()))


def n_minus(fm_or_A, bw: Optional[int] = None) -> int:
    if isinstance(fm_or_A, FormMatrices):
        return inertia_banded(fm_or_A.A, fm_or_A.bandwidth).n_neg
    return inertia_banded(fm_or_A, bw).n_neg


def spectrum_head(fm: FormMatrices, k: int = 6, lower_bound: Optional[float] = None) -> np.ndarray:
    """Smallest k eigenvalues of the pencil (A, G_l2) by shift-invert below the spectrum."""
    n = fm.A.shape[0]
    k = min(k, n - 1)
    if n <= 1500:
        return sla.eigh(fm.A.toarray(), fm.G_l2.toarray(), eigvals_only=True, subset_by_index=[0, k - 1])
    shift = (lower_bound if lower_bound is not None else 0.0) - 1.0
    # fixed start vector keeps reports reproducible run to run
    v0 = np.ones(n) / np.sqrt(n)
    vals = spla.eigsh(fm.A.tocsc(), k=k, M=fm.G_l2.tocsc(), sigma=shift, which="LM", v0=v0,
                      return_eigenvectors=False)
    return np.sort(vals)


@dataclass(frozen=True)
class MorseResult:
    index: int
    spectrum_head: np.ndarray = field(repr=False)
    stability: dict
    sigma0: Optional[float] = None
    sf_sigma: Optional[int] = None
    disc: Optional[Discretization] = None
    divergent: bool = False
    growth: tuple = ()
    perturbed: bool = False
    warnings: tuple = ()

    @property
    def stable(self) -> bool:
        return bool(self.stability.get("stable", False))

    def as_dict(self):
        return {"iota_spec": self.index, "stable": self.stable, "stability": self.stability,
                "spectrum_head": [float(v) for v in self.spectrum_head], "sigma0": self.sigma0,
                "sf_sigma": self.sf_sigma, "L": None if self.disc is None else self.disc.L,
                "mesh": None if self.disc is None else self.disc.mesh, "divergent": self.divergent,
                "growth": list(self.growth), "perturbed": self.perturbed, "warnings": list(self.warnings)}


def _index_at(coeff, disc):
    fm = assemble_form(coeff, disc)
    inn = inertia_banded(fm.A, fm.bandwidth)
    return fm, inn


def spectral_index(coeff: CoefficientPath, disc: Optional[Discretization] = None, bs_holds: Optional[bool] = None,
                   delta_tilde: Optional[float] = None, k_head: int = 6) -> MorseResult:
    """Number of negative eigenvalues of the discretized index form.

    With [BS] the count is replayed at (1.5L, 2 mesh) and (2L, 4 mesh) and
    flagged stable when all three agree.  When [BS] fails the count is
    reported at L, 1.5L, 2L with the element size fixed (divergence check).
    """
    if disc is None:
        disc = default_discretization(coeff, delta_tilde)
    warn = []
    fm, inn = _index_at(coeff, disc)
    lb = float(schur_min_eigs(*coeff.at(np.linspace(0, disc.L, 4 * disc.mesh + 1))).min())
    head = spectrum_head(fm, k_head, min(lb, 0.0))
    perturbed = inn.perturbed
    if inn.perturbed:
        warn.append("FACTORIZATION_PERTURBED")
    if bs_holds is False:
        warn.append("BS_FAILS_INDEX_MAY_DIVERGE")
        counts = [inn.n_neg]
        for f in (1.5, 2.0):
            _, i2 = _index_at(coeff, disc.scaled(f, f))
            counts.append(i2.n_neg)
            perturbed |= i2.perturbed
        growing = all(b > a for a, b in zip(counts, counts[1:]))
        stab = {"stable": False, "replays": {"L": counts[0], "1.5L": counts[1], "2L": counts[2]},
                "strictly_increasing": growing}
        return MorseResult(inn.n_neg, head, stab, disc=disc, divergent=growing, growth=tuple(counts),
                           perturbed=perturbed, warnings=tuple(warn))
    reps = {"L,mesh": inn.n_neg}
    for (fl, fmsh), key in (((1.5, 2.0), "1.5L,2mesh"), ((2.0, 4.0), "2L,4mesh")):
        _, i2 = _index_at(coeff, disc.scaled(fl, fmsh))
        reps[key] = i2.n_neg
        perturbed |= i2.perturbed
    stable = len(set(reps.values())) == 1
    if not stable:
        warn.append("INDEX_NOT_STABLE_UNDER_REFINEMENT")
    return MorseResult(inn.n_neg, head, {"stable": stable, "replays": reps}, disc=disc, perturbed=perturbed,
                       warnings=tuple(warn))


@dataclass(frozen=True)
class SpectralFlowResult:
    sf: int
    n_minus_start: int
    n_minus_end: int
    sigma0: float
    crossings: tuple
    monotone: bool
    endpoint_identity: bool
    enlarged: bool = False

    def as_dict(self):
        return {"sf_sigma": self.sf, "n_minus_start": self.n_minus_start, "n_minus_end": self.n_minus_end,
                "sigma0": self.sigma0, "crossings": [list(c) for c in self.crossings], "monotone": self.monotone,
                "endpoint_identity": self.endpoint_identity, "sigma0_enlarged": self.enlarged}


def sigma_spectral_flow(coeff: CoefficientPath, disc: Discretization, sigma0: float, n_grid: int = 64,
                        max_bisect: int = 40, sigma_tol: float = 1e-10) -> SpectralFlowResult:
    """Spectral flow of sigma -> A + sigma G_w12 over [0, sigma0].

    Eigenvalues increase with sigma (G_w12 is positive definite), so each
    crossing is a drop of n_-.  Grid intervals where n_- drops by more than
    one are bisected until the drops are separated or the interval is
    below sigma_tol (then the crossing is reported with its multiplicity).
    """
    fm = assemble_form(coeff.with_sigma(0.0), disc)
    A, G, bw = fm.A, fm.G_w12, fm.bandwidth

    def nm(s):
        return inertia_banded(A + s * G, bw).n_neg

    enlarged = False
    s0 = float(sigma0)
    end = inertia_banded(A + s0 * G, bw)
    while end.n_neg > 0 or end.n_zero > 0:
        s0 *= 2.0
        enlarged = True
        end = inertia_banded(A + s0 * G, bw)
    grid = np.linspace(0.0, s0, n_grid + 1)
    counts = [nm(s) for s in grid]
    crossings = []
    monotone = True
    for i in range(n_grid):
        a, b, na, nb = grid[i], grid[i + 1], counts[i], counts[i + 1]
        if nb > na:
            monotone = False
        stack = [(a, b, na, nb)]
        while stack:
            a1, b1, n1, n2 = stack.pop()
            drop = n1 - n2
            if drop == 0:
                continue
            if drop == 1 or b1 - a1 < sigma_tol:
                crossings.append((0.5 * (a1 + b1), drop))
                continue
            m = 0.5 * (a1 + b1)
            nm_ = nm(m)
            if nm_ > n1 or nm_ < n2:
                monotone = False
            stack.append((m, b1, nm_, n2))
            stack.append((a1, m, n1, nm_))
    crossings.sort()
    sf = int(sum(d for _, d in crossings))
    return SpectralFlowResult(sf, counts[0], counts[-1], s0, tuple(crossings), monotone,
                              sf == counts[0] - counts[-1], enlarged)


def relative_morse_index(S, T, tol: float = 1e-9, angle_tol: float = 1e-8) -> int:
    """I(S, T) = dim(E+(S) meet E-(T)) - dim(E-(S) meet E+(T)) via principal angles.

    E-(T) is the orthogonal complement of E+(T) (T nonsingular), so each
    intersection is measured by the sines against that complement.
    """
    S = np.asarray(S, dtype=float)
    T = np.asarray(T, dtype=float)
    es, vs = np.linalg.eigh(0.5 * (S + S.T))
    et, vt = np.linalg.eigh(0.5 * (T + T.T))
    for e, name in ((es, "S"), (et, "T")):
        if np.min(np.abs(e)) <= tol * max(1.0, np.abs(e).max()):
            raise ValueError(f"{name} is numerically singular")

    def meet(V, W_perp):
        # sines of the principal angles between span V and W are the singular values of W_perp^T V
        if V.shape[1] == 0:
            return 0
        if W_perp.shape[1] == 0:
            return V.shape[1]
        sines = sla.svdvals(W_perp.T @ V)
        return V.shape[1] - int(np.sum(sines >= angle_tol))

    return meet(vs[:, es > 0], vt[:, et > 0]) - meet(vs[:, es < 0], vt[:, et < 0])


@dataclass(frozen=True)
class IndexTheoremReport:
    iota_spec: int
    iota_geo: int
    sf_sigma: int
    sigma_path_maslov: int
    sigma0: float
    stability: dict
    bnd: dict
    rectangle: dict
    chain_holds: bool
    mismatches: tuple
    morse: MorseResult = field(repr=False)
    details: dict = field(default_factory=dict, repr=False)

    def as_dict(self):
        return {"iota_spec": self.iota_spec, "iota_geo": self.iota_geo, "sf_sigma": self.sf_sigma,
                "sigma_path_maslov": self.sigma_path_maslov, "sigma0": self.sigma0, "stability": self.stability,
                "bnd": self.bnd, "rectangle": self.rectangle, "chain_holds": self.chain_holds,
                "mismatches": list(self.mismatches), "morse": self.morse.as_dict(), **self.details}


def verify_index_theorem(sys, cc: CentralConfiguration, traj: TrajectoryData, disc: Optional[Discretization] = None,
                         step: float = 0.02, sigma_samples: int = 65,
                         tau_far: Optional[float] = None) -> IndexTheoremReport:
    """iota_spec = sf_sigma = -sigma_path_maslov = iota_geo, each computed independently."""
    from .maslov import geometric_index, sigma_path_maslov
    from .symplectic import bnd_check, horizontal_lagrangian, hyperbolic_splitting, stable_path
    from .forms import assemble_hamiltonian

    bs = check_bs(cc)
    if not bs.holds:
        raise HypothesisError(f"[BS] fails (margin {bs.margin:.6g}); "
                              "the spectral index is infinite and the stable family is not defined")
    k = constants(sys, cc, traj.mode)
    coeff = assemble_coefficients(sys, cc, traj)
    ham = assemble_hamiltonian(coeff)
    split = hyperbolic_splitting(ham.H_star)
    if not split.exists:
        raise HypothesisError(f"limit system not hyperbolic: {split.reason}")
    sp0 = stable_path(ham, 0.0, tau_far, step, split)
    bnd = bnd_check(split, sp0.frame_at(0.0))
    if not (bnd.limit_transversal and bnd.initial_transversal):
        raise HypothesisError(f"BND fails: {bnd.as_dict()}")
    if disc is None:
        disc = default_discretization(coeff, k.delta_tilde)
    morse = spectral_index(coeff, disc, bs_holds=True)
    sigma0 = compute_sigma0(coeff)
    sf = sigma_spectral_flow(coeff, disc, sigma0)
    geo = geometric_index(sp0)
    spm = sigma_path_maslov(coeff, sigma0, 0.0, step, sigma_samples, tau_far=tau_far)
    chain = {"iota_spec=sf_sigma": morse.index == sf.sf,
             "sf_sigma=-sigma_path_maslov": sf.sf == -spm.index,
             "-sigma_path_maslov=iota_geo": -spm.index == geo.index,
             "iota_spec=iota_geo": morse.index == geo.index}
    mism = tuple(k_ for k_, ok in chain.items() if not ok)
    stability = {"morse_stable": morse.stable, "sf_endpoint_identity": sf.endpoint_identity,
                 "sf_monotone": sf.monotone, "omega_drift": sp0.omega_drift, "isotropy": sp0.isotropy,
                 "maslov_reliable": geo.maslov.reliable and spm.maslov.reliable}
    rect = {"limit_edge_zero": spm.limit_edge_zero, "far_edge_zero": spm.far_edge_zero,
            "uniform_sign": spm.uniform_sign}
    details = {"geometric": geo.as_dict(), "sigma_path": spm.as_dict(), "spectral_flow": sf.as_dict(),
               "bs": bs.as_dict()}
    return IndexTheoremReport(morse.index, geo.index, sf.sf, spm.index, sigma0, stability, bnd.as_dict(), rect,
                              not mism, mism, morse, details)


def write_triplets(A, path, label: str = "") -> None:
    """Sparse export: header with the shape, then 'row col value' lines (0-based, upper triangle included)."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    lines = [f"# sparse symmetric matrix {label}".rstrip(), f"# shape={C.shape[0]}x{C.shape[1]} nnz={C.nnz} base=0"]
    lines += [f"{C.row[i]} {C.col[i]} {float(C.data[i])!r}" for i in order]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_triplets(path) -> sp.csr_matrix:
    shape = None
    r, c, v = [], [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("shape="):
                    a, b = tok[6:].split("x")
                    shape = (int(a), int(b))
            continue
        if line.strip():
            i, j, x = line.split()
            r.append(int(i))
            c.append(int(j))
            v.append(float(x))
    if shape is None:
        raise ValueError("missing shape header")
    return sp.coo_matrix((v, (r, c)), shape=shape).tocsr()
