"""The alpha-homogeneous potential, central configurations and the [BS] test.

All vectors are chart coordinates (see :mod:`sasindex.config_space`).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .config_space import Chart, MassSystem, build_chart

COLLISION_FLOOR = 1e-13
CC_TOL = 1e-10
BS_TOL = 1e-9


class CollisionError(ValueError):
    """Raised when a configuration has a mutual distance below the floor."""


class ConvergenceError(RuntimeError):
    pass


@lru_cache(maxsize=64)
def get_chart(sys: MassSystem) -> Chart:
    return build_chart(sys)


def _terms(sys: MassSystem, x, floor=COLLISION_FLOOR):
    chart = get_chart(sys)
    q = chart.to_ambient(x)
    U, g, H, dmin = kernels.pair_terms(q, sys.m, sys.d, sys.alpha, floor)
    if dmin < floor:
        raise CollisionError(f"mutual distance {dmin:.3e} below collision floor {floor:.1e}")
    phi = chart.basis
    return U, phi.T @ g, phi.T @ H @ phi, dmin


def potential_value(sys: MassSystem, q, floor=COLLISION_FLOOR) -> float:
    """U(q) = sum_{i<j} m_i m_j / |q_i - q_j|^alpha for a chart vector q."""
    return _terms(sys, q, floor)[0]


def potential_grad(sys: MassSystem, q, floor=COLLISION_FLOOR) -> np.ndarray:
    return _terms(sys, q, floor)[1]


def potential_hess(sys: MassSystem, q, floor=COLLISION_FLOOR) -> np.ndarray:
    H = _terms(sys, q, floor)[2]
    return 0.5 * (H + H.T)


def min_mutual_distance(sys: MassSystem, q) -> float:
    X = get_chart(sys).to_ambient(q).reshape(sys.n, sys.d)
    iu, ju = np.triu_indices(sys.n, 1)
    return float(np.linalg.norm(X[iu] - X[ju], axis=1).min())


@dataclass(frozen=True)
class CentralConfiguration:
    system: MassSystem
    s0: np.ndarray = field(repr=False)
    residual: float
    u_value: float
    mu1: float
    bs_margin: float
    kernel_dim: int
    iterations: int = 0

    @property
    def threshold(self) -> float:
        a = self.system.alpha
        return -(2.0 - a) ** 2 / 8.0 * self.u_value

    def ambient(self) -> np.ndarray:
        return get_chart(self.system).to_ambient(self.s0)


def cc_residual(sys: MassSystem, s) -> float:
    U, g, _, _ = _terms(sys, s)
    return float(np.linalg.norm(g + sys.alpha * U * s))


def _tilde_from_terms(alpha, U, H, s):
    N = len(s)
    Ht = H - alpha * (alpha + 2.0) * U * np.outer(s, s) + alpha * U * np.eye(N)
    return 0.5 * (Ht + Ht.T)


def _finish(sys, s, iters):
    U, g, H, _ = _terms(sys, s)
    res = float(np.linalg.norm(g + sys.alpha * U * s))
    Ht = _tilde_from_terms(sys.alpha, U, H, s)
    ev = np.linalg.eigvalsh(Ht)
    ktol = 1e-7 * max(1.0, np.abs(ev).max())
    a = sys.alpha
    return CentralConfiguration(
        system=sys,
        s0=s,
        residual=res,
        u_value=U,
        mu1=float(ev[0]),
        bs_margin=float(ev[0] + (2.0 - a) ** 2 / 8.0 * U),
        kernel_dim=int(np.sum(np.abs(ev) < ktol)),
        iterations=iters,
    )


def find_central_configuration(sys: MassSystem, guess, tol=CC_TOL, max_iter=200) -> CentralConfiguration:
    """Refine ``guess`` to a critical point of U on the unit sphere.

    Newton on G(s) = grad U(s) + alpha U(s) s restricted to tangent steps,
    with backtracking on |G|.  When no Newton step stays collision-free and
    decreases |G|, one projected-gradient step on |G|^2/2 is taken instead.
    """
    a = sys.alpha
    s = np.asarray(guess, dtype=float).copy()
    nrm = np.linalg.norm(s)
    if s.shape != (sys.N,) or not np.isfinite(nrm) or nrm == 0:
        raise ValueError("guess must be a nonzero chart vector of length N")
    s /= nrm
    try:
        U, g, H, _ = _terms(sys, s)
    except CollisionError as exc:
        raise CollisionError(f"initial guess is a collision configuration: {exc}") from None
    G = g + a * U * s
    res = np.linalg.norm(G)
    it = 0
    while res >= tol and it < max_iter:
        it += 1
        JG = H + a * U * np.eye(sys.N) + a * np.outer(s, g)
        sys_mat = np.vstack([JG, s[None, :]])
        step = np.linalg.lstsq(sys_mat, np.concatenate([-G, [0.0]]), rcond=None)[0]
        accepted = False
        t = 1.0
        for _ in range(30):
            trial = s + t * step
            trial /= np.linalg.norm(trial)
            try:
                Ut, gt, Htr, _ = _terms(sys, trial)
            except CollisionError:
                t *= 0.5
                continue
            Gt = gt + a * Ut * trial
            rt = np.linalg.norm(Gt)
            if rt < res:
                s, U, g, H, G, res = trial, Ut, gt, Htr, Gt, rt
                accepted = True
                break
            t *= 0.5
        if accepted:
            continue
        # projected gradient on |G|^2 / 2
        dphi = JG.T @ G
        dphi -= np.dot(dphi, s) * s
        t = 1.0 / max(np.linalg.norm(dphi), 1e-300) * res
        for _ in range(60):
            trial = s - t * dphi
            trial /= np.linalg.norm(trial)
            try:
                Ut, gt, Htr, _ = _terms(sys, trial)
            except CollisionError:
                t *= 0.5
                continue
            Gt = gt + a * Ut * trial
            if np.linalg.norm(Gt) < res:
                s, U, g, H, G, res = trial, Ut, gt, Htr, Gt, np.linalg.norm(Gt)
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
    if res >= tol:
        raise ConvergenceError(f"central configuration solver stalled at residual {res:.3e} after {it} iterations")
    if min_mutual_distance(sys, s) < 1e-6:
        raise CollisionError("solver converged towards a collision configuration")
    return _finish(sys, s, it)


def hess_U_tilde(sys: MassSystem, cc: CentralConfiguration) -> np.ndarray:
    """D^2 U~(s0) = D^2U(s0) - alpha(alpha+2) U s0 s0^T + alpha U I."""
    U, _, H, _ = _terms(sys, cc.s0)
    return _tilde_from_terms(sys.alpha, U, H, cc.s0)


@dataclass(frozen=True)
class BSReport:
    mu1: float
    threshold: float
    margin: float
    holds: bool
    degenerate: bool
    kernel_dim: int

    def as_dict(self):
        return {
            "mu1": self.mu1,
            "threshold": self.threshold,
            "margin": self.margin,
            "holds": self.holds,
            "degenerate": self.degenerate,
            "kernel_dim": self.kernel_dim,
        }


def check_bs(cc: CentralConfiguration, tol=BS_TOL) -> BSReport:
    """[BS]: mu1 + (2 - alpha)^2 / 8 * U(s0) > 0, with a degeneracy band."""
    m = cc.bs_margin
    return BSReport(
        mu1=cc.mu1,
        threshold=cc.threshold,
        margin=m,
        holds=bool(m > tol),
        degenerate=bool(abs(m) <= tol),
        kernel_dim=cc.kernel_dim,
    )


def guess_configuration(sys: MassSystem, shape: str = "collinear") -> np.ndarray:
    """Chart vector for a named starting shape.

    ``collinear``: equally spaced on the first axis in particle order;
    ``polygon`` (alias ``equilateral`` for n=3): regular n-gon in the first
    two axes; ``random:<seed>``: Gaussian positions.
    """
    n, d = sys.n, sys.d
    X = np.zeros((n, d))
    if shape == "collinear":
        X[:, 0] = np.linspace(-1.0, 1.0, n)
    elif shape in ("polygon", "equilateral"):
        if shape == "equilateral" and n != 3:
            raise ValueError("equilateral guess needs n = 3")
        th = 2 * np.pi * np.arange(n) / n
        X[:, 0] = np.cos(th)
        X[:, 1] = np.sin(th)
    elif shape.startswith("random"):
        seed = int(shape.split(":", 1)[1]) if ":" in shape else 0
        X = np.random.default_rng(seed).normal(size=(n, d))
    else:
        raise ValueError(f"unknown guess shape {shape!r}")
    x = get_chart(sys).to_chart(X.ravel())
    return x / np.linalg.norm(x)


def cc_to_record(cc: CentralConfiguration) -> dict:
    sys = cc.system
    return {
        "masses": list(sys.masses),
        "d": sys.d,
        "alpha": sys.alpha,
        "s0": [float(v) for v in cc.ambient()],
        "residual": cc.residual,
        "u_value": cc.u_value,
        "mu1": cc.mu1,
        "bs_margin": cc.bs_margin,
        "kernel_dim": cc.kernel_dim,
    }


def save_cc(cc: CentralConfiguration, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cc_to_record(cc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_cc(path, tol=CC_TOL) -> CentralConfiguration:
    """Read a CC record and re-verify it (a few Newton steps polish rounding)."""
    with open(path, encoding="utf-8") as fh:
        rec = json.load(fh)
    for key in ("masses", "d", "alpha", "s0"):
        if key not in rec:
            raise ValueError(f"CC record missing field {key!r}")
    sys = MassSystem(tuple(rec["masses"]), rec["d"], rec["alpha"])
    q = np.asarray(rec["s0"], dtype=float)
    if q.shape != (sys.n * sys.d,):
        raise ValueError(f"s0: expected {sys.n * sys.d} ambient coordinates, got {q.size}")
    return find_central_configuration(sys, get_chart(sys).to_chart(q), tol=tol)
