"""McGehee variables, trajectory data and trajectory sources.

tau = int r^{-(2+alpha)/2} dt,  rho = r^{(2-alpha)/4},  y = rho s.

A :class:`TrajectoryData` stores uniform tau samples of (rho, rho', s, s')
in chart coordinates.  Sources: the closed-form homothetic motion, radial
or full Newton integrations in physical time, CSV ingestion, and synthetic
perturbations of the homothetic motion.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline, CubicSpline, PchipInterpolator

from .config_space import MassSystem
from .potential import (
    CentralConfiguration,
    CollisionError,
    get_chart,
    min_mutual_distance,
    potential_value,
)

MODES = ("collision", "parabolic")
SOURCES = ("homothetic-closed-form", "integrated", "ingested", "synthetic")


class TrajectoryError(ValueError):
    """Invalid trajectory data; ``rows`` lists offending sample indices."""

    def __init__(self, msg, rows=()):
        super().__init__(msg)
        self.rows = list(rows)


@dataclass(frozen=True)
class Constants:
    alpha: float
    u_value: float
    mode: str
    c_alpha: float
    beta: float
    delta_bar: float
    delta_tilde: float

    def identity_residual(self) -> float:
        """c delta_bar^2 + (2-alpha)^2/8 U - 2U, zero up to rounding."""
        a, U = self.alpha, self.u_value
        return self.c_alpha * self.delta_bar ** 2 + (2 - a) ** 2 / 8 * U - 2 * U

    def as_dict(self):
        return {
            "c_alpha": self.c_alpha,
            "beta": self.beta,
            "delta_bar": self.delta_bar,
            "delta_tilde": self.delta_tilde,
            "mode": self.mode,
        }


def constants_from(alpha: float, u_value: float, mode: str = "collision") -> Constants:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not (0 < alpha < 2):
        raise ValueError("alpha must lie in (0, 2)")
    c = (4.0 / (2.0 - alpha)) ** 2 - 1.0
    beta = 2.0 * (2.0 + alpha) / (2.0 - alpha)
    sign = -1.0 if mode == "collision" else 1.0
    db = sign * (2.0 - alpha) / 4.0 * math.sqrt(2.0 * u_value)
    return Constants(alpha, u_value, mode, c, beta, db, db * (beta - 2.0))


def constants(sys: MassSystem, cc: CentralConfiguration, mode: str = "collision") -> Constants:
    return constants_from(sys.alpha, cc.u_value, mode)


def sundman_K(alpha: float, b: float) -> float:
    """Rate K in r(t) ~ [K (T - t)]^{2/(2+alpha)} for the 1-D Kepler problem.

    Obtained by integrating r^{alpha/2} dr = -sqrt(2b) dt on the zero-energy
    homothetic solution, so K = (alpha + 2)/2 * sqrt(2b).
    """
    return (alpha + 2.0) / 2.0 * math.sqrt(2.0 * b)


@dataclass(frozen=True)
class TrajectoryData:
    mode: str
    grid: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    rho_prime: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    s_prime: np.ndarray = field(repr=False)
    energy_h: float
    source: str
    extras: dict = field(default_factory=dict, repr=False, compare=False)
    # analytic evaluator tau -> (rho, rho', s, s'); None means interpolate
    model: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("grid", "rho", "rho_prime", "s", "s_prime"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.mode not in MODES:
            raise TrajectoryError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.source not in SOURCES:
            raise TrajectoryError(f"source must be one of {SOURCES}, got {self.source!r}")
        K = self.grid.shape[0]
        if self.s.ndim != 2 or self.s.shape[0] != K or self.s_prime.shape != self.s.shape:
            raise TrajectoryError("s and s_prime must be (samples, N) arrays matching the grid")
        if self.rho.shape != (K,) or self.rho_prime.shape != (K,):
            raise TrajectoryError("rho and rho_prime must match the grid length")

    @property
    def N(self) -> int:
        return self.s.shape[1]

    @property
    def tau_max(self) -> float:
        return float(self.grid[-1])

    def sample(self, k: int):
        return self.rho[k], self.rho_prime[k], self.s[k], self.s_prime[k]

    def state_at(self, tau):
        """(rho, rho', s, s') at arbitrary tau within [grid[0], grid[-1]]."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        if self.model is not None:
            return self.model(tau)
        lo, hi = self.grid[0], self.grid[-1]
        if np.any(tau < lo - 1e-12) or np.any(tau > hi + 1e-12):
            raise ValueError("state_at outside the sampled interval; use the limit model there")
        interp = self.extras.get("_interp")
        if interp is None:
            interp = _build_interp(self)
            self.extras["_interp"] = interp
        ratio = interp["ratio"](tau)
        rho = np.exp(interp["logrho"](tau))
        s = interp["s"](tau)
        sp = interp["sp"](tau)
        s /= np.linalg.norm(s, axis=1, keepdims=True)
        sp -= np.einsum("ki,ki->k", s, sp)[:, None] * s
        return rho, ratio * rho, s, sp


def _build_interp(traj: TrajectoryData):
    g = traj.grid
    ratio = traj.rho_prime / traj.rho
    return {
        "ratio": CubicSpline(g, ratio),
        "logrho": CubicHermiteSpline(g, np.log(traj.rho), ratio),
        "s": CubicHermiteSpline(g, traj.s, traj.s_prime, axis=0),
        "sp": CubicSpline(g, traj.s_prime, axis=0),
    }


def validate_trajectory(traj: TrajectoryData, tol: float = 1e-8, strict_energy: bool = True) -> list:
    """Return a list of (row, message) invariant violations."""
    problems = []
    g = traj.grid
    if g.size < 2:
        problems.append((0, "need at least two samples"))
        return problems
    bad = np.nonzero(np.diff(g) <= 0)[0]
    for k in bad:
        problems.append((int(k + 1), "tau not strictly increasing"))
    if abs(g[0]) > 1e-12:
        problems.append((0, "tau grid must start at 0"))
    for k in np.nonzero(~(traj.rho > 0))[0]:
        problems.append((int(k), "rho must be positive"))
    ns = np.linalg.norm(traj.s, axis=1)
    for k in np.nonzero(np.abs(ns - 1) > tol)[0]:
        problems.append((int(k), f"|s| = {ns[k]:.12g} differs from 1"))
    dots = np.einsum("ki,ki->k", traj.s, traj.s_prime)
    for k in np.nonzero(np.abs(dots) > tol)[0]:
        problems.append((int(k), f"<s, s'> = {dots[k]:.3e} not zero"))
    if strict_energy and traj.mode == "parabolic" and abs(traj.energy_h) > tol:
        problems.append((0, f"parabolic mode requires h = 0, got {traj.energy_h}"))
    return problems


def _check(traj, strict_energy=True):
    probs = validate_trajectory(traj, strict_energy=strict_energy)
    if probs:
        rows = sorted({r for r, _ in probs})
        msg = "; ".join(f"row {r}: {m}" for r, m in probs[:10])
        raise TrajectoryError(f"trajectory invariant violation: {msg}", rows)
    return traj


def _homothetic_model(s0, db, rho0):
    s0 = np.asarray(s0, dtype=float)

    def model(tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        rho = rho0 * np.exp(db * tau)
        S = np.repeat(s0[None, :], tau.size, axis=0)
        return rho, db * rho, S, np.zeros_like(S)

    return model


def homothetic_parabolic(sys: MassSystem, cc: CentralConfiguration, tau_max: float = 40.0,
                         n_samples: int = 2001, mode: str = "parabolic", rho0: float = 1.0) -> TrajectoryData:
    """Zero-energy homothetic motion: rho = rho0 exp(delta_bar tau), s = s0."""
    k = constants(sys, cc, mode)
    grid = np.linspace(0.0, tau_max, n_samples)
    model = _homothetic_model(cc.s0, k.delta_bar, rho0)
    rho, rp, S, Sp = model(grid)
    traj = TrajectoryData(mode, grid, rho, rp, S, Sp, 0.0, "homothetic-closed-form",
                          extras={"s0": np.array(cc.s0)}, model=model)
    return _check(traj)


def synthetic_perturbation(cc: CentralConfiguration, consts: Constants, eps: float, lam: float, w,
                           tau_max: float = 40.0, n: int = 2001, rho0: float = 1.0) -> TrajectoryData:
    """s(tau) = normalize(s0 + eps e^{-lam tau} w) with homothetic rho.

    Not a solution of the equations of motion; a test input whose
    coefficients converge to the homothetic limit.
    """
    s0 = np.asarray(cc.s0, dtype=float)
    w = np.asarray(w, dtype=float)
    if lam <= 0:
        raise ValueError("decay rate lam must be positive")
    if abs(np.linalg.norm(w) - 1) > 1e-10 or abs(np.dot(w, s0)) > 1e-10:
        raise ValueError("direction w must be a unit chart vector orthogonal to s0")
    if not (0 <= eps < 1):
        raise ValueError(f"amplitude eps must lie in [0, 1), got {eps}")
    # the largest excursion is at tau = 0; make sure it is still collision-free
    u0 = s0 + eps * w
    if min_mutual_distance(cc.system, u0 / np.linalg.norm(u0)) < 1e-3 * min_mutual_distance(cc.system, s0):
        raise ValueError("amplitude eps too large: perturbed configuration approaches a collision")
    db = consts.delta_bar

    def model(tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        e = eps * np.exp(-lam * tau)
        u = s0[None, :] + e[:, None] * w[None, :]
        nu = np.sqrt(1.0 + e ** 2)
        s = u / nu[:, None]
        up = (-lam * e)[:, None] * w[None, :]
        sp = (up - np.einsum("ki,ki->k", s, up)[:, None] * s) / nu[:, None]
        rho = rho0 * np.exp(db * tau)
        return rho, db * rho, s, sp

    grid = np.linspace(0.0, tau_max, n)
    rho, rp, S, Sp = model(grid)
    traj = TrajectoryData(consts.mode, grid, rho, rp, S, Sp, 0.0, "synthetic",
                          extras={"s0": s0.copy(), "eps": eps, "lambda": lam, "w": w.copy()}, model=model)
    return _check(traj)


def random_orthogonal_direction(s0, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    w = rng.normal(size=len(s0))
    w -= np.dot(w, s0) * s0
    return w / np.linalg.norm(w)


def _resample_tau(sol, t_nodes, tau_nodes, tau_grid, rate_fn):
    """Times t(tau_grid) by PCHIP inversion polished with Newton on tau(t)."""
    t = PchipInterpolator(tau_nodes, t_nodes)(tau_grid)
    t = np.clip(t, t_nodes[0], t_nodes[-1])
    for _ in range(3):
        Y = sol(t)
        t = t - (Y[-1] - tau_grid) / rate_fn(Y)
        t = np.clip(t, t_nodes[0], t_nodes[-1])
    return t


def integrate_homothetic(sys: MassSystem, cc: CentralConfiguration, h: float = 0.0,
                         t_span=(0.0, 50.0), mode: str = "collision", r0: float = 1.0,
                         rtol: float = 1e-12, atol: float = 1e-14, r_floor: float = 1e-8,
                         n_samples: int = 2001) -> TrajectoryData:
    """Integrate the radial Kepler problem r'' = -alpha U(s0) r^{-alpha-1} in t.

    tau is carried along as an extra state (dtau/dt = r^{-(2+alpha)/2}); the
    solution is then resampled on a uniform tau grid.
    """
    a = sys.alpha
    U = cc.u_value
    e0 = h + U * r0 ** (-a)
    if e0 < 0:
        raise ValueError("energy too low: no motion through r0 with this h")
    sign = -1.0 if mode == "collision" else 1.0
    v0 = sign * math.sqrt(2 * e0)

    def rhs(t, y):
        r = y[0]
        return [y[1], -a * U * r ** (-a - 1), r ** (-(2 + a) / 2)]

    def hit_floor(t, y):
        return y[0] - r_floor

    hit_floor.terminal = True
    hit_floor.direction = -1
    sol = solve_ivp(rhs, t_span, [r0, v0, 0.0], method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True, events=hit_floor)
    if sol.status < 0:
        raise RuntimeError(f"radial integration failed: {sol.message}")
    if mode == "collision" and sol.status != 1:
        raise RuntimeError("radial integration ended before reaching the collision floor; enlarge t_span")
    t_nodes = sol.t
    tau_nodes = sol.y[2]
    tau_grid = np.linspace(0.0, tau_nodes[-1], n_samples)
    t = _resample_tau(sol.sol, t_nodes, tau_nodes, tau_grid, lambda Y: Y[0] ** (-(2 + a) / 2))
    Y = sol.sol(t)
    r, rdot = Y[0], Y[1]
    rho = r ** ((2 - a) / 4)
    rho_p = (2 - a) / 4 * rdot * r ** ((2 + a) / 4)
    S = np.repeat(np.asarray(cc.s0)[None, :], n_samples, axis=0)
    energy = 0.5 * rdot ** 2 - U * r ** (-a)
    extras = {
        "s0": np.array(cc.s0),
        "t": t,
        "r": r,
        "rdot": rdot,
        # relative to the size of the potential term, which blows up at collision
        "energy_residual": float(np.max(np.abs(energy - h) / np.maximum(1.0, U * r ** (-a)))),
    }
    if mode == "collision":
        # time still needed to fall from r_floor to 0, by quadrature of dt = dr/|rdot|
        tail = quad(lambda x: 1.0 / math.sqrt(2 * (h + U * x ** (-a))), 0.0, float(r[-1]),
                    epsabs=0, epsrel=1e-12, limit=200)[0]
        extras["T"] = float(t[-1] + tail)
    traj = TrajectoryData(mode, tau_grid, rho, rho_p, S, np.zeros_like(S), float(h),
                          "integrated", extras=extras)
    return _check(traj, strict_energy=False)


def integrate_newton(sys: MassSystem, q0, v0, t_span=(0.0, 10.0), rtol: float = 1e-10,
                     atol: float = 1e-12, r_floor: float = 1e-6, close_ratio: float = 1e-4,
                     energy_tol: float = 1e-6, n_samples: int = 2001,
                     cc: Optional[CentralConfiguration] = None) -> TrajectoryData:
    """Integrate x'' = grad U(x) in chart coordinates and transform to tau.

    Stops at total collision (|x| < r_floor).  A close approach of two
    bodies relative to the overall size (ratio < close_ratio) aborts, since
    partial collisions are outside the model.
    """
    from .potential import _terms

    a = sys.alpha
    N = sys.N
    q0 = np.asarray(q0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if min_mutual_distance(sys, q0) <= 0:
        raise CollisionError("initial configuration has a collision")
    E0 = 0.5 * v0 @ v0 - potential_value(sys, q0)

    def rhs(t, y):
        x = y[:N]
        g = _terms(sys, x, floor=0.0)[1]
        r = np.linalg.norm(x)
        return np.concatenate([y[N:2 * N], g, [r ** (-(2 + a) / 2)]])

    def total(t, y):
        return np.linalg.norm(y[:N]) - r_floor

    total.terminal = True
    total.direction = -1

    def close(t, y):
        x = y[:N]
        return min_mutual_distance(sys, x) / np.linalg.norm(x) - close_ratio

    close.terminal = True
    close.direction = -1
    sol = solve_ivp(rhs, t_span, np.concatenate([q0, v0, [0.0]]), method="DOP853", rtol=rtol,
                    atol=atol, dense_output=True, events=[total, close])
    if sol.status < 0:
        raise RuntimeError(f"Newton integration failed: {sol.message}")
    if sol.status == 1 and sol.t_events[1].size:
        raise CollisionError(f"close approach of two bodies at t = {sol.t_events[1][0]:.6g}; partial collisions abort")
    X = sol.y[:N]
    V = sol.y[N:2 * N]
    Us = np.array([potential_value(sys, X[:, k], floor=0.0) for k in range(X.shape[1])])
    E = 0.5 * np.einsum("ik,ik->k", V, V) - Us
    drift = np.abs(E - E0) / np.maximum.reduce([np.ones_like(Us), np.full_like(Us, abs(E0)), Us])
    if drift.max() > energy_tol:
        raise RuntimeError(f"energy drift {drift.max():.3e} exceeds {energy_tol:.1e}")

    tau_nodes = sol.y[-1]
    tau_grid = np.linspace(0.0, tau_nodes[-1], n_samples)
    t = _resample_tau(sol.sol, sol.t, tau_nodes, tau_grid,
                      lambda Y: np.linalg.norm(Y[:N], axis=0) ** (-(2 + a) / 2))
    Y = sol.sol(t)
    x, xd = Y[:N].T, Y[N:2 * N].T
    r = np.linalg.norm(x, axis=1)
    s = x / r[:, None]
    rdot = np.einsum("ki,ki->k", s, xd)
    sdot = (xd - rdot[:, None] * s) / r[:, None]
    sp = sdot * (r ** ((2 + a) / 2))[:, None]
    rho = r ** ((2 - a) / 4)
    rho_p = (2 - a) / 4 * rdot * r ** ((2 + a) / 4)
    mode = "collision" if rdot[-1] < 0 else "parabolic"
    tail = slice(int(0.9 * n_samples), None)
    ratio = rho_p / rho
    diag = {
        "reached_collision": bool(sol.status == 1),
        "rho_ratio_tail": float(ratio[-1]),
        "rho_ratio_spread": float(np.ptp(ratio[tail])),
        "sprime_tail": float(np.linalg.norm(sp[-1])),
        "r_monotone": bool(np.all(np.diff(r) < 0) or np.all(np.diff(r) > 0)),
    }
    qualifies = diag["r_monotone"] and diag["sprime_tail"] < 1e-3 and diag["rho_ratio_spread"] < 1e-3
    if mode == "collision":
        qualifies = qualifies and diag["reached_collision"]
    else:
        qualifies = qualifies and abs(E0) < 1e-8
    if cc is not None:
        db = constants(sys, cc, mode).delta_bar
        diag["rho_ratio_gap"] = float(abs(ratio[-1] - db))
        diag["s_gap"] = float(min(np.linalg.norm(s[-1] - cc.s0), np.linalg.norm(s[-1] + cc.s0)))
        qualifies = qualifies and diag["rho_ratio_gap"] < 1e-3
    diag["qualifies"] = bool(qualifies)
    extras = {"t": t, "r": r, "rdot": rdot, "energy_drift": float(drift.max()), "tail": diag}
    traj = TrajectoryData(mode, tau_grid, rho, rho_p, s, sp, float(E0), "integrated", extras=extras)
    return _check(traj, strict_energy=False)


def energy_of(sys: MassSystem, cc: CentralConfiguration, sample) -> float:
    """McGehee energy h of one sample (rho, rho', s, s')."""
    rho, rp, s, sp = sample
    k = constants(sys, cc, "collision")
    U = potential_value(sys, np.asarray(s) / np.linalg.norm(s))
    y2 = rp ** 2 + rho ** 2 * float(np.dot(sp, sp))
    return rho ** (-k.beta) * (k.c_alpha / 2 * rp ** 2 + 0.5 * y2 - rho ** 2 * U)


def energy_profile(sys: MassSystem, cc: CentralConfiguration, traj: TrajectoryData) -> np.ndarray:
    return np.array([energy_of(sys, cc, traj.sample(k)) for k in range(traj.grid.size)])


def _fmt(x) -> str:
    return repr(float(x))


def write_trajectory(traj: TrajectoryData, path, chart=None) -> None:
    """CSV with header tau,rho,rho_prime,h,s_1..s_N,sp_1..sp_N; optional chart sidecar."""
    N = traj.N
    cols = ["tau", "rho", "rho_prime", "h"] + [f"s_{i + 1}" for i in range(N)] + [f"sp_{i + 1}" for i in range(N)]
    lines = [f"# mode={traj.mode}", f"# source={traj.source}", ",".join(cols)]
    for k in range(traj.grid.size):
        row = [traj.grid[k], traj.rho[k], traj.rho_prime[k], traj.energy_h]
        row += list(traj.s[k]) + list(traj.s_prime[k])
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if chart is not None:
        write_chart_sidecar(chart, str(path) + ".chart.json")


def write_chart_sidecar(chart, path) -> None:
    sys = chart.system
    rec = {"masses": list(sys.masses), "d": sys.d, "alpha": sys.alpha,
           "basis_columns": [[float(v) for v in col] for col in chart.basis.T]}
    Path(path).write_text(json.dumps(rec, indent=1) + "\n", encoding="utf-8")


def ingest_trajectory(path) -> TrajectoryData:
    """Read the CSV trajectory format; raises TrajectoryError with row numbers."""
    mode, source = "collision", "ingested"
    header = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("mode="):
                    mode = body.split("=", 1)[1].strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise TrajectoryError(f"line {lineno}: expected {len(header)} fields, got {len(parts)}", [len(rows)])
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise TrajectoryError(f"line {lineno}: non-numeric field", [len(rows)]) from None
    if header is None or header[:4] != ["tau", "rho", "rho_prime", "h"]:
        raise TrajectoryError("missing or malformed header (expected tau,rho,rho_prime,h,s_1..,sp_1..)")
    N = (len(header) - 4) // 2
    expect = [f"s_{i + 1}" for i in range(N)] + [f"sp_{i + 1}" for i in range(N)]
    if header[4:] != expect or N < 1:
        raise TrajectoryError("header columns must be s_1..s_N followed by sp_1..sp_N")
    if not rows:
        raise TrajectoryError("no samples")
    A = np.array(rows)
    hs = A[:, 3]
    bad = np.nonzero(hs != hs[0])[0]
    if bad.size:
        raise TrajectoryError(f"row {bad[0]}: energy column must be constant", bad.tolist())
    traj = TrajectoryData(mode, A[:, 0], A[:, 1], A[:, 2], A[:, 4:4 + N], A[:, 4 + N:],
                          float(hs[0]), source)
    return _check(traj)
