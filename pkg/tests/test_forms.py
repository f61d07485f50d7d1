import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from sasindex import (assemble_coefficients, assemble_hamiltonian, check_bs, compute_sigma0, constants,
                      homothetic_parabolic, limit_blocks, limit_spectra, random_orthogonal_direction,
                      synthetic_perturbation)
from sasindex.checks import fd_hessian
from sasindex.forms import (LimitBlocks, coefficient_path_from_functions, d2W, schur_min_eigs, symplectic_J,
                            write_coefficients)
from sasindex.potential import potential_value

from conftest import make_cc


def test_limit_spectra_equilateral(equilateral):
    sys, cc = equilateral
    for mode in ("collision", "parabolic"):
        sp = limit_spectra(sys, cc, constants(sys, cc, mode))
        assert np.allclose(sp.P0_eigs, [1, 1, 1, 16], atol=1e-10)
        assert sp.r1 == pytest.approx(0.375, abs=1e-10) and sp.r2 == pytest.approx(6.0, abs=1e-10)
        assert np.allclose(sp.R0_eigs, [0.375, 0.375, 0.375, 6.0], atol=1e-10)
        lim = limit_blocks(sys, cc, constants(sys, cc, mode))
        assert np.allclose(lim.R0 @ cc.s0, 6.0 * cc.s0, atol=1e-10)
        assert np.allclose(lim.P0 @ cc.s0, 16.0 * cc.s0, atol=1e-10)


@given(st.floats(0.1, 1.9), st.sampled_from(["collision", "parabolic"]))
def test_limit_identity(alpha, mode):
    sys, cc = make_cc((1, 2, 3), "equilateral", alpha)
    k = constants(sys, cc, mode)
    sp = limit_spectra(sys, cc, k)
    assert abs(k.c_alpha * k.delta_bar ** 2 + sp.r1 - sp.r2) < 1e-12 * max(1, sp.r2)
    assert sp.r2 == pytest.approx(2 * cc.u_value, rel=1e-14)


def test_homothetic_samples_equal_limit(equilateral):
    sys, cc = equilateral
    tr = homothetic_parabolic(sys, cc, 10.0, 51)
    co = assemble_coefficients(sys, cc, tr)
    L = co.limit
    assert np.abs(co.P - L.P0).max() < 1e-12
    assert np.abs(co.Q - L.Q0).max() < 1e-12
    assert np.abs(co.R_tilde - L.R_tilde0).max() < 1e-10
    assert np.abs(L.Q0 @ cc.s0).max() < 1e-14
    k = constants(sys, cc, "parabolic")
    S0 = np.outer(cc.s0, cc.s0)
    assert np.allclose(L.Q0, k.c_alpha * k.delta_bar * (np.eye(4) - S0), atol=1e-14)


def test_homothetic_hamiltonian_constant(equilateral):
    sys, cc = equilateral
    ham = assemble_hamiltonian(assemble_coefficients(sys, cc, homothetic_parabolic(sys, cc, 10.0, 21)))
    J = symplectic_J(4)
    assert np.abs(J @ ham.B - ham.H_star[None]).max() < 1e-10
    assert np.abs(ham.B - ham.B.transpose(0, 2, 1)).max() < 1e-12
    assert np.allclose(ham.B[:, :4, :4], np.linalg.inv(ham.coeff.P), atol=1e-12)


def _synthetic(sys, cc, eps, lam=0.5, seed=1, tau_max=40.0, n=2001, mode="parabolic"):
    k = constants(sys, cc, mode)
    return synthetic_perturbation(cc, k, eps, lam, random_orthogonal_direction(cc.s0, seed), tau_max, n)


def test_synthetic_tail_converges(equilateral):
    sys, cc = equilateral
    co = assemble_coefficients(sys, cc, _synthetic(sys, cc, 0.05))
    d = co.distance_to_limit()
    assert d[0] > 1e-3
    assert d[co.grid > 30].max() < 1e-6


def test_convergence_improves_with_tau_max(equilateral):
    sys, cc = equilateral
    sups = []
    for T in (10.0, 20.0):
        co = assemble_coefficients(sys, cc, _synthetic(sys, cc, 0.1, tau_max=T, n=int(100 * T) + 1))
        d = co.distance_to_limit()
        sups.append(d[co.grid >= 0.9 * T].max())
    assert sups[1] < sups[0]


@given(st.floats(0.0, 0.3), st.integers(0, 50))
def test_P_spectrum_along_path(eps, seed):
    sys, cc = make_cc((1, 1, 1), "equilateral")
    co = assemble_coefficients(sys, cc, _synthetic(sys, cc, eps, seed=seed, tau_max=10.0, n=41))
    ev = np.linalg.eigvalsh(co.P)
    assert np.abs(ev - np.array([1, 1, 1, 16])[None]).max() < 1e-8


def test_sigma_shift_exact(equilateral):
    sys, cc = equilateral
    co = assemble_coefficients(sys, cc, _synthetic(sys, cc, 0.1, tau_max=10.0, n=41))
    a, b = co.with_sigma(0.5), co.with_sigma(2.25)
    assert np.array_equal(b.R_tilde_sigma() - a.R_tilde_sigma(),
                          np.broadcast_to(1.75 * np.eye(4), a.R_tilde.shape)) or \
        np.abs(b.R_tilde_sigma() - a.R_tilde_sigma() - 1.75 * np.eye(4)).max() < 1e-14
    with pytest.raises(ValueError):
        co.with_sigma(-1.0)


def test_d2W_finite_differences(equilateral):
    sys, cc = equilateral
    u0 = cc.u_value

    def W(y):
        return np.linalg.norm(y) ** (2 + sys.alpha) * potential_value(sys, y) - np.dot(y, y) * u0

    rng = np.random.default_rng(3)
    s = cc.s0 + 0.1 * rng.normal(size=4)
    s /= np.linalg.norm(s)
    assert np.abs(fd_hessian(W, s) - d2W(sys, u0, s)).max() < 1e-5
    # homogeneous of degree two: the Hessian is the same along the ray
    assert np.abs(fd_hessian(W, 1.7 * s) - d2W(sys, u0, s)).max() < 1e-5


def test_sigma0_homothetic_equilateral(equilateral):
    """The Schur complement on s0-perp is negative, so sigma0 is set by it, not by the margin alone."""
    sys, cc = equilateral
    co = assemble_coefficients(sys, cc, homothetic_parabolic(sys, cc, 10.0, 21))
    P0, Q0, R0 = co.limit_sigma()
    m = schur_min_eigs(P0[None], Q0[None], R0[None])[0]
    assert m == pytest.approx(0.375 - 84.375, abs=1e-8)
    s0 = compute_sigma0(co)
    assert s0 == pytest.approx(1.1 * 84.0, rel=1e-10)
    P1, Q1, R1 = co.with_sigma(s0).limit_sigma()
    assert schur_min_eigs(P1[None], Q1[None], R1[None])[0] > 0


def test_sigma0_already_positive():
    # positive Schur complement: only the safety floor is added
    lim = LimitBlocks(np.eye(2), np.zeros((2, 2)), 3.0 * np.eye(2))
    co = coefficient_path_from_functions(lambda t: np.repeat(np.eye(2)[None], np.size(t), 0),
                                         lambda t: np.zeros((np.size(t), 2, 2)),
                                         lambda t: np.repeat(3.0 * np.eye(2)[None], np.size(t), 0), lim, 5.0, 11)
    assert compute_sigma0(co) == pytest.approx(0.1)


def test_sigma0_bs_failing(euler_m1):
    sys, cc = euler_m1
    co = assemble_coefficients(sys, cc, homothetic_parabolic(sys, cc, 10.0, 21))
    P, Q, R = co.at(co.grid)
    worst = schur_min_eigs(P, Q, R).min()
    s0 = compute_sigma0(co)
    assert worst < 0 and s0 >= -worst
    P, Q, R = co.with_sigma(s0).at(np.linspace(0, 10, 201))
    assert schur_min_eigs(P, Q, R).min() > 0


def _smooth_path(N=2, seed=0, tau_max=3.0):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(N, N))
    Pb = A @ A.T + N * np.eye(N)
    Qa, Qb = rng.normal(size=(2, N, N))
    Ra = rng.normal(size=(N, N))
    Ra = Ra + Ra.T

    def fP(t):
        t = np.atleast_1d(t)
        return Pb[None] + 0.3 * np.sin(t)[:, None, None] * np.eye(N)[None]

    def fQ(t):
        t = np.atleast_1d(t)
        return Qa[None] + np.exp(-t)[:, None, None] * Qb[None]

    def fR(t):
        t = np.atleast_1d(t)
        return np.cos(t)[:, None, None] * Ra[None] + np.eye(N)[None]

    lim = LimitBlocks(fP(tau_max)[0], fQ(tau_max)[0], fR(tau_max)[0])
    return fP, fQ, fR, coefficient_path_from_functions(fP, fQ, fR, lim, tau_max, 301)


def test_kernel_correspondence():
    """A solution of the Sturm-Liouville equation gives z = (Pu' + Qu, u) with z' = H z."""
    fP, fQ, fR, co = _smooth_path()
    N = 2
    ham = assemble_hamiltonian(co)
    h = 1e-6

    def dmat(f, t):
        return (f(t + h)[0] - f(t - h)[0]) / (2 * h)

    def rhs(t, y):
        u, up = y[:N], y[N:]
        P, Q, R = fP(t)[0], fQ(t)[0], fR(t)[0]
        # (P u' + Q u)' = Q^T u' + R u
        upp = np.linalg.solve(P, Q.T @ up + R @ u - dmat(fP, t) @ up - dmat(fQ, t) @ u - Q @ up)
        return np.concatenate([up, upp])

    ts = np.linspace(0.2, 2.8, 27)
    sol = solve_ivp(rhs, (0, 3.0), [0.0, 0.0, 1.0, -0.5], rtol=1e-11, atol=1e-12, dense_output=True)

    def z(t):
        y = sol.sol(t)
        return np.concatenate([fP(t)[0] @ y[N:] + fQ(t)[0] @ y[:N], y[:N]])

    res = 0.0
    for t in ts:
        dz = (z(t + 1e-5) - z(t - 1e-5)) / 2e-5
        res = max(res, np.abs(dz - ham.H_at(t)[0] @ z(t)).max())
    assert res < 1e-6


def test_write_coefficients(tmp_path, equilateral):
    sys, cc = equilateral
    co = assemble_coefficients(sys, cc, homothetic_parabolic(sys, cc, 2.0, 5))
    p = tmp_path / "c.csv"
    write_coefficients(co, p)
    rows = [l for l in p.read_text().splitlines() if not l.startswith("#")]
    hdr = rows[0].split(",")
    assert hdr[0] == "tau" and "P_1_1" in hdr and len(rows) == 6
    data = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
    i = hdr.index("P_1_1")
    assert np.allclose(data[:, i:i + 16].reshape(-1, 4, 4), co.P, atol=0)
