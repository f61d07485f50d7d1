import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sasindex import (CollisionError, MassSystem, build_chart, check_bs, find_central_configuration,
                      guess_configuration, hess_U_tilde, load_cc, save_cc)
from sasindex.checks import U_tilde, fd_hessian
from sasindex.forms import limit_blocks
from sasindex.mcgehee import constants
from sasindex.potential import potential_grad, potential_hess, potential_value

from conftest import make_cc


def _random_config(sys, rng):
    ch = build_chart(sys)
    return ch.to_chart(rng.normal(size=sys.n * sys.d))


def test_two_body_unit_separation():
    sys = MassSystem((1, 1), 2, 1.0)
    q = build_chart(sys).to_chart(np.array([0.5, 0.0, -0.5, 0.0]))
    assert potential_value(sys, q) == pytest.approx(1.0, rel=1e-14)


def test_equilateral_value(equilateral):
    sys, cc = equilateral
    assert cc.u_value == pytest.approx(3.0, rel=1e-12)
    X = cc.ambient().reshape(3, 2)
    sides = [np.linalg.norm(X[i] - X[j]) for i, j in ((0, 1), (1, 2), (0, 2))]
    assert np.allclose(sides, 1.0, atol=1e-10)
    assert cc.residual < 1e-10
    assert abs(np.linalg.norm(cc.s0) - 1) < 1e-10


@given(st.floats(0.2, 1.8), st.floats(0.3, 3.0), st.integers(0, 2 ** 31))
def test_homogeneity_and_euler(alpha, lam, seed):
    sys = MassSystem((1.0, 2.0, 0.5), 2, alpha)
    q = _random_config(sys, np.random.default_rng(seed))
    U = potential_value(sys, q)
    assert potential_value(sys, lam * q) == pytest.approx(lam ** -alpha * U, rel=1e-10)
    g = potential_grad(sys, q)
    assert np.dot(g, q) == pytest.approx(-alpha * U, rel=1e-10)
    H = potential_hess(sys, q)
    assert np.abs(H - H.T).max() == 0.0
    assert np.allclose(H @ q, -(alpha + 1) * g, rtol=1e-8, atol=1e-8 * np.abs(g).max())


def test_hessian_vs_gradient_differences(rng):
    sys = MassSystem((1.0, 3.0, 2.0, 1.5), 2, 1.0)
    q = _random_config(sys, rng)
    H = potential_hess(sys, q)
    for _ in range(5):
        v = rng.normal(size=sys.N)
        h = 1e-5
        fd = (potential_grad(sys, q + h * v) - potential_grad(sys, q - h * v)) / (2 * h)
        assert np.abs(H @ v - fd).max() < 1e-5


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_two_body_radial_eigenvalue(alpha):
    sys = MassSystem((1, 1), 2, alpha)
    x = build_chart(sys).to_chart(np.array([1.0, 0.3, -1.0, -0.3]))
    x /= np.linalg.norm(x)
    U = potential_value(sys, x)
    assert np.allclose(potential_hess(sys, x) @ x, alpha * (alpha + 1) * U * x, rtol=1e-12)


def test_gradient_at_cc(equilateral):
    sys, cc = equilateral
    assert np.allclose(potential_grad(sys, cc.s0), -sys.alpha * cc.u_value * cc.s0, atol=1e-10)


def _euler_quintic_ratio(m1, m2, m3):
    """Positive root x = r23/r12 of Euler's quintic (alpha = 1, order 1-2-3 on a line)."""
    coeffs = [m1 + m2, 3 * m1 + 2 * m2, 3 * m1 + m2, -(m2 + 3 * m3), -(2 * m2 + 3 * m3), -(m2 + m3)]
    r = np.roots(coeffs)
    r = r[(np.abs(r.imag) < 1e-12) & (r.real > 0)].real
    assert r.size == 1
    return float(r[0])


@pytest.mark.parametrize("masses", [(1, 1, 1), (1, 2, 3), (3, 1, 0.5), (1, 20, 1)])
def test_euler_configuration_quintic(masses):
    sys, cc = make_cc(masses, "collinear")
    assert cc.residual < 1e-10
    X = cc.ambient().reshape(3, 2)
    a, b = X[1] - X[0], X[2] - X[1]
    # collinear up to a rigid rotation, order preserved
    assert abs(a[0] * b[1] - a[1] * b[0]) < 1e-10 and np.dot(a, b) > 0
    ratio = np.linalg.norm(b) / np.linalg.norm(a)
    assert ratio == pytest.approx(_euler_quintic_ratio(*masses), rel=1e-9)


def test_collision_guess_rejected():
    sys = MassSystem((1, 1, 1), 2)
    ch = build_chart(sys)
    guess = ch.to_chart(np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0]))
    with pytest.raises((CollisionError, ValueError)):
        find_central_configuration(sys, guess / np.linalg.norm(guess))


def test_hess_tilde_kernel_and_symmetry(equilateral, euler_m1):
    for sys, cc in (equilateral, euler_m1):
        Ht = hess_U_tilde(sys, cc)
        assert np.abs(Ht - Ht.T).max() == 0.0
        assert np.abs(Ht @ cc.s0).max() < 1e-9
        assert cc.kernel_dim >= 1


@pytest.mark.parametrize("masses,shape,alpha", [((1, 1, 1), "equilateral", 1.0), ((1, 2, 3), "collinear", 1.0),
                                                ((1, 2, 3), "equilateral", 0.7)])
def test_hess_tilde_finite_differences(masses, shape, alpha):
    sys, cc = make_cc(masses, shape, alpha)
    fd = fd_hessian(lambda x: U_tilde(sys, x), cc.s0)
    assert np.abs(fd - hess_U_tilde(sys, cc)).max() < 1e-5


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_two_body_mu1(alpha):
    # the two-body shape sphere is a circle of rotations; D^2 U~ vanishes identically
    sys, cc = make_cc((1, 1), "collinear", alpha)
    assert np.abs(hess_U_tilde(sys, cc)).max() < 1e-9
    assert cc.mu1 == pytest.approx(0.0, abs=1e-9)
    assert check_bs(cc).holds


def test_bs_examples(equilateral, euler_m1, euler_m20):
    assert check_bs(equilateral[1]).holds
    assert check_bs(euler_m20[1]).holds
    assert not check_bs(euler_m1[1]).holds
    assert check_bs(equilateral[1]).margin == pytest.approx(0.375, abs=1e-9)


def test_bs_threshold_is_55_over_4():
    """For (1, m, 1) collinear with alpha = 1 the margin is linear in m and vanishes at 55/4."""
    ms = np.array([5.0, 10.0, 13.0, 14.0, 20.0])
    margins = np.array([make_cc((1, m, 1), "collinear")[1].bs_margin for m in ms])
    slope, icpt = np.polyfit(ms, margins, 1)
    assert np.abs(np.polyval([slope, icpt], ms) - margins).max() < 1e-10
    assert -icpt / slope == pytest.approx(55 / 4, abs=1e-9)
    assert not check_bs(make_cc((1, 10, 1), "collinear")[1]).holds
    assert make_cc((1, 27 / 4, 1), "collinear")[1].bs_margin < -1.0


def test_bs_degenerate_band():
    sys, cc = make_cc((1, 55 / 4, 1), "collinear")
    rep = check_bs(cc)
    assert rep.degenerate and not rep.holds


def test_bs_relabel_invariant():
    a = make_cc((1, 2, 3), "equilateral")[1]
    b = make_cc((3, 1, 2), "equilateral")[1]
    assert check_bs(a).holds == check_bs(b).holds
    assert a.bs_margin == pytest.approx(b.bs_margin, rel=1e-9)


@pytest.mark.parametrize("masses,shape", [((1, 1, 1), "equilateral"), ((1, 1, 1), "collinear"),
                                          ((1, 20, 1), "collinear"), ((1, 2, 3), "equilateral")])
def test_bs_equals_rtilde0_definite(masses, shape):
    sys, cc = make_cc(masses, shape)
    for mode in ("collision", "parabolic"):
        lim = limit_blocks(sys, cc, constants(sys, cc, mode))
        assert check_bs(cc).holds == bool(np.linalg.eigvalsh(lim.R_tilde0)[0] > 1e-9)


def test_cc_record_round_trip(tmp_path, equilateral):
    sys, cc = equilateral
    p = tmp_path / "cc.json"
    save_cc(cc, p)
    rec = json.loads(p.read_text())
    assert set(rec) >= {"masses", "d", "alpha", "s0", "residual"}
    cc2 = load_cc(p)
    assert np.allclose(cc2.s0, cc.s0, atol=1e-12)
    assert cc2.u_value == pytest.approx(cc.u_value, rel=1e-12)
