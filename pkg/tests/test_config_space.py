import numpy as np
import pytest
from hypothesis import given, strategies as st

from sasindex import MassSystem, build_chart, mass_inner, tensor_M

masses_st = st.lists(st.floats(0.1, 50.0), min_size=2, max_size=5)


def test_two_body_chart_is_relative_motion():
    ch = build_chart(MassSystem((1, 1), 2))
    assert ch.basis.shape == (4, 2)
    for col in ch.basis.T:
        q = col.reshape(2, 2)
        assert np.allclose(q[0], -q[1], atol=1e-14)
    assert ch.orthonormality_residual() < 1e-12


def test_three_equal_masses_dimensions():
    ch = build_chart(MassSystem((1, 1, 1), 2))
    assert ch.basis.shape == (6, 4)
    G = ch.basis.T @ (ch.system.mass_diag[:, None] * ch.basis)
    assert np.abs(G - np.eye(4)).max() < 1e-12


def test_random_masses_barycenter_free():
    rng = np.random.default_rng(0)
    sys = MassSystem(tuple(rng.uniform(0.5, 5.0, 4)), 3)
    ch = build_chart(sys)
    assert sys.N == 9
    assert np.abs(ch.barycenters()).max() < 1e-12


def test_chart_is_deterministic():
    sys = MassSystem((1.0, 2.5, 0.7), 2)
    assert np.array_equal(build_chart(sys).basis, build_chart(sys).basis)


@pytest.mark.parametrize("kw,field", [({"masses": (1,)}, "masses"), ({"masses": (1, -1)}, "masses"),
                                      ({"masses": (1, 1), "d": 1}, "d"), ({"masses": (1, 1), "alpha": 2.0}, "alpha"),
                                      ({"masses": (1, 1), "alpha": 0.0}, "alpha")])
def test_invalid_systems(kw, field):
    with pytest.raises(ValueError, match=field):
        MassSystem(**kw)


@given(masses_st, st.integers(2, 3))
def test_chart_invariants(masses, d):
    sys = MassSystem(tuple(masses), d)
    ch = build_chart(sys)
    assert ch.basis.shape == (sys.n * d, d * (sys.n - 1))
    assert ch.orthonormality_residual() < 1e-12
    assert np.abs(ch.barycenters()).max() < 1e-12 * max(1.0, max(masses))


def test_mass_inner_unit_vectors():
    sys = MassSystem((1.0, 3.0, 7.0), 2)
    e = np.zeros(6)
    e[2] = 1.0  # particle 1, first axis
    assert mass_inner(sys, e, e) == 3.0


@given(masses_st, st.integers(0, 2 ** 31))
def test_mass_inner_componentwise(masses, seed):
    sys = MassSystem(tuple(masses), 2)
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, sys.n * 2))
    ref = sum(m * np.dot(u[2 * k:2 * k + 2], v[2 * k:2 * k + 2]) for k, m in enumerate(masses))
    assert mass_inner(sys, u, v) == pytest.approx(ref, rel=1e-12, abs=1e-12)
    assert mass_inner(sys, u, v) == pytest.approx(mass_inner(sys, v, u), rel=1e-14)
    assert mass_inner(sys, u, u) > 0


def test_mass_inner_chart_orthogonality():
    sys = MassSystem((1.0, 2.0, 3.0), 2)
    ch = build_chart(sys)
    assert abs(mass_inner(sys, ch.basis[:, 0], ch.basis[:, 1])) < 1e-14


def test_mass_inner_dimension_mismatch():
    with pytest.raises(ValueError):
        mass_inner(MassSystem((1, 1), 2), np.ones(4), np.ones(3))


def test_tensor_projector_and_zero():
    w = np.array([0.6, 0.8, 0.0])
    A = tensor_M(w, w)
    ev = np.linalg.eigvalsh(A)
    assert np.allclose(ev, [0, 0, 1], atol=1e-14)
    assert np.array_equal(tensor_M(np.zeros(3), np.zeros(3)), np.zeros((3, 3)))


@given(st.integers(0, 2 ** 31), st.integers(1, 6))
def test_tensor_identities(seed, N):
    rng = np.random.default_rng(seed)
    u, w, v = rng.normal(size=(3, N))
    assert np.array_equal(tensor_M(u, w).T, tensor_M(w, u))
    assert np.allclose(tensor_M(u, w) @ v, np.dot(w, v) * u, atol=1e-12)
    ww = tensor_M(w, w)
    assert np.trace(ww) == pytest.approx(np.dot(w, w), rel=1e-12)
    assert np.linalg.matrix_rank(ww) <= 1


def test_chart_symmetry_is_mass_selfadjointness():
    sys = MassSystem((1.0, 2.0, 5.0), 2)
    ch = build_chart(sys)
    s = np.random.default_rng(1).normal(size=sys.N)
    A = tensor_M(s, s)
    # ambient operator phi A phi^T M is M-selfadjoint iff A is symmetric
    Amb = ch.basis @ A @ ch.basis.T @ np.diag(sys.mass_diag)
    Mmat = np.diag(sys.mass_diag)
    assert np.abs(Mmat @ Amb - (Mmat @ Amb).T).max() < 1e-12
