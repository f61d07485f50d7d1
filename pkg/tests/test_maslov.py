import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sasindex import (LagrangianPath, MaslovError, assemble_coefficients, compute_sigma0, constants,
                      crossing_form, epsilon_rotation_index, geometric_index, homothetic_parabolic, maslov_index,
                      random_orthogonal_direction, sigma_path_maslov, synthetic_perturbation)
from sasindex.maslov import (balancing, crossing_table, detect_crossings, planar_rotation_path, sigma_family,
                             sigma_parameter)
from sasindex.symplectic import isotropy_residual

from maslov_props import check_path


def test_constant_transversal_path():
    F = np.vstack([np.eye(2), np.eye(2) * 0 + np.diag([1.0, 2.0])])
    path = LagrangianPath(lambda t: F, 0.0, 1.0)
    assert detect_crossings(path) == []
    res = maslov_index(path, oracle=True)
    assert res.index == 0 and res.crossings == []


def test_planar_rotation_crossing():
    path = planar_rotation_path()
    cr = detect_crossings(path)
    assert len(cr) == 1
    assert abs(cr[0].location - np.pi / 2) < 1e-9 and cr[0].kernel_dim == 1
    res = maslov_index(path, oracle=True)
    # mu(l, L0) of the positive rotation; frozen after agreement with the rotation count
    assert res.index == -1 and res.rs_index == 1
    assert epsilon_rotation_index(path) == 1
    assert res.crossings[0].regular and abs(res.crossings[0].signature) == 1


def test_crossing_form_independent_of_W():
    path = planar_rotation_path()
    W1 = np.array([[0.0], [1.0]])
    W2 = np.array([[1.0], [1.0]]) / np.sqrt(2)
    a = crossing_form(path, np.pi / 2, W=W1)
    b = crossing_form(path, np.pi / 2, W=W2)
    assert a.signature == b.signature == 1
    assert a.form_eigs[0] == pytest.approx(b.form_eigs[0], abs=1e-8)


def test_crossing_form_rejects_bad_W():
    with pytest.raises(MaslovError):
        crossing_form(planar_rotation_path(), np.pi / 2, W=np.array([[1.0], [0.0]]))


def test_endpoint_rules():
    # a crossing at the left end counts n+, at the right end -n-
    left = planar_rotation_path(np.pi / 2, 2.0)
    right = planar_rotation_path(1.0, np.pi / 2)
    rl = maslov_index(left)
    rr = maslov_index(right)
    assert rl.endpoint_convention_applied and rr.endpoint_convention_applied
    assert rl.rs_index == 1 and rr.rs_index == 0


def test_concatenation_additivity():
    p1 = planar_rotation_path(0.1, 1.0)
    p2 = planar_rotation_path(1.0, 3.0)
    whole = p1.concatenated(p2)
    assert maslov_index(whole).index == maslov_index(p1).index + maslov_index(p2).index == -1


def test_full_turn_is_two():
    # e^{tJ} L0 over [-0.3, 2 pi - 0.3] meets L0 twice, both positively
    path = LagrangianPath(lambda t: np.array([[np.cos(t)], [np.sin(t)]]), -0.3, 2 * np.pi - 0.3)
    assert maslov_index(path, oracle=True).rs_index == 2


@given(st.integers(0, 10 ** 6))
@settings(max_examples=25)
def test_axioms_random_paths(seed):
    assert check_path(seed) == {}


def test_crossing_table_rows():
    res = maslov_index(planar_rotation_path())
    rows = crossing_table(res)
    assert rows[0]["method"] == "crossing-form" and rows[0]["kernel_dim"] == 1


def test_balancing_keeps_L0():
    rng = np.random.default_rng(0)
    F = np.linalg.qr(rng.normal(size=(6, 3)))[0]
    Phi = balancing(F)
    J = np.block([[np.zeros((3, 3)), -np.eye(3)], [np.eye(3), np.zeros((3, 3))]])
    assert np.abs(Phi.T @ J @ Phi - J).max() < 1e-12
    assert np.abs(Phi[3:, :3]).max() == 0.0


def test_sigma_parameter_round_trip():
    fwd, inv = sigma_parameter(92.4)
    for u in (0.0, 0.1, 0.5, 0.99, 1.0):
        assert inv(fwd(u)) == pytest.approx(u, abs=1e-12)
    assert fwd(1.0) == 92.4 and fwd(0.0) == 0.0


def test_geometric_index_homothetic(equilateral):
    sys, cc = equilateral
    co = assemble_coefficients(sys, cc, homothetic_parabolic(sys, cc, 20.0, 401))
    g = geometric_index(co, oracle=True)
    assert g.index == 0 and g.maslov.crossings == []


def test_geometric_index_refused_without_bs(euler_m1):
    sys, cc = euler_m1
    co = assemble_coefficients(sys, cc, homothetic_parabolic(sys, cc, 20.0, 401))
    with pytest.raises(Exception):
        geometric_index(co)
    with pytest.raises(MaslovError):
        geometric_index(co, bs_holds=False)


@pytest.fixture(scope="module")
def nonzero_case():
    from conftest import make_cc
    sys, cc = make_cc((1, 20, 1), "collinear")
    k = constants(sys, cc, "parabolic")
    tr = synthetic_perturbation(cc, k, 0.2, 0.5, random_orthogonal_direction(cc.s0, 3), 40.0, 2001)
    return sys, cc, assemble_coefficients(sys, cc, tr)


def test_geometric_and_sigma_path(nonzero_case):
    sys, cc, co = nonzero_case
    g = geometric_index(co, oracle=True)
    assert g.index == 1
    assert len(g.maslov.crossings) >= 1
    assert g.stable.omega_drift < 1e-9 and g.stable.isotropy < 1e-8
    s0 = compute_sigma0(co)
    sp = sigma_path_maslov(co, s0, oracle=True)
    assert sp.index == -g.index
    assert sp.limit_edge_zero and sp.far_edge_zero and sp.uniform_sign
    assert sp.maslov.oracle_index == sp.index
    # the sigma crossing sits at minus the negative eigenvalue of the L2 problem
    assert sp.maslov.crossings[0].location == pytest.approx(2.043, abs=5e-3)


def test_crossing_free_subinterval(nonzero_case):
    from sasindex.maslov import stable_lagrangian_path
    sys, cc, co = nonzero_case
    g = geometric_index(co)
    path = stable_lagrangian_path(g.stable, g.tau_end)
    cuts = [path.a] + [c.location for c in g.maslov.crossings] + [path.b]
    a, b = max(zip(cuts[:-1], cuts[1:]), key=lambda ab: ab[1] - ab[0])
    pad = 0.1 * (b - a)
    assert maslov_index(path.restricted(a + pad, b - pad)).index == 0


def test_sigma_family_frames_isotropic(nonzero_case):
    sys, cc, co = nonzero_case
    run = sigma_family(co)
    for s in (0.0, 1.0, 10.0):
        F, margin = run(s)
        assert isotropy_residual(F) < 1e-8 and margin > 0


def test_sigma_path_homothetic_zero(equilateral):
    sys, cc = equilateral
    co = assemble_coefficients(sys, cc, homothetic_parabolic(sys, cc, 20.0, 401))
    sp = sigma_path_maslov(co, compute_sigma0(co))
    assert sp.index == 0 and sp.limit_edge_zero and sp.far_edge_zero
