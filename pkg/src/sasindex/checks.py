"""Small oracle problems with known answers, used by ``sasindex verify`` and the tests."""

import numpy as np

from .config_space import MassSystem
from .forms import constant_coefficient_path
from .maslov import epsilon_rotation_index, maslov_index, planar_rotation_path
from .mcgehee import constants_from
from .morse import Discretization, assemble_form, inertia_banded, spectrum_head
from .potential import (find_central_configuration, guess_configuration, hess_U_tilde, potential_value)


def sturm_liouville_toy(mesh: int = 400):
    """-u'' - 4u on [0, pi], Dirichlet: eigenvalues n^2 - 4, exactly one negative."""
    coeff = constant_coefficient_path(1.0, 0.0, -4.0, tau_max=np.pi)
    fm = assemble_form(coeff, Discretization(np.pi, mesh))
    return inertia_banded(fm.A, fm.bandwidth).n_neg, spectrum_head(fm, 4)


def random_banded_symmetric(n: int, bw: int, rng) -> np.ndarray:
    A = rng.normal(size=(n, n))
    A = np.triu(np.tril(A + A.T, bw), -bw)
    return A + rng.normal() * np.eye(n)


def inertia_agreement(n_matrices: int = 100, seed: int = 0) -> int:
    """Number of random banded symmetric matrices where LDL^T and eigvalsh disagree."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n_matrices):
        n = int(rng.integers(5, 60))
        bw = int(rng.integers(1, 6))
        A = random_banded_symmetric(n, bw, rng)
        ev = np.linalg.eigvalsh(A)
        inn = inertia_banded(A, bw)
        if inn.perturbed or inn.n_neg != int(np.sum(ev < 0)) or inn.n_pos != int(np.sum(ev > 0)):
            bad += 1
    return bad


def U_tilde(sys: MassSystem, x) -> float:
    """|x|^alpha U(x): the degree-zero extension of U off the inertia ellipsoid."""
    return float(np.linalg.norm(x) ** sys.alpha * potential_value(sys, x))


def fd_hessian(f, x, h: float = 1e-4) -> np.ndarray:
    """Fourth-order central differences."""
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.zeros((n, n))
    E = np.eye(n) * h
    for i in range(n):
        for j in range(i, n):
            acc = 0.0
            for a, ca in ((-2, -1), (-1, 8), (1, -8), (2, 1)):
                for b, cb in ((-2, -1), (-1, 8), (1, -8), (2, 1)):
                    acc += ca * cb * f(x + a * E[i] + b * E[j])
            H[i, j] = H[j, i] = acc / (144 * h * h)
    return H


def hessian_fd_error(masses=(1.0, 1.0, 1.0), alpha: float = 1.0, shape: str = "equilateral") -> float:
    sys = MassSystem(masses, 2, alpha)
    cc = find_central_configuration(sys, guess_configuration(sys, shape))
    return float(np.abs(fd_hessian(lambda x: U_tilde(sys, x), cc.s0) - hess_U_tilde(sys, cc)).max())


def constants_identity_max(n_pairs: int = 20, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        a = float(rng.uniform(0.05, 1.95))
        U = float(rng.uniform(0.1, 20.0))
        k = constants_from(a, U)
        worst = max(worst, abs(k.identity_residual()) / U)
    return worst


def planar_maslov():
    """span(-sin t, cos t) on [0.1, pi - 0.1] crosses span(e1) once, at t = pi/2.

    Returns mu(l, L0) from crossing forms and from the rotation count
    (which counts in the opposite pair order, hence the minus sign).
    """
    path = planar_rotation_path()
    return maslov_index(path).index, -epsilon_rotation_index(path)


def run_oracles() -> list:
    """Each entry: name, measured value, expected value or bound, passed."""
    out = []
    nneg, head = sturm_liouville_toy()
    exact = np.array([-3.0, 0.0, 5.0, 12.0])
    out.append({"name": "sturm_liouville_index", "value": nneg, "expected": 1, "passed": nneg == 1})
    err = float((np.abs(head[:4] - exact) / (1 + np.abs(exact))).max())
    out.append({"name": "sturm_liouville_eigenvalues_rel", "value": err, "bound": 1e-3, "passed": err < 1e-3})
    bad = inertia_agreement()
    out.append({"name": "inertia_vs_eigvalsh", "value": bad, "expected": 0, "passed": bad == 0})
    e = hessian_fd_error()
    out.append({"name": "hessian_fd_vs_analytic", "value": e, "bound": 1e-5, "passed": e < 1e-5})
    r = constants_identity_max()
    out.append({"name": "constants_identity", "value": r, "bound": 1e-12, "passed": r < 1e-12})
    mi, eps = planar_maslov()
    out.append({"name": "planar_maslov_dual_route", "value": [mi, eps], "expected": [-1, -1],
                "passed": mi == eps == -1})
    return out
