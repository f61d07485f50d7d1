import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from sasindex import _kernels_py as py
from sasindex import kernels
from sasindex.forms import symplectic_J
from sasindex.morse import to_band

from sasindex.checks import random_banded_symmetric

needs_compiled = pytest.mark.skipif(kernels.compiled_backend is None, reason="extension not built")


@needs_compiled
@given(st.integers(0, 10 ** 6))
def test_pair_terms_backends_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    d = int(rng.integers(2, 4))
    m = rng.uniform(0.1, 5.0, n)
    q = rng.normal(size=n * d)
    alpha = float(rng.uniform(0.1, 1.9))
    a = py.pair_terms(q, m, d, alpha, 1e-12)
    b = kernels.compiled_backend.pair_terms(q, m, d, alpha, 1e-12)
    assert a[0] == pytest.approx(b[0], rel=1e-12)
    assert np.allclose(a[1], b[1], rtol=1e-11, atol=1e-12)
    assert np.allclose(a[2], b[2], rtol=1e-11, atol=1e-12)
    assert a[3] == pytest.approx(b[3], rel=1e-14)


@needs_compiled
def test_pair_terms_floor():
    q = np.array([0.0, 0.0, 1e-15, 0.0])
    for be in (py, kernels.compiled_backend):
        U, g, H, dmin = be.pair_terms(q, np.ones(2), 2, 1.0, 1e-12)
        assert U == np.inf and dmin < 1e-12


@needs_compiled
@given(st.integers(0, 10 ** 6))
def test_band_inertia_backends_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 80))
    bw = int(rng.integers(1, 6))
    ab = to_band(random_banded_symmetric(n, bw, rng), bw)
    a = py.band_inertia(ab, 1e-12)
    b = kernels.compiled_backend.band_inertia(np.ascontiguousarray(ab), 1e-12)
    assert a[:3] == tuple(b[:3])
    assert a[3] == pytest.approx(b[3], rel=1e-10)


def random_hamiltonian(n2, rng, scale=0.5):
    A = rng.normal(size=(n2, n2)) * scale
    return symplectic_J(n2 // 2) @ (A + A.T)


@needs_compiled
@given(st.integers(0, 10 ** 6))
def test_gauss_sweep_backends_agree(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(1, 4))
    K = 30
    H1 = np.stack([random_hamiltonian(2 * N, rng) for _ in range(K)])
    H2 = np.stack([random_hamiltonian(2 * N, rng) for _ in range(K)])
    h = -np.full(K, 0.05)
    F0 = np.vstack([np.eye(N), np.zeros((N, N))])
    fa, da, ia = py.gauss_sweep(H1, H2, h, F0)
    fb, db, ib = kernels.compiled_backend.gauss_sweep(H1, H2, h, F0)
    assert np.allclose(fa, fb, atol=1e-12)
    assert da == pytest.approx(db, abs=1e-13) and ia == pytest.approx(ib, abs=1e-13)


def test_gauss_sweep_constant_matches_expm():
    rng = np.random.default_rng(7)
    H = random_hamiltonian(4, rng)
    K, step = 200, 0.01
    F0 = sla.expm(H) @ np.vstack([np.eye(2), np.zeros((2, 2))])
    frames, drift, iso = kernels.gauss_sweep(np.stack([H] * K), np.stack([H] * K), np.full(K, step), F0)
    exact = sla.expm(K * step * H) @ F0
    # compare subspaces through the projectors
    Qe = np.linalg.qr(exact)[0]
    assert np.abs(frames[-1] @ frames[-1].T - Qe @ Qe.T).max() < 1e-9
    assert iso < 1e-12


def test_backend_selection():
    env = dict(os.environ, SASINDEX_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import sasindex.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
