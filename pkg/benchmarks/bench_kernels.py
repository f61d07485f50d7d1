"""Timing of the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from sasindex import _kernels_py as py
from sasindex import kernels
from sasindex.checks import random_banded_symmetric
from sasindex.forms import symplectic_J
from sasindex.morse import to_band


def workloads(rng):
    n, d = 5, 2
    q = rng.normal(size=n * d)
    m = rng.uniform(0.5, 2.0, n)
    ab = np.ascontiguousarray(to_band(random_banded_symmetric(4000, 7, rng), 7))
    N, K = 4, 2000
    A = rng.normal(size=(K, 2 * N, 2 * N)) * 0.3
    H = np.einsum("ij,kjl->kil", symplectic_J(N), A + A.transpose(0, 2, 1))
    F0 = np.vstack([np.eye(N), np.zeros((N, N))])
    h = np.full(K, -0.02)
    return {
        "pair_terms (n=5)": lambda be: be.pair_terms(q, m, d, 1.0, 1e-12),
        "band_inertia (n=4000, bw=7)": lambda be: be.band_inertia(ab, 1e-12),
        "gauss_sweep (N=4, 2000 steps)": lambda be: be.gauss_sweep(H, H, h, F0),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.compiled_backend is None:
        print("compiled extension not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, f in workloads(rng).items():
        number = 200 if name.startswith("pair") else 1
        tp = min(timeit.repeat(lambda: f(py), number=number, repeat=args.repeat)) / number * 1e3
        if kernels.compiled_backend is None:
            print(f"{name:32s} {tp:12.3f} {'-':>12s} {'-':>8s}")
            continue
        tc = min(timeit.repeat(lambda: f(kernels.compiled_backend), number=number, repeat=args.repeat)) / number * 1e3
        print(f"{name:32s} {tp:12.3f} {tc:12.3f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
