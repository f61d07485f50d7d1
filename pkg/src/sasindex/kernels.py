"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set ``SASINDEX_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _kernels_py as python_backend

compiled_backend = None
if not os.environ.get("SASINDEX_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

pair_terms = _impl.pair_terms
band_inertia = _impl.band_inertia
gauss_sweep = _impl.gauss_sweep
