"""Kernel backend selection.

Imports the compiled Cython kernels when the extension built, otherwise
the NumPy fallback. ``ICURISK_PURE_PYTHON=1`` forces the fallback (used
by the backend-agreement tests and the benchmark).
"""

import os

from . import pyfallback

if os.environ.get("ICURISK_PURE_PYTHON"):
    _impl = pyfallback
    BACKEND = "python"
else:
    try:
        from . import _fast as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = pyfallback
        BACKEND = "python"

auroc = _impl.auroc
cindex_counts = _impl.cindex_counts
knn_impute = _impl.knn_impute

__all__ = ["BACKEND", "auroc", "cindex_counts", "knn_impute", "pyfallback"]
