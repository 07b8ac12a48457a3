"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

The image metrics go to the compiled extension (3-6x faster; see
bench/bench_kernels.py).  The duplicate scan always uses the blocked-BLAS
numpy implementation, which outperforms the scalar compiled loop at every
size tried.  Set ``LENSPIPE_PURE_PYTHON=1`` to force the fallback everywhere.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("LENSPIPE_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

laplacian_variance = _impl.laplacian_variance
shannon_entropy = _impl.shannon_entropy
dedup_scan = _kernels_py.dedup_scan
