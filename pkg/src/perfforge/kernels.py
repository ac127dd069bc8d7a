"""Backend selection for the alignment kernels.

The Cython extension is used when it was built; otherwise, or when the
``PERFFORGE_PURE_PYTHON`` environment variable is set to a non-empty value,
the pure-Python module is used. Both expose ``jaccard_matrix`` and
``dtw_fill`` with identical results.
"""

import os

from . import _pykernels

MATCH, SKIP_SCORE, SKIP_PERF = 0, 1, 2

try:
    if os.environ.get("PERFFORGE_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

jaccard_matrix = _impl.jaccard_matrix
dtw_fill = _impl.dtw_fill


def available_backends():
    """Map of backend name to kernel module, for tests and benchmarks."""
    backends = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        backends["cython"] = _ckernels
    return backends
