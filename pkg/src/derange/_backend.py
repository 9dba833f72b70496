"""Pick the batch-kernel backend at import time.

The compiled extension is used when it was built; ``DERANGE_BACKEND=python``
forces the pure-Python kernels (identical output, far slower).
"""
import os

if os.environ.get("DERANGE_BACKEND", "").lower() == "python":
    from derange import _pykernels as kernels
    BACKEND = "python"
else:
    try:
        from derange import _ckernels as kernels
        BACKEND = "cython"
    except ImportError:
        from derange import _pykernels as kernels
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
