"""Backend selection for the walk kernel.

The compiled extension is used when it imports; otherwise the NumPy
implementation takes over. Setting ``ISOMWALK_PURE_PYTHON=1`` forces the
fallback. Both backends produce identical bits for identical inputs.
"""

import os

from isomwalk import _kernels_py

try:
    if os.environ.get("ISOMWALK_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend requested")
    from isomwalk import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py

walk_chunk = _impl.walk_chunk
MAX_DIM = _impl.MAX_DIM


def get_backend(name=None):
    """Return the kernel module for ``name`` ('compiled', 'python' or None)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernel is not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def default_threads():
    env = os.environ.get("ISOMWALK_THREADS")
    if env:
        return max(1, int(env))
    return 1
