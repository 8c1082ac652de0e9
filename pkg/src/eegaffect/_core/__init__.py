"""Hot kernels, compiled when available.

Set ``EEGAFFECT_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _fallback

if os.environ.get("EEGAFFECT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
        BACKEND = "python"

grow_tree = _impl.grow_tree
tree_leaf_votes = _impl.tree_leaf_votes
svm_dual_cd = _impl.svm_dual_cd


def backend(name: str):
    """Kernel module by name (``"cython"`` or ``"python"``)."""
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
