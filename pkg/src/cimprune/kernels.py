"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``CIMPRUNE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from cimprune import _pykernels

if os.environ.get("CIMPRUNE_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from cimprune import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

rbl_popcount = _impl.rbl_popcount
bws_differential = _impl.bws_differential
exact_scores = _impl.exact_scores


def backends():
    """Map of every importable backend name to its module."""
    out = {"python": _pykernels}
    try:
        from cimprune import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
