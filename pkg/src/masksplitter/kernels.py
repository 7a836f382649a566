"""Backend selection for the hot loops.

The compiled ``_ckernels`` extension is used when importable. Setting
``MASKSPLITTER_PURE_PYTHON=1`` forces the pure-Python fallback, which is
also used automatically when the extension was not built.
"""

import os

import numpy as np

from masksplitter import _pykernels

if os.environ.get("MASKSPLITTER_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from masksplitter import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"


def label_components(mask, connectivity=8):
    """Label foreground pixels of a 2-D 0/1 array. Returns ``(labels, count)``."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    return _impl.label_components(np.ascontiguousarray(mask, dtype=np.uint8), connectivity)


def overlap_counts(a, b, na, nb):
    """Pixel co-occurrence table of two label arrays, shape ``(na+1, nb+1)``."""
    return _impl.overlap_counts(
        np.ascontiguousarray(a, dtype=np.int32),
        np.ascontiguousarray(b, dtype=np.int32),
        int(na),
        int(nb),
    )


def conv3x3(x, k, bias):
    return _impl.conv3x3(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(k, dtype=np.float64),
        float(bias),
    )


def conv3x3_backward(x, k, dout):
    return _impl.conv3x3_backward(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(k, dtype=np.float64),
        np.ascontiguousarray(dout, dtype=np.float64),
    )
