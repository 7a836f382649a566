# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Mirrors ``_pykernels`` function for function."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t root = i, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


cdef inline void _union(Py_ssize_t[::1] parent, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a < b:
        parent[b] = a
    elif b < a:
        parent[a] = b


def label_components(const cnp.uint8_t[:, ::1] mask, int connectivity):
    """Two-pass union-find labeling; ids follow raster order of first pixel."""
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    cdef Py_ssize_t n = h * w
    cdef Py_ssize_t[::1] parent = np.arange(n, dtype=np.intp)
    cdef cnp.int32_t[:, ::1] out = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[::1] remap
    cdef Py_ssize_t y, x, i, root
    cdef int diag = connectivity == 8
    cdef cnp.int32_t count = 0

    with nogil:
        for y in range(h):
            for x in range(w):
                if not mask[y, x]:
                    continue
                i = y * w + x
                if x > 0 and mask[y, x - 1]:
                    _union(parent, i, i - 1)
                if y > 0:
                    if mask[y - 1, x]:
                        _union(parent, i, i - w)
                    if diag:
                        if x > 0 and mask[y - 1, x - 1]:
                            _union(parent, i, i - w - 1)
                        if x + 1 < w and mask[y - 1, x + 1]:
                            _union(parent, i, i - w + 1)

    remap = np.zeros(n, dtype=np.int32)
    with nogil:
        for y in range(h):
            for x in range(w):
                if not mask[y, x]:
                    continue
                root = _find(parent, y * w + x)
                if remap[root] == 0:
                    count += 1
                    remap[root] = count
                out[y, x] = remap[root]
    return np.asarray(out), int(count)


def overlap_counts(const cnp.int32_t[:, ::1] a, const cnp.int32_t[:, ::1] b,
                   Py_ssize_t na, Py_ssize_t nb):
    """Contingency table: entry (i, j) counts pixels with a == i and b == j."""
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1], y, x
    cdef cnp.int64_t[:, ::1] table = np.zeros((na + 1, nb + 1), dtype=np.int64)
    with nogil:
        for y in range(h):
            for x in range(w):
                table[a[y, x], b[y, x]] += 1
    return np.asarray(table)


def conv3x3(const double[:, :, ::1] x, const double[:, :, ::1] k, double bias):
    """Zero-padded, stride-1 3x3 cross-correlation summed over channels."""
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef double[:, ::1] out = np.empty((h, w), dtype=np.float64)
    cdef Py_ssize_t ch, y, xx, i, j, yy, xs
    cdef double acc
    with nogil:
        for y in range(h):
            for xx in range(w):
                acc = bias
                for ch in range(c):
                    for i in range(3):
                        yy = y + i - 1
                        if yy < 0 or yy >= h:
                            continue
                        for j in range(3):
                            xs = xx + j - 1
                            if xs < 0 or xs >= w:
                                continue
                            acc += k[ch, i, j] * x[ch, yy, xs]
                out[y, xx] = acc
    return np.asarray(out)


def conv3x3_backward(const double[:, :, ::1] x, const double[:, :, ::1] k,
                     const double[:, ::1] dout):
    """Gradients of ``conv3x3`` w.r.t. kernel, bias and input."""
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef double[:, :, ::1] dk = np.zeros((c, 3, 3), dtype=np.float64)
    cdef double[:, :, ::1] dx = np.zeros((c, h, w), dtype=np.float64)
    cdef double db = 0.0, g
    cdef Py_ssize_t ch, y, xx, i, j, yy, xs
    with nogil:
        for y in range(h):
            for xx in range(w):
                g = dout[y, xx]
                if g == 0.0:
                    continue
                db += g
                for ch in range(c):
                    for i in range(3):
                        yy = y + i - 1
                        if yy < 0 or yy >= h:
                            continue
                        for j in range(3):
                            xs = xx + j - 1
                            if xs < 0 or xs >= w:
                                continue
                            dk[ch, i, j] += g * x[ch, yy, xs]
                            dx[ch, yy, xs] += g * k[ch, i, j]
    return np.asarray(dk), db, np.asarray(dx)
