"""Pure-Python/numpy versions of the compiled kernels.

Same signatures and outputs as ``_ckernels``. Used when the extension is
not built, and as the reference side of the backend benchmark.
"""

import numpy as np


def label_components(mask, connectivity):
    h, w = mask.shape
    flat = mask.ravel().tolist()
    parent = list(range(h * w))

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    def union(a, b):
        a, b = find(a), find(b)
        if a < b:
            parent[b] = a
        elif b < a:
            parent[a] = b

    diag = connectivity == 8
    for y in range(h):
        row = y * w
        for x in range(w):
            i = row + x
            if not flat[i]:
                continue
            if x > 0 and flat[i - 1]:
                union(i, i - 1)
            if y > 0:
                if flat[i - w]:
                    union(i, i - w)
                if diag:
                    if x > 0 and flat[i - w - 1]:
                        union(i, i - w - 1)
                    if x + 1 < w and flat[i - w + 1]:
                        union(i, i - w + 1)

    out = [0] * (h * w)
    remap = {}
    for i, v in enumerate(flat):
        if v:
            root = find(i)
            if root not in remap:
                remap[root] = len(remap) + 1
            out[i] = remap[root]
    return np.array(out, dtype=np.int32).reshape(h, w), len(remap)


def overlap_counts(a, b, na, nb):
    idx = a.astype(np.int64).ravel() * (nb + 1) + b.ravel()
    return np.bincount(idx, minlength=(na + 1) * (nb + 1)).reshape(na + 1, nb + 1).astype(np.int64)


def conv3x3(x, k, bias):
    h, w = x.shape[1:]
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.full((h, w), float(bias))
    for i in range(3):
        for j in range(3):
            out += np.tensordot(k[:, i, j], padded[:, i:i + h, j:j + w], axes=1)
    return out


def conv3x3_backward(x, k, dout):
    c, h, w = x.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    dk = np.zeros((c, 3, 3))
    dx_padded = np.zeros((c, h + 2, w + 2))
    for i in range(3):
        for j in range(3):
            dk[:, i, j] = np.tensordot(padded[:, i:i + h, j:j + w], dout, axes=2)
            dx_padded[:, i:i + h, j:j + w] += k[:, i, j, None, None] * dout
    return dk, float(dout.sum()), dx_padded[:, 1:-1, 1:-1].copy()
