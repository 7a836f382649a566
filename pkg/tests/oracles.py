"""Independent reference implementations used only by the tests.

These are deliberately naive: pixel sets, Python loops and exact
fractions. None of them import the code paths they check.
"""

from collections import deque
from fractions import Fraction

import numpy as np


def flood_fill_labels(mask, connectivity):
    """BFS labeling, ids in raster order of each component's first pixel."""
    mask = np.asarray(mask)
    h, w = mask.shape
    steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if connectivity == 8:
        steps += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    out = np.zeros((h, w), dtype=int)
    n = 0
    for y in range(h):
        for x in range(w):
            if mask[y, x] and not out[y, x]:
                n += 1
                out[y, x] = n
                queue = deque([(y, x)])
                while queue:
                    cy, cx = queue.popleft()
                    for dy, dx in steps:
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not out[ny, nx]:
                            out[ny, nx] = n
                            queue.append((ny, nx))
    return out, n


def pixel_sets(labels):
    labels = np.asarray(labels)
    sets = {}
    for (y, x), v in np.ndenumerate(labels):
        if v:
            sets.setdefault(int(v), set()).add((y, x))
    return sets


def set_iou(a, b):
    union = len(a | b)
    return Fraction(len(a & b), union) if union else Fraction(0)


def brute_split(pred_labels, gt_labels, threshold=0.0):
    """Rule-table classifier on pixel sets.

    Returns ``(counts, masks_as_pixel_sets, seen1, seen2)``.
    """
    preds = pixel_sets(pred_labels)
    gts = pixel_sets(gt_labels)
    thr = Fraction(str(threshold)) if isinstance(threshold, float) else Fraction(threshold)
    overlaps = {p: {g for g, gs in gts.items() if set_iou(ps, gs) > thr} for p, ps in preds.items()}
    touching = {g: {p for p in preds if g in overlaps[p]} for g in gts}
    good, bad1, bad2 = set(), set(), set()
    seen1, seen2 = set(), set()
    n_good = 0
    for p, hits in overlaps.items():
        if len(hits) >= 2:
            bad1 |= preds[p]
            seen1 |= hits
        elif len(hits) == 1:
            (g,) = hits
            if len(touching[g]) == 1:
                good |= preds[p]
                n_good += 1
            else:
                bad2 |= preds[p]
                seen2.add(g)
    return (n_good, len(seen1), len(seen2)), (good, bad1, bad2), seen1, seen2


def mask_to_set(mask):
    return {(int(y), int(x)) for y, x in zip(*np.nonzero(mask))}


def naive_conv3x3(x, k, bias):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[None]
    k = np.asarray(k, dtype=float).reshape(x.shape[0], 3, 3)
    c, h, w = x.shape
    out = np.full((h, w), float(bias))
    for yy in range(h):
        for xx in range(w):
            for ch in range(c):
                for i in range(3):
                    for j in range(3):
                        sy, sx = yy + i - 1, xx + j - 1
                        if 0 <= sy < h and 0 <= sx < w:
                            out[yy, xx] += k[ch, i, j] * x[ch, sy, sx]
    return out


def brute_ap(dets_per_image, gt_labels_per_image, threshold):
    """Exact-fraction AP from the full PR curve.

    ``dets_per_image`` holds ``(pixel_set, score)`` pairs. Ranking key:
    score desc, area desc, image index, raster index of first pixel.
    """
    thr = Fraction(str(threshold))
    ranked = []
    n_gt = 0
    for index, (dets, labels) in enumerate(zip(dets_per_image, gt_labels_per_image)):
        gts = pixel_sets(labels)
        n_gt += len(gts)
        width = np.asarray(labels).shape[1]
        keyed = sorted(
            dets,
            key=lambda d: (-d[1], -len(d[0]), min(y * width + x for y, x in d[0])),
        )
        taken = set()
        for pix, score in keyed:
            candidates = [
                (set_iou(pix, gs), -g) for g, gs in gts.items()
                if g not in taken and set_iou(pix, gs) >= thr and pix & gs
            ]
            tp = False
            if candidates:
                _, neg_g = max(candidates)
                taken.add(-neg_g)
                tp = True
            first = min(y * width + x for y, x in pix)
            ranked.append(((-score, -len(pix), index, first), tp))
    ranked.sort(key=lambda r: r[0])
    flags = [tp for _, tp in ranked]
    return brute_ap_from_flags(flags, n_gt)


def brute_ap_from_flags(flags, n_gt):
    if n_gt == 0:
        return 1.0 if not flags else 0.0
    curve = []
    tp = 0
    for k, flag in enumerate(flags, start=1):
        tp += flag
        curve.append((Fraction(tp, n_gt), Fraction(tp, k)))
    total = Fraction(0)
    for i in range(101):
        r = Fraction(i, 100)
        best = [p for rec, p in curve if rec >= r]
        total += max(best) if best else 0
    return float(total / 101)
