"""Classify prediction blobs against ground-truth instances.

Each prediction blob is put in one of three bins by its overlap pattern
with the ground truth:

* good: overlaps exactly one instance, and no other blob overlaps it;
* bad type 1: overlaps two or more instances (merged prediction);
* bad type 2: overlaps one instance that other blobs overlap as well
  (fragmented prediction).

Blobs that overlap nothing are ignored. Type 1 and type 2 counts are
numbers of distinct *instances* involved, not numbers of blobs.
"""

from dataclasses import dataclass

import numpy as np

from masksplitter import kernels
from masksplitter.masks import LabelMap, _frozen, as_binary_mask, check_same_shape


@dataclass(frozen=True, eq=False)
class SplitResult:
    n_good: int
    n_bad_type1: int
    n_bad_type2: int
    good_mask: np.ndarray
    bad1_mask: np.ndarray
    bad2_mask: np.ndarray
    seen_type1: frozenset
    seen_type2: frozenset

    @property
    def counts(self):
        return self.n_good, self.n_bad_type1, self.n_bad_type2

    @property
    def masks(self):
        return self.good_mask, self.bad1_mask, self.bad2_mask


def iou(a, b) -> float:
    """Intersection over union of two binary masks; 0.0 when both are empty."""
    a = as_binary_mask(a).astype(bool)
    b = as_binary_mask(b).astype(bool)
    check_same_shape(a, b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def overlap_table(preds: LabelMap, gt: LabelMap):
    """Integer intersections ``(P, G)`` and the matching unions."""
    check_same_shape(preds.labels, gt.labels)
    table = kernels.overlap_counts(preds.labels, gt.labels, preds.count, gt.count)
    inter = table[1:, 1:]
    pred_area = table[1:, :].sum(axis=1)
    gt_area = table[:, 1:].sum(axis=0)
    union = pred_area[:, None] + gt_area[None, :] - inter
    return inter, union


def iou_matrix(preds: LabelMap, gt: LabelMap) -> np.ndarray:
    """IoU of every prediction id (rows) against every instance id (columns)."""
    inter, union = overlap_table(preds, gt)
    # every id has area >= 1, so union is never zero
    return inter / np.maximum(union, 1)


def split_masks(preds: LabelMap, gt: LabelMap, overlap_threshold: float = 0.0) -> SplitResult:
    """Split the prediction blobs into good / bad type 1 / bad type 2.

    A blob overlaps an instance when their IoU is strictly greater than
    ``overlap_threshold``. The result does not depend on id order: every
    blob of a bin is copied into that bin's mask, and each instance is
    counted at most once per bad type.
    """
    if overlap_threshold < 0:
        raise ValueError("overlap_threshold must be >= 0")
    overlaps = iou_matrix(preds, gt) > overlap_threshold
    per_pred = overlaps.sum(axis=1)
    per_gt = overlaps.sum(axis=0)

    # bin per prediction id (index 0 is background): 0 none, 1 good, 2 bad1, 3 bad2
    category = np.zeros(preds.count + 1, dtype=np.uint8)
    seen1, seen2 = set(), set()
    n_good = 0
    for p in range(preds.count):
        hits = np.flatnonzero(overlaps[p])
        if per_pred[p] >= 2:
            category[p + 1] = 2
            seen1.update(int(g) + 1 for g in hits)
        elif per_pred[p] == 1:
            g = hits[0]
            if per_gt[g] == 1:
                category[p + 1] = 1
                n_good += 1
            else:
                category[p + 1] = 3
                seen2.add(int(g) + 1)

    pixel_category = category[preds.labels]
    return SplitResult(
        n_good=n_good,
        n_bad_type1=len(seen1),
        n_bad_type2=len(seen2),
        good_mask=_frozen((pixel_category == 1).astype(np.uint8)),
        bad1_mask=_frozen((pixel_category == 2).astype(np.uint8)),
        bad2_mask=_frozen((pixel_category == 3).astype(np.uint8)),
        seen_type1=frozenset(seen1),
        seen_type2=frozenset(seen2),
    )
