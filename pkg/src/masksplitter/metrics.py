"""Mask average precision at IoU thresholds (AP@0.5, AP@0.7, AP@0.5:0.95).

Detections are matched greedily per image in descending score order, then
pooled across images and summarized with 101-point interpolated AP.

Score-free predictions (a binary good mask has no confidences) get a
default score equal to their area divided by the image area, so larger
blobs rank first. Ties are broken by larger area, then image order, then
raster position of the blob's first pixel, which makes every result
deterministic.

IoU-vs-threshold and recall-vs-grid comparisons are done in exact integer
arithmetic, so a threshold such as 0.7 is never missed by a rounding error.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from masksplitter.errors import MaskSplitterError
from masksplitter.masks import LabelMap, as_binary_mask, check_same_shape, connected_components

SWEEP_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
RECALL_POINTS = 101


@dataclass(frozen=True, eq=False)
class Detection:
    mask: np.ndarray
    score: float | None = None

    def __post_init__(self):
        mask = as_binary_mask(self.mask)
        if not mask.any():
            raise MaskSplitterError("detection mask is empty")
        object.__setattr__(self, "mask", mask)

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def first_pixel(self) -> int:
        return int(np.flatnonzero(self.mask)[0])

    @property
    def effective_score(self) -> float:
        if self.score is not None:
            return float(self.score)
        return self.area / self.mask.size


def detections_from_labels(label_map: LabelMap, scores=None) -> list[Detection]:
    """One detection per instance id; ``scores[i]`` belongs to id ``i + 1``."""
    if scores is not None and len(scores) != label_map.count:
        raise MaskSplitterError(f"{len(scores)} scores for {label_map.count} detections")
    return [
        Detection((label_map.labels == i).astype(np.uint8), None if scores is None else scores[i - 1])
        for i in range(1, label_map.count + 1)
    ]


def detections_from_mask(mask, connectivity=8, scores=None) -> list[Detection]:
    """Each connected blob of a binary prediction becomes one detection."""
    return detections_from_labels(connected_components(mask, connectivity), scores)


def _sort_key(det: Detection, image_index=0):
    return (-det.effective_score, -det.area, image_index, det.first_pixel)


def _threshold_fraction(threshold) -> Fraction:
    return Fraction(str(threshold)) if isinstance(threshold, float) else Fraction(threshold)


@dataclass(frozen=True, eq=False)
class MatchResult:
    detections: list  # sorted by score
    is_tp: list  # flag per sorted detection
    matched_ids: list  # gt id or 0 per sorted detection
    n_fn: int


def match_detections(dets, gt: LabelMap, iou_threshold: float) -> MatchResult:
    """Greedily match detections to ground-truth instances at one threshold.

    Each detection, best score first, takes the unmatched instance of
    highest IoU provided that IoU is at least ``iou_threshold``.
    """
    thr = _threshold_fraction(iou_threshold)
    ordered = sorted(dets, key=_sort_key)
    gt_area = gt.areas()
    taken = np.zeros(gt.count + 1, dtype=bool)
    flags, matched = [], []
    for det in ordered:
        check_same_shape(det.mask, gt.labels)
        inter = np.bincount(gt.labels[det.mask.astype(bool)], minlength=gt.count + 1)
        union = det.area + gt_area - inter
        best, best_iou = 0, None
        for g in range(1, gt.count + 1):
            if taken[g] or inter[g] == 0:
                continue
            value = Fraction(int(inter[g]), int(union[g]))
            if value >= thr and (best_iou is None or value > best_iou):
                best, best_iou = g, value
        if best:
            taken[best] = True
        flags.append(bool(best))
        matched.append(best)
    return MatchResult(ordered, flags, matched, int(gt.count - taken[1:].sum()))


def average_precision(flags, n_gt: int) -> float:
    """101-point interpolated AP of a ranked TP/FP sequence.

    At every recall level r in {0, 0.01, ..., 1} take the best precision
    reached at recall >= r (0 if never reached) and average.
    """
    flags = np.asarray(flags, dtype=bool)
    if n_gt == 0:
        return 1.0 if flags.size == 0 else 0.0
    if flags.size == 0:
        return 0.0
    tp = np.cumsum(flags)
    precision = tp / np.arange(1, flags.size + 1)
    # envelope: best precision from each rank onwards
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    # first rank with recall >= i/100, i.e. 100 * tp >= i * n_gt (tp is non-decreasing)
    grid = np.arange(RECALL_POINTS, dtype=np.int64) * n_gt
    first = np.searchsorted(100 * tp.astype(np.int64), grid, side="left")
    reached = first < flags.size
    return float(envelope[first[reached]].sum() / RECALL_POINTS)


@dataclass(frozen=True)
class APReport:
    ap: dict  # threshold -> AP
    mean: float  # AP@0.5:0.95

    @property
    def ap50(self):
        return self.ap[0.5]

    @property
    def ap70(self):
        return self.ap[0.7]

    @property
    def ap50_95(self):
        return self.mean


def pooled_flags(dets_per_image, gts_per_image, iou_threshold):
    """Match per image, then rank all detections globally. Returns ``(flags, n_gt)``."""
    if len(dets_per_image) != len(gts_per_image):
        raise MaskSplitterError("detections and ground truth cover different numbers of images")
    ranked = []
    n_gt = 0
    for index, (dets, gt) in enumerate(zip(dets_per_image, gts_per_image)):
        result = match_detections(dets, gt, iou_threshold)
        n_gt += gt.count
        ranked.extend((_sort_key(d, index), tp) for d, tp in zip(result.detections, result.is_tp))
    ranked.sort(key=lambda item: item[0])
    return [tp for _, tp in ranked], n_gt


def ap_at(dets_per_image, gts_per_image, iou_threshold) -> float:
    return average_precision(*pooled_flags(dets_per_image, gts_per_image, iou_threshold))


def ap_sweep(dets_per_image, gts_per_image, extra_thresholds=(0.7,)) -> APReport:
    """AP at 0.50:0.05:0.95 plus any extra thresholds; ``mean`` is over the sweep only."""
    thresholds = sorted(set(SWEEP_THRESHOLDS) | {round(float(t), 4) for t in extra_thresholds})
    ap = {t: ap_at(dets_per_image, gts_per_image, t) for t in thresholds}
    mean = float(np.mean([ap[t] for t in SWEEP_THRESHOLDS]))
    return APReport(ap, mean)
