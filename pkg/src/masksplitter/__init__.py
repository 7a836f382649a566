"""Blob-level refinement tools for FCN-style instance segmentation.

Binarized score maps are cut into prediction blobs, blobs are sorted
into good / merged / fragmented bins against ground truth, a small count
head is trained on those bins, and mask AP is evaluated at IoU 0.5-0.95.
"""

from masksplitter.errors import (
    DimensionMismatchError,
    MaskSplitterError,
    NoThresholdError,
    PGMFormatError,
    UnknownInstanceError,
)
from masksplitter.kernels import BACKEND
from masksplitter.masks import (
    LabelMap,
    ScoreMapPair,
    as_binary_mask,
    binarize_scores,
    connected_components,
    extract_instance,
    mask_union,
)
from masksplitter.splitter import SplitResult, iou, iou_matrix, split_masks

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DimensionMismatchError",
    "LabelMap",
    "MaskSplitterError",
    "NoThresholdError",
    "PGMFormatError",
    "ScoreMapPair",
    "SplitResult",
    "UnknownInstanceError",
    "as_binary_mask",
    "binarize_scores",
    "connected_components",
    "extract_instance",
    "iou",
    "iou_matrix",
    "mask_union",
    "split_masks",
]
