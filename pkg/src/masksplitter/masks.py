"""Raster primitives: binary masks, instance label maps and score maps.

Binary masks and gray images are plain 2-D ``numpy`` arrays (``uint8``);
label maps and score-map pairs are small frozen containers that validate
their invariants once at construction and hold read-only arrays.
"""

from dataclasses import dataclass

import numpy as np

from masksplitter import kernels
from masksplitter.errors import DimensionMismatchError, MaskSplitterError, UnknownInstanceError

MAX_INSTANCES = 65534
DEFAULT_CONNECTIVITY = 8


def _frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def as_binary_mask(data) -> np.ndarray:
    """Validate ``data`` as an H x W grid of 0/1 and return it as read-only ``uint8``."""
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise MaskSplitterError(f"mask must be 2-D, got shape {arr.shape}")
    if arr.dtype == bool:
        arr = arr.astype(np.uint8)
    elif not np.isin(arr, (0, 1)).all():
        raise MaskSplitterError("mask values must be exactly 0 or 1")
    return _frozen(arr.astype(np.uint8, copy=False))


def check_same_shape(*arrays):
    shapes = {tuple(np.shape(a)) for a in arrays}
    if len(shapes) > 1:
        raise DimensionMismatchError(f"shape mismatch: {sorted(shapes)}")


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Instance ids per pixel; 0 is background and 1..count are instances.

    Only id contiguity is validated here. Maps produced by
    :func:`connected_components` are additionally connected per id;
    ground-truth maps read from disk may contain occluded (split) instances.
    """

    labels: np.ndarray
    count: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise MaskSplitterError(f"label map must be 2-D, got shape {labels.shape}")
        if labels.size and labels.min() < 0:
            raise MaskSplitterError("label ids must be non-negative")
        if self.count > MAX_INSTANCES:
            raise MaskSplitterError(f"at most {MAX_INSTANCES} instances are supported")
        present = np.unique(labels)
        present = present[present != 0]
        if len(present) != self.count or (self.count and present[-1] != self.count):
            raise MaskSplitterError(
                f"nonzero ids must be exactly 1..{self.count}, found {present.tolist()[:10]}"
            )
        object.__setattr__(self, "labels", _frozen(labels.astype(np.int32)))
        object.__setattr__(self, "count", int(self.count))

    @classmethod
    def from_array(cls, labels, relabel=False):
        """Build from a raw id grid; ``relabel`` compacts ids in raster order of first pixel."""
        labels = np.asarray(labels)
        if not relabel:
            return cls(labels, int(len(np.setdiff1d(np.unique(labels), [0]))))
        ids, first, inverse = np.unique(labels.ravel(), return_index=True, return_inverse=True)
        nonzero = np.flatnonzero(ids != 0)
        new_ids = np.zeros(len(ids), dtype=np.int32)
        new_ids[nonzero[np.argsort(first[nonzero])]] = np.arange(1, len(nonzero) + 1)
        return cls(new_ids[inverse].reshape(labels.shape), len(nonzero))

    @classmethod
    def empty(cls, height, width):
        return cls(np.zeros((height, width), dtype=np.int32), 0)

    @property
    def shape(self):
        return self.labels.shape

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    def areas(self) -> np.ndarray:
        """Pixel count per id, index 0 is background."""
        return np.bincount(self.labels.ravel(), minlength=self.count + 1)

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return self.count == other.count and np.array_equal(self.labels, other.labels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ScoreMapPair:
    object_scores: np.ndarray
    background_scores: np.ndarray

    def __post_init__(self):
        obj = np.asarray(self.object_scores, dtype=np.float64)
        bg = np.asarray(self.background_scores, dtype=np.float64)
        if obj.ndim != 2:
            raise MaskSplitterError(f"score maps must be 2-D, got shape {obj.shape}")
        check_same_shape(obj, bg)
        if not (np.isfinite(obj).all() and np.isfinite(bg).all()):
            raise MaskSplitterError("score maps must be finite")
        object.__setattr__(self, "object_scores", _frozen(obj))
        object.__setattr__(self, "background_scores", _frozen(bg))

    @property
    def shape(self):
        return self.object_scores.shape

    def stacked(self) -> np.ndarray:
        """Channels-first ``(2, H, W)`` array: object then background."""
        return np.stack([self.object_scores, self.background_scores])


def binarize_scores(scores: ScoreMapPair) -> np.ndarray:
    """Pixelwise argmax of the object/background pair; ties go to background."""
    return _frozen((scores.object_scores > scores.background_scores).astype(np.uint8))


def connected_components(mask, connectivity=DEFAULT_CONNECTIVITY) -> LabelMap:
    mask = as_binary_mask(mask)
    labels, count = kernels.label_components(mask, connectivity)
    return LabelMap(labels, count)


def extract_instance(label_map: LabelMap, instance_id: int) -> np.ndarray:
    if not 1 <= instance_id <= label_map.count:
        raise UnknownInstanceError(
            f"instance id {instance_id} outside 1..{label_map.count}"
        )
    return _frozen((label_map.labels == instance_id).astype(np.uint8))


def mask_union(label_map: LabelMap) -> np.ndarray:
    return _frozen((label_map.labels != 0).astype(np.uint8))
