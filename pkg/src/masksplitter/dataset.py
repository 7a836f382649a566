"""Dataset construction helpers: thresholding, crops, splits, synthetic scenes."""

import math

import numpy as np

from masksplitter.errors import DimensionMismatchError, MaskSplitterError, NoThresholdError, UnknownInstanceError
from masksplitter.masks import LabelMap, ScoreMapPair, connected_components

ISODATA_MAX_ITER = 256


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def as_gray_image(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise MaskSplitterError(f"gray image must be 2-D, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255 or not np.all(arr == np.round(arr))):
            raise MaskSplitterError("gray image values must be integers in 0..255")
        arr = arr.astype(np.uint8)
    return arr


def isodata_threshold(image) -> int:
    """Ridler-Calvard iterative threshold.

    Starts at the rounded global mean and repeats
    ``t <- round((mean(I <= t) + mean(I > t)) / 2)`` until ``t`` is stable.
    ``t`` is kept in ``[min, max - 1]`` so both classes stay nonempty.
    """
    image = as_gray_image(image)
    hist = np.bincount(image.ravel(), minlength=256).astype(np.float64)
    present = np.flatnonzero(hist)
    if present.size < 2:
        raise NoThresholdError("image has a single intensity; no threshold separates it")
    lo, hi = int(present[0]), int(present[-1])
    levels = np.arange(256, dtype=np.float64)
    cum_n = np.cumsum(hist)
    cum_sum = np.cumsum(hist * levels)
    total_n, total_sum = cum_n[-1], cum_sum[-1]

    def clamp(t):
        return min(max(t, lo), hi - 1)

    t = clamp(_round_half_up(total_sum / total_n))
    for _ in range(ISODATA_MAX_ITER):
        below = cum_sum[t] / cum_n[t]
        above = (total_sum - cum_sum[t]) / (total_n - cum_n[t])
        new_t = clamp(_round_half_up((below + above) / 2))
        if new_t == t:
            return t
        t = new_t
    raise RuntimeError(f"ISODATA did not converge in {ISODATA_MAX_ITER} iterations")


def crop_window(center, size, extent) -> int:
    """Start offset of a ``size`` window centred on ``center``, shifted to fit ``extent``."""
    start = center - size // 2
    return min(max(start, 0), extent - size)


def crop_around_instance(frame, gt: LabelMap, instance_id: int, size: int = 250):
    """Crop ``size`` x ``size`` around an instance's centroid.

    Windows that would cross the frame border are translated inward, never
    padded. The label crop keeps every instance visible in the window,
    renumbered 1..k in raster order of first pixel.
    """
    frame = as_gray_image(frame)
    if frame.shape != gt.shape:
        raise DimensionMismatchError(f"frame {frame.shape} vs labels {gt.shape}")
    if not 1 <= instance_id <= gt.count:
        raise UnknownInstanceError(f"instance id {instance_id} outside 1..{gt.count}")
    h, w = frame.shape
    if size < 1 or size > min(h, w):
        raise MaskSplitterError(f"crop size {size} does not fit a {h}x{w} frame")
    ys, xs = np.nonzero(gt.labels == instance_id)
    top = crop_window(_round_half_up(ys.mean()), size, h)
    left = crop_window(_round_half_up(xs.mean()), size, w)
    window = (slice(top, top + size), slice(left, left + size))
    return frame[window].copy(), LabelMap.from_array(gt.labels[window], relabel=True)


def split_train_val(items, val_fraction: float, seed: int):
    """Seeded random partition; both halves keep the input order."""
    items = list(items)
    if not items:
        raise MaskSplitterError("cannot split an empty list")
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must lie in (0, 1)")
    n_val = _round_half_up(val_fraction * len(items))
    picked = np.random.default_rng(seed).permutation(len(items))[:n_val]
    is_val = np.zeros(len(items), dtype=bool)
    is_val[picked] = True
    train = [item for item, v in zip(items, is_val) if not v]
    val = [item for item, v in zip(items, is_val) if v]
    return train, val


def _ellipse(shape, cy, cx, ry, rx, angle):
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    dy, dx = yy - cy, xx - cx
    c, s = math.cos(angle), math.sin(angle)
    u = (dx * c + dy * s) / rx
    v = (-dx * s + dy * c) / ry
    return u * u + v * v <= 1.0


def _dilate8(mask):
    padded = np.pad(mask, 1)
    h, w = mask.shape
    out = np.zeros_like(mask)
    for dy in range(3):
        for dx in range(3):
            out |= padded[dy:dy + h, dx:dx + w]
    return out


def synth_scene(width: int, height: int, n_instances: int, occlusion_level: float, seed: int,
                noise: float = 0.35, max_attempts: int = 2000):
    """Random filled ellipses plus a noisy object/background score pair.

    Each instance is allowed to overlap earlier ones with probability
    ``occlusion_level``; it is then placed near an existing instance and
    owns the shared pixels. Otherwise it is rejection-sampled to keep at
    least one background pixel between it and everything drawn so far, so
    with ``occlusion_level == 0`` the instances are separate 8-connected
    blobs. Ids are renumbered in raster order of first pixel. Scores are
    float32-representable so they survive a PFM round trip bit for bit.
    """
    if n_instances < 0:
        raise ValueError("n_instances must be >= 0")
    if not 0 <= occlusion_level <= 1:
        raise ValueError("occlusion_level must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    shape = (height, width)
    labels = np.zeros(shape, dtype=np.int32)
    r_hi, r_lo = max(min(shape) / 4, 1.0), max(min(shape) / 8, 1.0)

    for inst in range(1, n_instances + 1):
        may_overlap = inst > 1 and rng.random() < occlusion_level
        for attempt in range(max_attempts):
            shrink = 0.9 ** (attempt // 25)
            ry = max(rng.uniform(r_lo, r_hi) * shrink, 1.0)
            rx = max(rng.uniform(r_lo, r_hi) * shrink, 1.0)
            angle = rng.uniform(0, math.pi)
            if may_overlap:
                anchor = rng.choice(np.flatnonzero(labels))
                cy = anchor // width + rng.uniform(-ry, ry)
                cx = anchor % width + rng.uniform(-rx, rx)
            else:
                cy, cx = rng.uniform(0, height - 1), rng.uniform(0, width - 1)
            shape_mask = _ellipse(shape, cy, cx, ry, rx, angle)
            if connected_components(shape_mask).count != 1:
                continue
            if may_overlap:
                remaining = np.bincount(labels[~shape_mask], minlength=inst)[1:inst]
                if (remaining == 0).any():
                    continue
            elif (_dilate8(shape_mask) & (labels > 0)).any():
                continue
            labels[shape_mask] = inst
            break
        else:
            raise MaskSplitterError(
                f"could not place instance {inst} of {n_instances} in a {height}x{width} scene"
            )

    fg = labels > 0
    base = np.where(fg, 1.0, -1.0)
    obj = (base + noise * rng.standard_normal(shape)).astype(np.float32).astype(np.float64)
    bg = (-base + noise * rng.standard_normal(shape)).astype(np.float32).astype(np.float64)
    return ScoreMapPair(obj, bg), LabelMap.from_array(labels, relabel=True)


def render_frame(gt: LabelMap, seed: int, noise: float = 12.0) -> np.ndarray:
    """8-bit gray frame for a label map: bright instances on a dark floor."""
    rng = np.random.default_rng(seed)
    shade = np.concatenate([[50.0], 150.0 + 60.0 * rng.random(gt.count)])
    frame = shade[gt.labels] + noise * rng.standard_normal(gt.shape)
    return np.clip(np.round(frame), 0, 255).astype(np.uint8)
