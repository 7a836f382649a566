"""Trainable count head on top of a two-channel score map.

Architecture, per image of fixed size H x W::

    scores (2,H,W) --3x3 conv--> unified (H,W)
    unified --3x3 conv (x3)--> type maps: good, bad1, bad2
    type map k * split mask k --> gated map k (sparse, constant mask)
    gated map k --fully connected--> count unit k

Loss is the unweighted sum of a per-pixel-mean sigmoid cross-entropy of
the good type map against the ground-truth union, and three half squared
errors between the count units and their targets. Everything runs in
float64 with hand-written gradients.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from masksplitter import kernels
from masksplitter.errors import DimensionMismatchError, MaskSplitterError
from masksplitter.masks import LabelMap, ScoreMapPair, mask_union
from masksplitter.splitter import SplitResult

GOOD, BAD1, BAD2 = 0, 1, 2
BAD_TARGET_MODES = ("counts", "zero")


def head_param_count(height: int, width: int) -> int:
    if height < 1 or width < 1:
        raise ValueError("height and width must be >= 1")
    return 19 + 30 + 3 * (height * width + 1)


@dataclass(frozen=True, eq=False)
class HeadParams:
    unified_kernel: np.ndarray  # (2, 3, 3): object channel, background channel
    unified_bias: float
    type_kernels: np.ndarray  # (3, 3, 3): good, bad1, bad2
    type_biases: np.ndarray  # (3,)
    fc_weights: np.ndarray  # (3, H*W), row-major pixel order
    fc_biases: np.ndarray  # (3,)
    height: int
    width: int

    def __post_init__(self):
        expected = {
            "unified_kernel": (2, 3, 3),
            "type_kernels": (3, 3, 3),
            "type_biases": (3,),
            "fc_weights": (3, self.height * self.width),
            "fc_biases": (3,),
        }
        for name, shape in expected.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise DimensionMismatchError(f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "unified_bias", float(self.unified_bias))

    _ARRAYS = ("unified_kernel", "unified_bias", "type_kernels", "type_biases", "fc_weights", "fc_biases")

    @classmethod
    def zeros(cls, height, width):
        return cls.from_vector(np.zeros(head_param_count(height, width)), height, width)

    @classmethod
    def random(cls, height, width, seed=0, scale=0.1, fc_scale=None):
        """Gaussian init; ``fc_scale`` defaults to ``scale``."""
        rng = np.random.default_rng(seed)
        params = cls.from_vector(rng.normal(0.0, scale, head_param_count(height, width)), height, width)
        if fc_scale is not None:
            fc = rng.normal(0.0, fc_scale, params.fc_weights.shape)
            params = replace(params, fc_weights=fc)
        return params

    @property
    def size(self):
        return head_param_count(self.height, self.width)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([np.ravel(getattr(self, name)) for name in self._ARRAYS])

    @classmethod
    def from_vector(cls, vec, height, width):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (head_param_count(height, width),):
            raise DimensionMismatchError(
                f"vector of length {vec.size} does not fit a {height}x{width} head"
            )
        n = height * width
        sizes = [18, 1, 27, 3, 3 * n, 3]
        parts = np.split(vec, np.cumsum(sizes)[:-1])
        return cls(
            unified_kernel=parts[0].reshape(2, 3, 3),
            unified_bias=parts[1][0],
            type_kernels=parts[2].reshape(3, 3, 3),
            type_biases=parts[3].copy(),
            fc_weights=parts[4].reshape(3, n),
            fc_biases=parts[5].copy(),
            height=height,
            width=width,
        )


@dataclass(frozen=True, eq=False)
class ForwardCache:
    unified_map: np.ndarray
    type_maps: np.ndarray  # (3, H, W)
    gated_maps: np.ndarray  # (3, H, W)
    unit_outputs: np.ndarray  # (3,)
    good_sigmoid: np.ndarray


@dataclass(frozen=True)
class LossBreakdown:
    l_gs: float
    l_good: float
    l_badcows: float
    l_badpreds: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.l_gs + self.l_good + self.l_badcows + self.l_badpreds)

    def as_row(self):
        return [self.l_gs, self.l_good, self.l_badcows, self.l_badpreds, self.total]


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def conv3x3(inputs, kernel, bias) -> np.ndarray:
    """Stride-1, zero-padded 3x3 cross-correlation over ``(C, H, W)`` input."""
    inputs = np.asarray(inputs, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if inputs.ndim == 2:
        inputs = inputs[None]
    if kernel.ndim == 2:
        kernel = kernel[None]
    if inputs.shape[0] not in (1, 2) or kernel.shape != (inputs.shape[0], 3, 3):
        raise DimensionMismatchError(
            f"kernel {kernel.shape} does not match input {inputs.shape}"
        )
    return kernels.conv3x3(inputs, kernel, bias)


def gate(score_map, split_mask) -> np.ndarray:
    score_map = np.asarray(score_map, dtype=np.float64)
    if score_map.shape != np.shape(split_mask):
        raise DimensionMismatchError(f"{score_map.shape} vs {np.shape(split_mask)}")
    return score_map * split_mask


def fc_unit(score_map, weights, bias) -> float:
    flat = np.asarray(score_map, dtype=np.float64).ravel()
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != flat.shape:
        raise DimensionMismatchError(f"{weights.size} weights for {flat.size} inputs")
    return float(flat @ weights + bias)


def head_forward(scores: ScoreMapPair, split: SplitResult, params: HeadParams) -> ForwardCache:
    if scores.shape != (params.height, params.width) or split.good_mask.shape != scores.shape:
        raise DimensionMismatchError(
            f"head is {params.height}x{params.width}, got scores {scores.shape} "
            f"and masks {split.good_mask.shape}"
        )
    unified = kernels.conv3x3(scores.stacked(), params.unified_kernel, params.unified_bias)
    type_maps = np.stack(
        [
            kernels.conv3x3(unified[None], params.type_kernels[k][None], params.type_biases[k])
            for k in range(3)
        ]
    )
    gated = type_maps * np.stack(split.masks)
    units = np.einsum("kn,kn->k", gated.reshape(3, -1), params.fc_weights) + params.fc_biases
    return ForwardCache(unified, type_maps, gated, units, sigmoid(type_maps[GOOD]))


def sigmoid_ce_loss(good_map, full_gt) -> float:
    """Per-pixel mean binary cross-entropy on logits, in the overflow-free form."""
    s = np.asarray(good_map, dtype=np.float64)
    t = np.asarray(full_gt, dtype=np.float64)
    if s.shape != t.shape:
        raise DimensionMismatchError(f"{s.shape} vs {t.shape}")
    if not np.isfinite(s).all():
        raise MaskSplitterError("score map contains non-finite values")
    return float(np.mean(np.maximum(s, 0.0) - s * t + np.log1p(np.exp(-np.abs(s)))))


def euclid_loss(predicted: float, target: float) -> float:
    return float(0.5 * (predicted - target) ** 2)


def count_targets(gt: LabelMap, split: SplitResult, bad_targets="counts") -> np.ndarray:
    """Targets of the good, bad-type-1 and bad-type-2 units.

    The good unit always targets the number of ground-truth instances.
    With ``bad_targets="zero"`` the bad units are pushed to zero instead
    of to the splitter's counts.
    """
    if bad_targets == "counts":
        return np.array([gt.count, split.n_bad_type1, split.n_bad_type2], dtype=np.float64)
    if bad_targets == "zero":
        return np.array([gt.count, 0, 0], dtype=np.float64)
    raise ValueError(f"bad_targets must be one of {BAD_TARGET_MODES}")


def total_loss(cache: ForwardCache, gt: LabelMap, split: SplitResult, bad_targets="counts") -> LossBreakdown:
    if gt.shape != cache.unified_map.shape:
        raise DimensionMismatchError(f"{gt.shape} vs {cache.unified_map.shape}")
    targets = count_targets(gt, split, bad_targets)
    u = cache.unit_outputs
    return LossBreakdown(
        l_gs=sigmoid_ce_loss(cache.type_maps[GOOD], mask_union(gt)),
        l_good=euclid_loss(u[GOOD], targets[GOOD]),
        l_badcows=euclid_loss(u[BAD1], targets[BAD1]),
        l_badpreds=euclid_loss(u[BAD2], targets[BAD2]),
    )


def head_backward(cache: ForwardCache, scores: ScoreMapPair, gt: LabelMap, split: SplitResult,
                  params: HeadParams, bad_targets="counts") -> HeadParams:
    """Exact gradient of the total loss, returned in ``HeadParams`` layout."""
    shape = (params.height, params.width)
    if cache.unified_map.shape != shape or gt.shape != shape or scores.shape != shape:
        raise DimensionMismatchError("cache, inputs and params disagree on image size")
    d_units = cache.unit_outputs - count_targets(gt, split, bad_targets)
    d_fc_w = d_units[:, None] * cache.gated_maps.reshape(3, -1)

    masks = np.stack(split.masks).astype(np.float64)
    d_type = d_units[:, None, None] * params.fc_weights.reshape(3, *shape) * masks
    d_type[GOOD] += (cache.good_sigmoid - mask_union(gt)) / cache.good_sigmoid.size

    d_type_k = np.empty((3, 3, 3))
    d_type_b = np.empty(3)
    d_unified = np.zeros(shape)
    for k in range(3):
        dk, db, dx = kernels.conv3x3_backward(cache.unified_map[None], params.type_kernels[k][None], d_type[k])
        d_type_k[k] = dk[0]
        d_type_b[k] = db
        d_unified += dx[0]

    d_uk, d_ub, _ = kernels.conv3x3_backward(scores.stacked(), params.unified_kernel, d_unified)
    return HeadParams(
        unified_kernel=d_uk,
        unified_bias=d_ub,
        type_kernels=d_type_k,
        type_biases=d_type_b,
        fc_weights=d_fc_w,
        fc_biases=d_units.copy(),
        height=params.height,
        width=params.width,
    )


def loss_and_grad(scores, gt, split, params, bad_targets="counts"):
    cache = head_forward(scores, split, params)
    loss = total_loss(cache, gt, split, bad_targets)
    return loss, head_backward(cache, scores, gt, split, params, bad_targets)


def numerical_gradient(scores, gt, split, params, step=1e-4, bad_targets="counts") -> np.ndarray:
    """Central finite differences of the total loss, as a flat vector."""
    vec = params.to_vector()
    grad = np.empty_like(vec)
    h, w = params.height, params.width

    def loss_at(v):
        p = HeadParams.from_vector(v, h, w)
        return total_loss(head_forward(scores, split, p), gt, split, bad_targets).total

    for i in range(vec.size):
        orig = vec[i]
        vec[i] = orig + step
        plus = loss_at(vec)
        vec[i] = orig - step
        minus = loss_at(vec)
        vec[i] = orig
        grad[i] = (plus - minus) / (2 * step)
    return grad


def relative_error(analytic, numeric, floor=1e-8) -> float:
    """Max over entries of ``|a - n| / max(|a|, |n|, floor)``."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def gradient_check(scores, gt, split, params, step=1e-4, bad_targets="counts") -> float:
    _, grads = loss_and_grad(scores, gt, split, params, bad_targets)
    numeric = numerical_gradient(scores, gt, split, params, step, bad_targets)
    return relative_error(grads.to_vector(), numeric)


@dataclass(frozen=True, eq=False)
class AdamState:
    first_moments: np.ndarray
    second_moments: np.ndarray
    step: int = 0
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: HeadParams, learning_rate=1e-5, **kwargs):
        n = params.size
        return cls(np.zeros(n), np.zeros(n), learning_rate=learning_rate, **kwargs)


def adam_step(params: HeadParams, grads: HeadParams, state: AdamState):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    g = grads.to_vector()
    theta = params.to_vector()
    if g.shape != theta.shape or state.first_moments.shape != theta.shape:
        raise DimensionMismatchError("parameter, gradient and optimizer state sizes differ")
    t = state.step + 1
    m = state.beta1 * state.first_moments + (1 - state.beta1) * g
    v = state.beta2 * state.second_moments + (1 - state.beta2) * g * g
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    theta = theta - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = replace(state, first_moments=m, second_moments=v, step=t)
    return HeadParams.from_vector(theta, params.height, params.width), new_state


def train_head(scores, gt, split, params, iters, learning_rate=1e-3, bad_targets="counts"):
    """Run ``iters`` Adam steps on one example.

    Returns the final parameters and ``iters + 1`` loss records: the loss
    before each update, then the loss after the last one.
    """
    state = AdamState.for_params(params, learning_rate=learning_rate)
    history = []
    for _ in range(iters):
        loss, grads = loss_and_grad(scores, gt, split, params, bad_targets)
        history.append(loss)
        params, state = adam_step(params, grads, state)
    history.append(total_loss(head_forward(scores, split, params), gt, split, bad_targets))
    return params, history


def predict_good_mask(scores: ScoreMapPair, params: HeadParams) -> np.ndarray:
    """Inference output: pixels where the good-type logit is positive."""
    unified = kernels.conv3x3(scores.stacked(), params.unified_kernel, params.unified_bias)
    good = kernels.conv3x3(unified[None], params.type_kernels[GOOD][None], params.type_biases[GOOD])
    return (good > 0).astype(np.uint8)
