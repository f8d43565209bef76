"""Training loss for level-set outputs plus mask agreement metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionError, ParameterError
from .fields import Array, BinaryMask, ScalarField, Tsdf, scalar_data
from .tsdf import _heaviside, _heaviside_deriv

# relaxation used when mapping a level set to probabilities for the BCE term
LOSS_EPSILON = 0.1
# probabilities are clamped to [PROB_CLAMP, 1 - PROB_CLAMP] inside the BCE
PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """Weights of the initial and final level-set losses in a combined objective."""

    w_initial: float
    w_final: float

    def __post_init__(self) -> None:
        for name in ("w_initial", "w_final"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value >= 0):
                raise ParameterError(f"{name} must be nonnegative, got {value}")
            object.__setattr__(self, name, value)


def _check_same_shape(a, b, what: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what} shapes differ: {a.shape} vs {b.shape}")


def tsdf_loss(phi: ScalarField | Tsdf, phi_gt: Tsdf, mask_gt: BinaryMask) -> float:
    """Mean absolute error to the target field plus mean binary
    cross-entropy of the soft-thresholded field against the target mask.

    The field maps to (0, 1) through the soft step at epsilon = 0.1; the
    probabilities are clamped to [1e-7, 1 - 1e-7] before the logs. Both
    terms are per-pixel means, so the loss is resolution independent.
    """
    p = scalar_data(phi)
    g = phi_gt.field.data
    m = mask_gt.data
    _check_same_shape(p, g, "phi and target")
    _check_same_shape(p, m, "phi and mask")
    l1 = float(np.abs(p - g).mean())
    prob = np.clip(_heaviside(p, LOSS_EPSILON), PROB_CLAMP, 1.0 - PROB_CLAMP)
    mf = m.astype(np.float64)
    bce = float(-(mf * np.log(prob) + (1.0 - mf) * np.log1p(-prob)).mean())
    return l1 + bce


def tsdf_loss_grad(phi: ScalarField | Tsdf, phi_gt: Tsdf, mask_gt: BinaryMask) -> ScalarField:
    """Pixelwise derivative of `tsdf_loss` in its phi argument.

    The absolute-value term uses the sign subgradient (zero at exact
    ties); clamped probabilities contribute zero, matching the piecewise
    definition of the loss.
    """
    p = scalar_data(phi)
    g = phi_gt.field.data
    m = mask_gt.data
    _check_same_shape(p, g, "phi and target")
    _check_same_shape(p, m, "phi and mask")
    count = p.size
    grad = np.sign(p - g) / count
    raw = _heaviside(p, LOSS_EPSILON)
    prob = np.clip(raw, PROB_CLAMP, 1.0 - PROB_CLAMP)
    mf = m.astype(np.float64)
    dbce = (-(mf / prob) + (1.0 - mf) / (1.0 - prob)) / count
    live = (raw > PROB_CLAMP) & (raw < 1.0 - PROB_CLAMP)
    grad = grad + np.where(live, dbce * _heaviside_deriv(p, LOSS_EPSILON), 0.0)
    return ScalarField(grad)


def combined_loss(
    phi_initial: ScalarField | Tsdf,
    phi_final: ScalarField | Tsdf,
    phi_gt: Tsdf,
    mask_gt: BinaryMask,
    weights: LossWeights,
) -> float:
    """Weighted sum of the loss at the initial and final level sets."""
    return weights.w_initial * tsdf_loss(phi_initial, phi_gt, mask_gt) + weights.w_final * tsdf_loss(
        phi_final, phi_gt, mask_gt
    )


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; two empty masks count as identical (1.0)."""
    _check_same_shape(a.data, b.data, "mask")
    av = a.data.astype(bool)
    bv = b.data.astype(bool)
    union = int(np.logical_or(av, bv).sum())
    if union == 0:
        return 1.0
    return int(np.logical_and(av, bv).sum()) / union


def matched_average_precision(pairs: list[tuple[BinaryMask, BinaryMask]]) -> float:
    """AP over IoU thresholds 0.5:0.95:0.05 for pre-matched mask pairs.

    Each (prediction, ground truth) pair is already one instance; the
    score is the fraction of pairs whose IoU clears each threshold,
    averaged over the ten thresholds. There is no detection matching or
    score ranking here.
    """
    if not pairs:
        raise ParameterError("need at least one mask pair")
    ious = np.array([mask_iou(pred, gt) for pred, gt in pairs])
    thresholds = np.arange(0.5, 0.951, 0.05)
    return float(np.mean([(ious >= t - 1e-12).mean() for t in thresholds]))


def boundary_pixels(mask: BinaryMask) -> Array:
    """(row, col) coordinates of mask pixels with a 4-neighbor of opposite value.

    The grid border is not treated as opposite, so a mask covering the
    whole grid has no boundary pixels.
    """
    m = mask.data.astype(bool)
    diff = np.zeros_like(m)
    across = m[:, :-1] != m[:, 1:]
    diff[:, :-1] |= across
    diff[:, 1:] |= across
    down = m[:-1, :] != m[1:, :]
    diff[:-1, :] |= down
    diff[1:, :] |= down
    return np.argwhere(m & diff)


def boundary_f1(pred: BinaryMask, gt: BinaryMask, tol: float) -> float:
    """Boundary F-measure with a pixel matching tolerance (DAVIS style).

    Precision is the fraction of prediction boundary pixels within
    Euclidean distance tol of some ground-truth boundary pixel; recall is
    symmetric; the score is their harmonic mean. Two empty boundaries
    score 1, exactly one empty scores 0.
    """
    _check_same_shape(pred.data, gt.data, "mask")
    tol = float(tol)
    if not tol > 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    pb = boundary_pixels(pred)
    gb = boundary_pixels(gt)
    if pb.size == 0 and gb.size == 0:
        return 1.0
    if pb.size == 0 or gb.size == 0:
        return 0.0
    # integer coordinates: the closest non-matching distance is well clear
    # of this slop, which only absorbs sqrt rounding
    reach = tol + 1e-9
    dp, _ = cKDTree(gb).query(pb)
    precision = float((dp <= reach).mean())
    dg, _ = cKDTree(pb).query(gb)
    recall = float((dg <= reach).mean())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)
