"""Boundary ground truth and the weighted multi-task BCE objective.

    L_total = L_mask + lambda_b * L_boundary
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from core import ops
from core.errors import MaskValidationError, ShapeError, UsageError
from core.ops import FeatureMap
from models.config import LossWeights
from network.mbgd import DualPrediction


def validate_binary(mask: np.ndarray, name: str = "mask") -> np.ndarray:
    if not np.isin(mask, (0, 1)).all():
        raise MaskValidationError(f"{name} must contain only 0 and 1")
    return mask


def boundary_from_mask(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """dilate(m) AND NOT erode(m) with a (2r+1)-square element.

    Dilation pads with 0 and erosion with 1, so the image frame itself is
    never labelled boundary. Works on (H, W) or (B, 1, H, W) masks.
    """
    validate_binary(mask)
    element = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    binary = mask.astype(bool)
    if binary.ndim == 2:
        dilated = ndimage.binary_dilation(binary, structure=element, border_value=0)
        eroded = ndimage.binary_erosion(binary, structure=element, border_value=1)
        return (dilated & ~eroded).astype(mask.dtype)
    out = np.zeros_like(mask)
    for b in range(mask.shape[0]):
        for c in range(mask.shape[1]):
            out[b, c] = boundary_from_mask(mask[b, c], radius)
    return out


def bce_with_logits(logits: FeatureMap, target: np.ndarray) -> float:
    """Mean binary cross-entropy in the stable form max(z,0) - z*t + log(1 + e^-|z|)"""
    if logits.shape != target.shape:
        raise ShapeError(f"logits {logits.shape} and target {target.shape} differ")
    per_pixel = np.maximum(logits, 0.0) - logits * target + np.log1p(np.exp(-np.abs(logits)))
    return float(per_pixel.mean())


def bce_with_logits_backward(logits: FeatureMap, target: np.ndarray) -> FeatureMap:
    return (ops.sigmoid(logits) - target) / logits.size


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    mask: float
    boundary: float


def total_loss(
    prediction: DualPrediction,
    mask_gt: np.ndarray,
    weights: LossWeights = LossWeights()
) -> Tuple[float, LossBreakdown]:
    validate_binary(mask_gt, "mask_gt")
    mask_term = bce_with_logits(prediction.mask_logits, mask_gt)
    boundary_term = 0.0
    if prediction.boundary_logits is not None:
        boundary_gt = boundary_from_mask(mask_gt, weights.boundary_radius)
        boundary_term = bce_with_logits(prediction.boundary_logits, boundary_gt)
    total = mask_term + weights.boundary * boundary_term
    return total, LossBreakdown(total=total, mask=mask_term, boundary=boundary_term)


class MultiTaskLoss:
    """Stateful wrapper pairing total_loss with its gradient"""

    def __init__(self, weights: LossWeights = LossWeights()):
        self.weights = weights
        self._cache = None

    def forward(self, prediction: DualPrediction, mask_gt: np.ndarray) -> LossBreakdown:
        _, breakdown = total_loss(prediction, mask_gt, self.weights)
        self._cache = (prediction, mask_gt)
        return breakdown

    def backward(self) -> Tuple[FeatureMap, Optional[FeatureMap]]:
        """Returns (grad wrt mask logits, grad wrt boundary logits or None)"""
        if self._cache is None:
            raise UsageError("loss backward called without a recorded forward")
        prediction, mask_gt = self._cache
        self._cache = None
        grad_mask = bce_with_logits_backward(prediction.mask_logits, mask_gt)
        grad_boundary = None
        if prediction.boundary_logits is not None:
            boundary_gt = boundary_from_mask(mask_gt, self.weights.boundary_radius)
            grad_boundary = self.weights.boundary * bce_with_logits_backward(prediction.boundary_logits, boundary_gt)
        return grad_mask, grad_boundary
