"""Overlap and boundary-distance metrics for binary masks (2D arrays)."""
import math
from typing import Tuple

import numpy as np
from scipy.spatial.distance import cdist

from core.errors import ShapeError


def binarize(probability: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    return (probability > threshold).astype(np.uint8)


def _pair(pred: np.ndarray, gt: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    return np.asarray(pred).astype(bool), np.asarray(gt).astype(bool)


def dice(pred: np.ndarray, gt: np.ndarray) -> float:
    """2|P n G| / (|P| + |G|); 1.0 when both are empty"""
    p, g = _pair(pred, gt)
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(p, g).sum()) / total


def _iou(p: np.ndarray, g: np.ndarray) -> float:
    union = int(np.logical_or(p, g).sum())
    if union == 0:
        return 1.0
    return int(np.logical_and(p, g).sum()) / union


def foreground_iou(pred: np.ndarray, gt: np.ndarray) -> float:
    p, g = _pair(pred, gt)
    return _iou(p, g)


def miou(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean IoU over {foreground, background}"""
    p, g = _pair(pred, gt)
    return 0.5 * (_iou(p, g) + _iou(~p, ~g))


def _directed_distances(pred: np.ndarray, gt: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    distances = cdist(np.argwhere(pred), np.argwhere(gt))
    return distances.min(axis=1), distances.min(axis=0)


def image_diagonal(shape: Tuple[int, ...]) -> float:
    return math.hypot(shape[-2], shape[-1])


def hausdorff(pred: np.ndarray, gt: np.ndarray, spacing: float = 1.0) -> Tuple[float, bool]:
    """Exact symmetric Hausdorff distance.

    Returns (distance, sentinel); when either mask is empty the distance is
    the image diagonal and ``sentinel`` is True.
    """
    p, g = _pair(pred, gt)
    if not p.any() or not g.any():
        return image_diagonal(p.shape) * spacing, True
    pred_to_gt, gt_to_pred = _directed_distances(p, g)
    return float(max(pred_to_gt.max(), gt_to_pred.max())) * spacing, False


def hausdorff95(pred: np.ndarray, gt: np.ndarray, spacing: float = 1.0) -> Tuple[float, bool]:
    """95th percentile of the pooled directed distances"""
    p, g = _pair(pred, gt)
    if not p.any() or not g.any():
        return image_diagonal(p.shape) * spacing, True
    pred_to_gt, gt_to_pred = _directed_distances(p, g)
    return float(np.percentile(np.concatenate([pred_to_gt, gt_to_pred]), 95)) * spacing, False
