"""
Frame-level segmentation measures: region similarity (IoU, J), Dice and
boundary F-measure.

Empty-mask convention: when both masks (or both boundaries) are empty a
measure is 1.0, when exactly one is empty it is 0.0.
"""

import numpy as np
from scipy import ndimage

__all__ = ["iou", "dice", "boundary_mask", "boundary_f", "default_tolerance", "frame_measures",
           "METRIC_NAMES"]

METRIC_NAMES = ("J", "F", "J&F", "Dice", "IoU")

# 4-connected neighbourhood
_CROSS = ndimage.generate_binary_structure(2, 1)


def _as_pair(pred, gt):
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"Mask shapes differ: prediction {pred.shape}, ground truth {gt.shape}.")
    return pred, gt


def iou(pred, gt):
    pred, gt = _as_pair(pred, gt)
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


def dice(pred, gt):
    pred, gt = _as_pair(pred, gt)
    total = np.count_nonzero(pred) + np.count_nonzero(gt)
    if total == 0:
        return 1.0
    return 2 * np.count_nonzero(pred & gt) / total


def boundary_mask(mask):
    """
    One pixel wide boundary: mask pixels with a 4-neighbour that is background
    or outside the grid.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return mask.copy()
    return mask & ~ndimage.binary_erosion(mask, structure=_CROSS, border_value=0)


def _within(boundary, tolerance):
    # Chebyshev distance
    if tolerance == 0:
        return boundary
    square = np.ones((2 * tolerance + 1, 2 * tolerance + 1), dtype=bool)
    return ndimage.binary_dilation(boundary, structure=square)


def boundary_f(pred, gt, tolerance=1):
    """
    Boundary F-measure with a Chebyshev pixel tolerance.

    Args:
        pred, gt: Boolean [H, W] masks.
        tolerance (int): Maximum distance at which boundary pixels match.
    """
    if tolerance < 0:
        raise ValueError(f"Boundary tolerance must be non-negative, got {tolerance}.")
    tolerance = int(tolerance)
    pred, gt = _as_pair(pred, gt)
    pred_b = boundary_mask(pred)
    gt_b = boundary_mask(gt)
    n_pred = np.count_nonzero(pred_b)
    n_gt = np.count_nonzero(gt_b)
    if n_pred == 0 and n_gt == 0:
        return 1.0
    if n_pred == 0 or n_gt == 0:
        return 0.0

    precision = np.count_nonzero(pred_b & _within(gt_b, tolerance)) / n_pred
    recall = np.count_nonzero(gt_b & _within(pred_b, tolerance)) / n_gt
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def default_tolerance(shape):
    """
    max(1, round(0.008 * image diagonal)) for an (H, W) frame.
    """
    height, width = shape[-2:]
    return max(1, int(round(0.008 * np.hypot(height, width))))


def frame_measures(pred, gt, tolerance=None):
    """
    Per-frame IoU, Dice and boundary F of two [T, H, W] mask stacks.

    Returns:
        dict of name -> float array [T] for "IoU", "Dice" and "F".
    """
    pred, gt = _as_pair(pred, gt)
    if pred.ndim != 3:
        raise ValueError(f"Expected [T, H, W] masks, got shape {pred.shape}.")
    if tolerance is None:
        tolerance = default_tolerance(pred.shape)
    return {
        "IoU": np.array([iou(p, g) for p, g in zip(pred, gt)]),
        "Dice": np.array([dice(p, g) for p, g in zip(pred, gt)]),
        "F": np.array([boundary_f(p, g, tolerance) for p, g in zip(pred, gt)]),
    }
