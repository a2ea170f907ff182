"""
Composite training loss.

Frame terms (classification, mask BCE, mask Dice) and video terms (temporal
query consistency, volume mask loss) are computed on the selected key frames
under one video-level matching. The key frame scorer is supervised separately
by an auxiliary BCE against frame relevance labels.
"""

from dataclasses import dataclass, fields
from typing import Mapping, Optional, Tuple, Union

import numpy as np
import torch
from torch.nn import functional as F

from ..config import LossWeights, RunConfig
from ..core.types import VideoClip
from ..logging import get_logger
from .matching import EPS, MatchResult, hungarian_match, match_cost

__all__ = ["ClipTarget", "LossBreakdown", "SetCriterion", "soft_dice_loss", "binary_cross_entropy",
           "frame_loss", "temporal_similarity_loss", "video_mask_loss", "keyframe_aux_loss",
           "total_loss", "downsample_mask"]

logger = get_logger("losses.criterion")

MASK_STRIDE = 4


def downsample_mask(mask, stride=MASK_STRIDE):
    """
    Nearest-neighbour downsampling of [..., H, W] masks to the stride grid,
    sampling the pixel nearest to each cell center.
    """
    offset = stride // 2
    return mask[..., offset::stride, offset::stride]


@dataclass(frozen=True)
class ClipTarget:
    """
    Ground truth for one (clip, expression) pair.

    masks: [T, G, H/4, W/4] float {0, 1}; classes: G class ids; relevance: [T]
    float {0, 1}; target_ids: object id of each of the G slots.
    """
    masks: torch.Tensor
    classes: Tuple[int, ...]
    relevance: torch.Tensor
    target_ids: Tuple[int, ...]

    @classmethod
    def from_clip(cls, clip: VideoClip, target_ids, dtype=torch.float32):
        target_ids = tuple(sorted(target_ids))
        masks = np.stack([downsample_mask(clip.object_mask(i)) for i in target_ids], axis=1)
        classes = tuple(clip.object_by_id(i).class_id for i in target_ids)
        return cls(masks=torch.as_tensor(masks, dtype=dtype), classes=classes,
                   relevance=torch.as_tensor(clip.relevance(target_ids), dtype=dtype),
                   target_ids=target_ids)

    @property
    def num_targets(self):
        return len(self.classes)


@dataclass
class LossBreakdown:
    cls: torch.Tensor
    mask_bce: torch.Tensor
    mask_dice: torch.Tensor
    temporal: torch.Tensor
    video_mask: torch.Tensor
    keyframe_aux: torch.Tensor
    total: torch.Tensor

    TERMS = ("cls", "mask_bce", "mask_dice", "temporal", "video_mask", "keyframe_aux")

    def as_floats(self):
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    def is_finite(self):
        return all(np.isfinite(v) for v in self.as_floats().values())


# Loss term name -> LossWeights field
_WEIGHT_FIELDS = {"cls": "cls", "mask_bce": "bce", "mask_dice": "dice", "temporal": "temporal",
                  "video_mask": "video", "keyframe_aux": "keyframe"}


def soft_dice_loss(p, y, smooth=1.0, dim=None):
    """
    1 - (2 sum(p y) + smooth) / (sum(p) + sum(y) + smooth), reduced over dim
    (all dimensions when None).
    """
    if dim is None:
        dim = tuple(range(p.ndim))
    inter = (p * y).sum(dim)
    total = p.sum(dim) + y.sum(dim)
    return 1 - (2 * inter + smooth) / (total + smooth)


def binary_cross_entropy(p, y, dim=None):
    """
    Mean BCE of probabilities clamped to [EPS, 1 - EPS].
    """
    p = p.clamp(EPS, 1 - EPS)
    loss = -(y * p.log() + (1 - y) * (1 - p).log())
    return loss.mean() if dim is None else loss.mean(dim)


def _zero(like):
    # Keeps the autograd graph connected when a term has nothing to average
    return like.sum() * 0


def frame_loss(class_logits, masks, target_masks, target_classes, match: MatchResult, smooth=1.0):
    """
    Frame-level terms on T frames.

    Args:
        class_logits (Tensor): [T, N, C+1], background last.
        masks (Tensor): [T, N, h, w] probabilities.
        target_masks (Tensor): [T, G, h, w].
        target_classes (Sequence[int]): G class ids.
        match (MatchResult): Query to object assignment.

    Returns:
        (cls, mask_bce, mask_dice): cross-entropy over all queries, and BCE and
        soft Dice of matched masks averaged over matches and frames.
    """
    num_frames, num_queries, num_labels = class_logits.shape
    labels = torch.as_tensor(match.labels(target_classes, num_labels - 1), dtype=torch.long,
                             device=class_logits.device)
    cls = F.cross_entropy(class_logits.reshape(-1, num_labels), labels.repeat(num_frames))

    if not len(match):
        return cls, _zero(masks), _zero(masks)
    p = masks[:, match.query_indices]  # [T, M, h, w]
    y = target_masks[:, match.target_indices].to(p.dtype)
    mask_bce = binary_cross_entropy(p, y, dim=(-2, -1)).mean()
    mask_dice = soft_dice_loss(p, y, smooth, dim=(-2, -1)).mean()
    return cls, mask_bce, mask_dice


def temporal_similarity_loss(queries, match: MatchResult):
    """
    Mean of 1 - cos(q_i[t], q_i[t+1]) over matched queries i and adjacent
    frame pairs. Pairs involving a zero vector contribute 0.
    """
    if queries.shape[0] < 2 or not len(match):
        return _zero(queries)
    q = queries[:, match.query_indices]  # [T, M, C]
    a, b = q[:-1], q[1:]
    norms = a.norm(dim=-1) * b.norm(dim=-1)
    nonzero = norms > 0
    cos = (a * b).sum(-1) / torch.where(nonzero, norms, torch.ones_like(norms))
    terms = torch.where(nonzero, 1 - cos, torch.zeros_like(cos))
    return terms.mean()


def video_mask_loss(masks, target_masks, match: MatchResult, smooth=1.0):
    """
    BCE plus soft Dice per matched object with the sums pooled over the whole
    [T, h, w] volume, averaged over objects.
    """
    if not len(match):
        return _zero(masks)
    p = masks[:, match.query_indices].transpose(0, 1)  # [M, T, h, w]
    y = target_masks[:, match.target_indices].transpose(0, 1).to(p.dtype)
    volume = (1, 2, 3)
    return (binary_cross_entropy(p, y, dim=volume) + soft_dice_loss(p, y, smooth, dim=volume)).mean()


def keyframe_aux_loss(scores, relevance):
    """
    BCE of frame scores [T] against relevance labels [T].
    """
    return binary_cross_entropy(scores, relevance.to(scores.dtype))


def total_loss(terms: Mapping[str, torch.Tensor], weights: Union[LossWeights, Mapping[str, float]]):
    """
    Weighted sum of the six terms.
    """
    if not isinstance(weights, LossWeights):
        weights = LossWeights(**weights)
    total = 0
    for name in LossBreakdown.TERMS:
        total = total + getattr(weights, _WEIGHT_FIELDS[name]) * terms[name]
    return LossBreakdown(total=torch.as_tensor(total), **{name: terms[name] for name in LossBreakdown.TERMS})


class SetCriterion:
    """
    Computes the loss of one segmenter output against its clip target.

    The frame terms average the inter-frame prediction and the per-frame
    prediction on the selected frames (and, with deep supervision, the
    intermediate decoder predictions). Only the selected frames contribute,
    except for the key frame auxiliary term which sees every frame's score.
    """
    def __init__(self, config: Optional[RunConfig] = None, weights: Optional[LossWeights] = None,
                 smooth: Optional[float] = None):
        config = config or RunConfig()
        self.weights = weights or config.loss_weights
        self.smooth = config.dice_smoothing if smooth is None else smooth

    def match(self, prediction, target_masks, target_classes) -> MatchResult:
        cost = match_cost(prediction.class_logits, prediction.masks, target_masks, target_classes,
                          self.weights.cls, self.weights.bce, self.weights.dice, self.smooth)
        return hungarian_match(cost)

    def __call__(self, output, target: ClipTarget) -> Tuple[LossBreakdown, MatchResult]:
        index = torch.as_tensor(output.indices, dtype=torch.long)
        target_masks = target.masks[index].to(output.keyframe_prediction.masks)
        keyframe = output.keyframe_prediction
        match = self.match(keyframe, target_masks, target.classes)

        predictions = [keyframe, output.frame_prediction.index_frames(index)] + list(output.intermediate)
        per_prediction = [frame_loss(p.class_logits, p.masks, target_masks, target.classes, match,
                                     self.smooth) for p in predictions]
        cls, mask_bce, mask_dice = (torch.stack(list(term)).mean() for term in zip(*per_prediction))

        terms = {
            "cls": cls,
            "mask_bce": mask_bce,
            "mask_dice": mask_dice,
            "temporal": temporal_similarity_loss(output.keyframe_queries, match),
            "video_mask": video_mask_loss(keyframe.masks, target_masks, match, self.smooth),
            "keyframe_aux": keyframe_aux_loss(output.scores, target.relevance),
        }
        breakdown = total_loss(terms, self.weights)
        logger.debug("Loss %s, match %s", {k: round(v, 5) for k, v in breakdown.as_floats().items()},
                     match.pairs)
        return breakdown, match
