from .matching import MatchResult, hungarian_match, match_cost
from .criterion import (ClipTarget, LossBreakdown, SetCriterion, soft_dice_loss, binary_cross_entropy,
                        frame_loss, temporal_similarity_loss, video_mask_loss, keyframe_aux_loss,
                        total_loss, downsample_mask)

__all__ = ["MatchResult", "hungarian_match", "match_cost", "ClipTarget", "LossBreakdown", "SetCriterion",
           "soft_dice_loss", "binary_cross_entropy", "frame_loss", "temporal_similarity_loss",
           "video_mask_loss", "keyframe_aux_loss", "total_loss", "downsample_mask"]
