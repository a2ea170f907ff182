"""
The full referring segmenter: backbone, language query decoder, key-frame
selection, inter-frame attention, and the decoder heads re-applied to the
temporally mixed key frame queries.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import torch
from torch import nn

from ..config import RunConfig
from ..core.seeding import rng_for
from ..logging import get_logger
from .backbone import ToyBackbone, mask_grid_size, pad_frames, padded_size
from .decoder import LanguageQueryDecoder, QuerySet, FramePrediction
from .interframe import InterFrameAttention
from .keyframes import (SelectionStrategy, FrameScorer, aggregate_frames, select_top_frames,
                        baseline_select)
from .text_encoder import ToyTextEncoder, TextEmbedding

__all__ = ["ReferringSegmenter", "SegmenterOutput", "component_seed", "query_masks",
           "binarize_output"]

logger = get_logger("model.segmenter")


def component_seed(seed, name):
    """
    Initialisation seed of one named sub-module, derived from the run seed.
    """
    return int(rng_for(seed, "init", name).integers(0, 2**31 - 1))


@dataclass
class SegmenterOutput:
    """
    Everything a forward pass produces.

    frame_prediction covers all T frames and comes from the per-frame decoder
    queries. keyframe_prediction covers only the selected frames (in the order
    of indices) and comes from the inter-frame attended queries.
    """
    queries: QuerySet
    frame_prediction: FramePrediction
    frame_embeddings: torch.Tensor
    scores: torch.Tensor
    indices: List[int]
    keyframe_queries: torch.Tensor
    keyframe_prediction: FramePrediction
    mask_features: torch.Tensor
    intermediate: List[FramePrediction] = field(default_factory=list)
    frame_size: Optional[Tuple[int, int]] = None

    @property
    def num_frames(self):
        return self.frame_prediction.masks.shape[0]


class ReferringSegmenter(nn.Module):
    """
    Args:
        config (RunConfig): Model sizes, threshold and seed are read from it.
    """
    def __init__(self, config: RunConfig):
        super().__init__()
        self.config = config
        seed = config.seed
        self.backbone = ToyBackbone(config.backbone_channels, config.mask_dim,
                                    seed=component_seed(seed, "backbone"))
        self.decoder = LanguageQueryDecoder(
            num_queries=config.num_queries, query_dim=config.query_dim, text_dim=config.text_dim,
            mask_dim=config.mask_dim, num_layers=config.decoder_layers, num_heads=config.num_heads,
            num_classes=config.num_classes, level_channels=config.backbone_channels,
            masked_attention=config.masked_attention, threshold=config.threshold,
            seed=component_seed(seed, "decoder"))
        self.scorer = FrameScorer(config.query_dim, config.scorer_hidden,
                                  seed=component_seed(seed, "scorer"))
        self.interframe = InterFrameAttention(
            config.query_dim, config.num_heads, depth=config.interframe_depth,
            temporal_embedding=config.interframe_temporal_embedding,
            max_frames=config.max_frames, seed=component_seed(seed, "interframe"))
        self.text_encoder = ToyTextEncoder(config.text_dim, seed)

    def encode(self, expression) -> TextEmbedding:
        return self.text_encoder(expression)

    def _as_frames(self, frames):
        dtype = self.decoder.query_bias.dtype
        device = self.decoder.query_bias.device
        if isinstance(frames, np.ndarray):
            return torch.tensor(np.asarray(frames), dtype=dtype, device=device)
        return frames.to(dtype=dtype, device=device)

    def select(self, strategy, frame_embeddings, scores, text, keyframe_count):
        num_frames = frame_embeddings.shape[0]
        strategy = SelectionStrategy(strategy)
        if strategy == SelectionStrategy.OURS:
            return select_top_frames(scores.detach(), keyframe_count)
        text_query = None
        if strategy == SelectionStrategy.COSINE:
            f_text = text.as_tensor() if isinstance(text, TextEmbedding) else torch.as_tensor(text)
            text_query = self.decoder.text_proj(f_text.to(frame_embeddings))
        return baseline_select(strategy, num_frames, keyframe_count, frame_embeddings, text_query)

    def forward(self, frames, text, strategy=SelectionStrategy.OURS,
                keyframe_count: Optional[int] = None) -> SegmenterOutput:
        """
        Segment the object(s) referred to by text in a clip.

        Args:
            frames: [T, H, W, 3] tensor or array in [0, 1].
            text (TextEmbedding): Sentence embedding of the expression.
            strategy (SelectionStrategy): How the key frames are chosen.
            keyframe_count (Optional[int]): T'. Defaults to the config value.
        """
        if keyframe_count is None:
            keyframe_count = self.config.keyframe_count
        frames = self._as_frames(frames)
        num_frames, height, width = frames.shape[:3]

        padded = pad_frames(frames, padded_size(height, width, self.config.image_size))
        pyramid = self.backbone(padded)
        pixel_features = self.decoder.pixel_features(pyramid)
        queries = self.decoder.init_queries(text, num_frames)
        queries, intermediate = self.decoder.decode(queries, pyramid, text, pixel_features,
                                                    return_intermediate=True)
        # Heads only see cells of the unpadded frame
        grid_h, grid_w = mask_grid_size(height, width)
        mask_features = pixel_features[:, :grid_h, :grid_w]
        frame_prediction = self.decoder.heads(queries, text, mask_features)

        frame_embeddings = aggregate_frames(queries)
        # The scorer sees detached embeddings: it is trained by its own loss only
        scores = self.scorer(frame_embeddings.detach())
        indices = self.select(strategy, frame_embeddings, scores, text, keyframe_count)
        logger.debug("Key frames (%s): %s", SelectionStrategy(strategy).value, indices)

        index = torch.as_tensor(indices, dtype=torch.long, device=frames.device)
        keyframe_queries = self.interframe(queries.queries[index])
        keyframe_prediction = self.decoder.heads(keyframe_queries, text, mask_features[index])

        aux = []
        if self.config.deep_supervision:
            aux = [self.decoder.heads(q[index], text, mask_features[index]) for q in intermediate]

        return SegmenterOutput(queries=queries, frame_prediction=frame_prediction,
                               frame_embeddings=frame_embeddings, scores=scores, indices=indices,
                               keyframe_queries=keyframe_queries,
                               keyframe_prediction=keyframe_prediction,
                               mask_features=mask_features, intermediate=aux, frame_size=(height, width))


def _composite(output: SegmenterOutput):
    """
    Per-frame masks and kept flags, taking key frames from the inter-frame
    prediction and every other frame from the per-frame prediction.
    """
    masks = output.frame_prediction.masks.detach().clone()
    kept = output.frame_prediction.kept.clone()
    index = torch.as_tensor(output.indices, dtype=torch.long, device=masks.device)
    masks[index] = output.keyframe_prediction.masks.detach()
    kept[index] = output.keyframe_prediction.kept
    return masks.cpu().numpy(), kept.cpu().numpy()


def _upsample(masks, factor, size=None):
    masks = masks.repeat(factor, axis=-2).repeat(factor, axis=-1)
    if size is None:
        return masks
    # Cells cover 4x4 blocks from the top left, the last row and column may overhang or fall short
    masks = masks[..., :size[0], :size[1]]
    short = [(0, 0)] * (masks.ndim - 2) + [(0, size[0] - masks.shape[-2]), (0, size[1] - masks.shape[-1])]
    return np.pad(masks, short, mode="edge")


def query_masks(output: SegmenterOutput, factor=4):
    """
    Binary full-resolution mask of every query, [T, N, H, W], and the kept
    flags [T, N].
    """
    masks, kept = _composite(output)
    return _upsample(masks >= 0.5, factor, output.frame_size), kept


def binarize_output(output: SegmenterOutput, factor=4):
    """
    Union over kept queries of their masks at 0.5, upsampled to full
    resolution by nearest neighbour. Returns bool [T, H, W].
    """
    masks, kept = query_masks(output, factor)
    return (masks & kept[:, :, None, None]).any(axis=1)
