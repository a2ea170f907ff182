"""
Language-conditioned query decoder.

Queries are initialised from the sentence embedding, refined per frame by L
rounds of masked cross-attention (to one pyramid level at a time, with the
projected sentence embedding appended as an extra key/value token),
self-attention and a feed-forward block, and finally read out by a
classification head and a mask-embedding head whose dot product with the
pixel features gives per-query masks.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import torch
from torch import nn
from torch.nn import functional as F

from ..core.seeding import fork_torch_rng
from .backbone import FeaturePyramid, STRIDES
from .layers import CrossAttentionLayer, SelfAttentionLayer, FFNLayer, MLP, sine_position_encoding
from .text_encoder import TextEmbedding

__all__ = ["QuerySet", "FramePrediction", "LanguageQueryDecoder", "predict_masks", "select_queries",
           "DECODER_STRIDES"]

# Pyramid levels visited by the decoder layers, round-robin, coarse to fine
DECODER_STRIDES = (32, 16, 8)


@dataclass(frozen=True)
class QuerySet:
    queries: torch.Tensor
    layer: int = 0

    @property
    def num_frames(self):
        return self.queries.shape[0]


@dataclass(frozen=True)
class FramePrediction:
    """
    Per-query outputs on T frames: class_logits [T, N, C+1] (background last),
    mask_embeddings [T, N, d_m], masks [T, N, H/4, W/4] probabilities and
    kept [T, N].
    """
    class_logits: torch.Tensor
    mask_embeddings: torch.Tensor
    masks: torch.Tensor
    kept: torch.Tensor

    def index_frames(self, indices):
        indices = torch.as_tensor(indices, dtype=torch.long)
        return FramePrediction(self.class_logits[indices], self.mask_embeddings[indices],
                               self.masks[indices], self.kept[indices])


def predict_masks(mask_embeddings, mask_features):
    """
    sigmoid(<e_i[t], F_mask[t, y, x]>) for every query and pixel.

    Args:
        mask_embeddings (Tensor): [T, N, d_m]
        mask_features (Tensor): [T, h, w, d_m], channel last.
    """
    return torch.einsum("tnd,thwd->tnhw", mask_embeddings, mask_features).sigmoid()


def select_queries(class_logits, threshold):
    """
    Keep a query when its most likely foreground class has softmax probability
    above threshold. The softmax runs over all C+1 classes, background last.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"Threshold must lie in (0, 1), got {threshold}.")
    probs = class_logits.softmax(dim=-1)
    return probs[..., :-1].max(dim=-1).values > threshold


def _text_tensor(text, like):
    if isinstance(text, TextEmbedding):
        text = text.as_tensor()
    return torch.as_tensor(text).to(dtype=like.dtype, device=like.device)


class LanguageQueryDecoder(nn.Module):
    """
    Args:
        num_queries (int): N, queries per frame.
        query_dim (int): C_Q.
        text_dim (int): d, size of the sentence embedding.
        mask_dim (int): d_m, channels of the mask feature map.
        num_layers (int): L. Zero layers makes decode the identity.
        num_heads (int): Attention heads.
        num_classes (int): C foreground classes; one background class is added.
        level_channels (Sequence[int]): Backbone channels per stride in STRIDES.
        masked_attention (bool): Restrict cross-attention of layers after the
            first to the previous layer's predicted foreground.
        threshold (float): tau used for kept.
        seed (int): Seed for parameter initialisation.
    """
    def __init__(self, num_queries=5, query_dim=64, text_dim=64, mask_dim=32, num_layers=3,
                 num_heads=4, num_classes=3, level_channels: Sequence[int] = (32, 64, 128, 256),
                 masked_attention=True, threshold=0.8, seed=0):
        super().__init__()
        if query_dim % num_heads:
            raise ValueError(f"query_dim {query_dim} is not divisible by {num_heads} heads.")
        self.num_queries = num_queries
        self.query_dim = query_dim
        self.text_dim = text_dim
        self.mask_dim = mask_dim
        self.num_layers = num_layers
        self.num_classes = num_classes
        self.masked_attention = masked_attention
        self.threshold = threshold

        self.query_init = nn.Linear(text_dim, query_dim, bias=False)
        self.query_bias = nn.Parameter(torch.empty(num_queries, query_dim))
        self.text_proj = nn.Linear(text_dim, query_dim)

        channels = dict(zip(STRIDES, level_channels))
        self.input_proj = nn.ModuleList(nn.Linear(channels[s], query_dim) for s in DECODER_STRIDES)
        self.level_embed = nn.Parameter(torch.empty(len(DECODER_STRIDES), query_dim))
        self.pixel_pos_proj = nn.Linear(query_dim, mask_dim, bias=False)

        self.cross_attention_layers = nn.ModuleList(
            CrossAttentionLayer(query_dim, num_heads) for _ in range(num_layers))
        self.self_attention_layers = nn.ModuleList(
            SelfAttentionLayer(query_dim, num_heads) for _ in range(num_layers))
        self.ffn_layers = nn.ModuleList(
            FFNLayer(query_dim, 4 * query_dim) for _ in range(num_layers))

        self.class_head = nn.Linear(query_dim + text_dim, num_classes + 1)
        self.mask_head = MLP(query_dim, query_dim, mask_dim, 2)

        with fork_torch_rng(seed):
            self.reset_parameters()

    def reset_parameters(self):
        for name, param in self.named_parameters():
            if name == "query_bias":
                nn.init.normal_(param, std=1.0)
            elif name == "level_embed":
                nn.init.normal_(param, std=0.02)
            elif name.endswith("bias"):
                nn.init.zeros_(param)
            elif param.dim() > 1:
                nn.init.xavier_uniform_(param)

    def init_queries(self, text, num_frames=1) -> QuerySet:
        """
        q_i = W_init F_text + b_i, broadcast to every frame.
        """
        f_text = _text_tensor(text, self.query_bias)
        if f_text.shape != (self.text_dim,):
            raise ValueError(f"Text embedding has shape {tuple(f_text.shape)}, "
                             f"decoder expects ({self.text_dim},).")
        queries = self.query_init(f_text)[None, :] + self.query_bias
        return QuerySet(queries[None].expand(num_frames, -1, -1), layer=0)

    def pixel_features(self, pyramid: FeaturePyramid):
        """
        Mask features with a fixed coordinate encoding added, [T, h, w, d_m].
        """
        mask_features = pyramid.mask_features
        _, height, width, _ = mask_features.shape
        pos = sine_position_encoding(height, width, self.query_dim, dtype=mask_features.dtype)
        pos = self.pixel_pos_proj(pos.to(mask_features.device)).reshape(height, width, self.mask_dim)
        return mask_features + pos[None]

    def _memory(self, pyramid, f_text):
        """
        Flattened key/value sequences per decoder level, each with the text
        token appended last.
        """
        memories = []
        for i, stride in enumerate(DECODER_STRIDES):
            level = pyramid.levels[STRIDES.index(stride)]
            num_frames, height, width, _ = level.shape
            src = self.input_proj[i](level).reshape(num_frames, height * width, -1) + self.level_embed[i]
            pos = sine_position_encoding(height, width, self.query_dim, dtype=src.dtype).to(src.device)
            text_token = self.text_proj(f_text).expand(num_frames, 1, -1)
            memory = torch.cat((src, text_token), dim=1)
            pos = torch.cat((pos, pos.new_zeros(1, self.query_dim)), dim=0)
            memories.append((memory, pos[None], (height, width)))
        return memories

    def _attention_mask(self, queries, mask_features, size):
        """
        True where a query may not look: pixels whose predicted probability is
        below 0.5. Rows that would be fully blocked are opened up. The text
        token column is never blocked.
        """
        with torch.no_grad():
            logits = torch.einsum("tnd,thwd->tnhw", self.embed_masks(queries), mask_features)
            logits = F.interpolate(logits, size=size, mode="bilinear", align_corners=False)
            blocked = (logits.sigmoid() < 0.5).flatten(2)
            blocked[blocked.all(dim=-1)] = False
            text_col = blocked.new_zeros(blocked.shape[:2] + (1,))
            return torch.cat((blocked, text_col), dim=-1)

    def decode(self, queries: QuerySet, pyramid: FeaturePyramid, text,
               mask_features=None, return_intermediate=False):
        """
        Run the L decoder layers.

        Args:
            queries (QuerySet): Layer 0 queries, [T, N, C_Q].
            pyramid (FeaturePyramid): Backbone output for the same T frames.
            text: TextEmbedding or [d] tensor.
            mask_features (Optional[Tensor]): Output of pixel_features. Computed
                if not given and masked attention is on.
            return_intermediate (bool): Also return the queries after every
                layer but the last.
        """
        if queries.layer != 0:
            raise ValueError(f"decode expects layer 0 queries, got layer {queries.layer}.")
        output = queries.queries
        if output.shape[1:] != (self.num_queries, self.query_dim):
            raise ValueError(f"Queries have shape {tuple(output.shape)}, expected "
                             f"[T, {self.num_queries}, {self.query_dim}].")
        if pyramid.levels[0].shape[0] != output.shape[0]:
            raise ValueError("Queries and feature pyramid disagree on the number of frames.")

        intermediate: List[torch.Tensor] = []
        if self.num_layers:
            f_text = _text_tensor(text, output)
            memories = self._memory(pyramid, f_text)
            if self.masked_attention and mask_features is None:
                mask_features = self.pixel_features(pyramid)

        for i in range(self.num_layers):
            memory, pos, size = memories[i % len(memories)]
            attn_mask = None
            if self.masked_attention and i > 0:
                attn_mask = self._attention_mask(output, mask_features, size)
            output = self.cross_attention_layers[i](output, memory, memory_mask=attn_mask, pos=pos)
            output = self.self_attention_layers[i](output)
            output = self.ffn_layers[i](output)
            if i < self.num_layers - 1:
                intermediate.append(output)

        result = QuerySet(output, layer=self.num_layers)
        if return_intermediate:
            return result, intermediate
        return result

    def classify(self, queries, text):
        q = queries.queries if isinstance(queries, QuerySet) else queries
        f_text = _text_tensor(text, q)
        f_text = f_text.expand(q.shape[:-1] + (f_text.shape[-1],))
        return self.class_head(torch.cat((q, f_text), dim=-1))

    def embed_masks(self, queries):
        q = queries.queries if isinstance(queries, QuerySet) else queries
        return self.mask_head(q)

    def heads(self, queries, text, mask_features, threshold: Optional[float] = None) -> FramePrediction:
        """
        Apply classification and mask heads to queries of shape [T, N, C_Q]
        against mask_features [T, h, w, d_m].
        """
        class_logits = self.classify(queries, text)
        mask_embeddings = self.embed_masks(queries)
        masks = predict_masks(mask_embeddings, mask_features)
        kept = select_queries(class_logits.detach(), self.threshold if threshold is None else threshold)
        return FramePrediction(class_logits, mask_embeddings, masks, kept)
