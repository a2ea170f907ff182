"""
Temporal exchange between the queries of the selected key frames.
"""

import torch
from torch import nn

from ..core.seeding import fork_torch_rng
from .layers import SelfAttentionLayer, FFNLayer

__all__ = ["InterFrameAttention", "flatten_queries", "unflatten_queries"]


def flatten_queries(queries):
    # Frame-major
    if queries.ndim != 3:
        raise ValueError(f"Expected queries of shape [T', N, C_Q], got {tuple(queries.shape)}.")
    return queries.reshape(-1, queries.shape[-1])


def unflatten_queries(flattened, num_frames, num_queries):
    if flattened.shape[0] != num_frames * num_queries:
        raise ValueError(f"Cannot reshape {flattened.shape[0]} tokens into "
                         f"{num_frames} frames of {num_queries} queries.")
    return flattened.reshape(num_frames, num_queries, -1)


class InterFrameAttention(nn.Module):
    """
    Self-attention over all T' * N key frame queries followed by a feed-forward
    block, both pre-norm residual, repeated depth times. Without the optional
    temporal embedding the block is equivariant to any permutation of the
    flattened tokens.

    Args:
        query_dim (int): C_Q.
        num_heads (int): Attention heads.
        depth (int): Number of attention + feed-forward blocks.
        temporal_embedding (bool): Add a learned per-position embedding to
            each key frame's queries before attending.
        max_frames (int): Size of the temporal embedding table.
        seed (int): Seed for parameter initialisation.
    """
    def __init__(self, query_dim=64, num_heads=4, depth=1, temporal_embedding=False,
                 max_frames=32, seed=0):
        super().__init__()
        self.query_dim = query_dim
        self.attention_layers = nn.ModuleList(
            SelfAttentionLayer(query_dim, num_heads, normalize_before=True) for _ in range(depth))
        self.ffn_layers = nn.ModuleList(
            FFNLayer(query_dim, 4 * query_dim, normalize_before=True) for _ in range(depth))
        self.temporal_embed = nn.Embedding(max_frames, query_dim) if temporal_embedding else None

        with fork_torch_rng(seed):
            for name, param in self.named_parameters():
                if name.endswith("bias"):
                    nn.init.zeros_(param)
                elif param.dim() > 1:
                    nn.init.xavier_uniform_(param)
            if self.temporal_embed is not None:
                nn.init.normal_(self.temporal_embed.weight, std=0.02)

    def forward(self, queries):
        """
        Args:
            queries (Tensor): [T', N, C_Q] queries of the selected frames.
        """
        if queries.ndim != 3 or queries.shape[-1] != self.query_dim:
            raise ValueError(f"Expected queries of shape [T', N, {self.query_dim}], "
                             f"got {tuple(queries.shape)}.")
        num_frames, num_queries, _ = queries.shape
        if num_frames < 1:
            raise ValueError("Inter-frame attention needs at least one frame.")
        if self.temporal_embed is not None:
            if num_frames > self.temporal_embed.num_embeddings:
                raise ValueError(f"{num_frames} key frames exceed the temporal embedding "
                                 f"table of {self.temporal_embed.num_embeddings}.")
            steps = torch.arange(num_frames, device=queries.device)
            queries = queries + self.temporal_embed(steps)[:, None, :]

        tokens = flatten_queries(queries)[None]
        for attention, ffn in zip(self.attention_layers, self.ffn_layers):
            tokens = ffn(attention(tokens))
        return unflatten_queries(tokens[0], num_frames, num_queries)

    interframe_attend = forward
