"""
Attention building blocks shared by the query decoder and the inter-frame
attention module. All attention is batch-first: [batch, tokens, channels].
"""

import math
from typing import Optional

import torch
from torch import nn, Tensor
from torch.nn import functional as F

__all__ = ["SelfAttentionLayer", "CrossAttentionLayer", "FFNLayer", "MLP", "sine_position_encoding"]


def _with_pos(tensor, pos: Optional[Tensor]):
    return tensor if pos is None else tensor + pos


class SelfAttentionLayer(nn.Module):
    """
    Residual multi-head self-attention. With normalize_before the layer is
    pre-norm (x + attn(norm(x))), otherwise post-norm (norm(x + attn(x))).
    """
    def __init__(self, d_model, nhead, normalize_before=False):
        super().__init__()
        self.self_attn = nn.MultiheadAttention(d_model, nhead, batch_first=True)
        self.norm = nn.LayerNorm(d_model)
        self.normalize_before = normalize_before

    def forward(self, tgt, query_pos: Optional[Tensor] = None):
        if self.normalize_before:
            tgt2 = self.norm(tgt)
            q = k = _with_pos(tgt2, query_pos)
            return tgt + self.self_attn(q, k, value=tgt2, need_weights=False)[0]
        q = k = _with_pos(tgt, query_pos)
        tgt2 = self.self_attn(q, k, value=tgt, need_weights=False)[0]
        return self.norm(tgt + tgt2)


class CrossAttentionLayer(nn.Module):
    """
    Post-norm residual cross-attention from queries to a memory sequence.

    memory_mask is a boolean [batch, queries, memory] tensor where True means
    the position may not be attended.
    """
    def __init__(self, d_model, nhead):
        super().__init__()
        self.nhead = nhead
        self.multihead_attn = nn.MultiheadAttention(d_model, nhead, batch_first=True)
        self.norm = nn.LayerNorm(d_model)

    def forward(self, tgt, memory, memory_mask: Optional[Tensor] = None,
                pos: Optional[Tensor] = None, query_pos: Optional[Tensor] = None):
        attn_mask = None
        if memory_mask is not None:
            # MultiheadAttention wants one mask per head stacked on the batch axis
            attn_mask = memory_mask.repeat_interleave(self.nhead, dim=0)
        tgt2 = self.multihead_attn(query=_with_pos(tgt, query_pos), key=_with_pos(memory, pos),
                                   value=memory, attn_mask=attn_mask, need_weights=False)[0]
        return self.norm(tgt + tgt2)


class FFNLayer(nn.Module):
    def __init__(self, d_model, dim_feedforward, normalize_before=False):
        super().__init__()
        self.linear1 = nn.Linear(d_model, dim_feedforward)
        self.linear2 = nn.Linear(dim_feedforward, d_model)
        self.norm = nn.LayerNorm(d_model)
        self.normalize_before = normalize_before

    def forward(self, tgt):
        if self.normalize_before:
            return tgt + self.linear2(F.relu(self.linear1(self.norm(tgt))))
        return self.norm(tgt + self.linear2(F.relu(self.linear1(tgt))))


class MLP(nn.Module):
    """
    Plain multi-layer perceptron with ReLU between layers.
    """
    def __init__(self, input_dim, hidden_dim, output_dim, num_layers):
        super().__init__()
        dims = [input_dim] + [hidden_dim] * (num_layers - 1) + [output_dim]
        self.layers = nn.ModuleList(nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:]))

    def forward(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = F.relu(x)
        return x


def sine_position_encoding(height, width, channels, temperature=10000.0, dtype=torch.float32):
    """
    Fixed 2D sine/cosine encoding of pixel centers, shape [height * width, channels].
    The first half of the channels encodes y, the second half x.
    """
    if channels % 4:
        raise ValueError(f"Sine position encoding needs channels divisible by 4, got {channels}.")
    num_feats = channels // 2
    scale = 2 * math.pi
    y = (torch.arange(height, dtype=dtype) + 0.5) / height * scale
    x = (torch.arange(width, dtype=dtype) + 0.5) / width * scale
    dim_t = torch.arange(num_feats, dtype=dtype)
    dim_t = temperature ** (2 * torch.div(dim_t, 2, rounding_mode="floor") / num_feats)

    pos_y = y[:, None] / dim_t
    pos_x = x[:, None] / dim_t
    pos_y = torch.stack((pos_y[:, 0::2].sin(), pos_y[:, 1::2].cos()), dim=2).flatten(1)
    pos_x = torch.stack((pos_x[:, 0::2].sin(), pos_x[:, 1::2].cos()), dim=2).flatten(1)
    pos = torch.cat((pos_y[:, None, :].expand(height, width, num_feats),
                     pos_x[None, :, :].expand(height, width, num_feats)), dim=2)
    return pos.reshape(height * width, channels)
