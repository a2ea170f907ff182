"""
Key-frame scoring and selection.
"""

import enum
from typing import List

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from ..core.seeding import fork_torch_rng
from .decoder import QuerySet

__all__ = ["SelectionStrategy", "aggregate_frames", "FrameScorer", "select_top_frames",
           "baseline_select", "uniform_indices", "cosine_indices"]


class SelectionStrategy(str, enum.Enum):
    OURS = "ours"
    UNIFORM = "uniform"
    COSINE = "cosine"
    ALL = "all"


def aggregate_frames(queries) -> torch.Tensor:
    """
    Frame embedding e_t, the mean of frame t's queries. Returns [T, C_Q].
    """
    q = queries.queries if isinstance(queries, QuerySet) else queries
    return q.mean(dim=1)


class FrameScorer(nn.Module):
    """
    s_t = sigmoid(W_2 relu(W_1 e_t + b_1) + b)
    """
    def __init__(self, query_dim=64, hidden_dim=64, seed=0):
        super().__init__()
        self.hidden = nn.Linear(query_dim, hidden_dim)
        self.out = nn.Linear(hidden_dim, 1)
        with fork_torch_rng(seed):
            nn.init.kaiming_uniform_(self.hidden.weight, nonlinearity="relu")
            nn.init.xavier_uniform_(self.out.weight)
            nn.init.zeros_(self.hidden.bias)
            nn.init.zeros_(self.out.bias)

    def logits(self, frame_embeddings):
        return self.out(F.relu(self.hidden(frame_embeddings))).squeeze(-1)

    def forward(self, frame_embeddings):
        return self.logits(frame_embeddings).sigmoid()

    score_frames = forward


def _check_count(keyframe_count):
    if int(keyframe_count) != keyframe_count or keyframe_count < 1:
        raise ValueError(f"Key frame count must be a positive integer, got {keyframe_count}.")
    return int(keyframe_count)


def _top_indices(values, keyframe_count):
    values = np.asarray(values, dtype=np.float64)
    # lexsort uses the last key as primary: descending value, then ascending index
    order = np.lexsort((np.arange(values.size), -values))
    return sorted(int(i) for i in order[:min(keyframe_count, values.size)])


def select_top_frames(scores, keyframe_count) -> List[int]:
    """
    Indices of the min(T', T) highest scoring frames in ascending order. Ties
    go to the lower frame index.
    """
    keyframe_count = _check_count(keyframe_count)
    if isinstance(scores, torch.Tensor):
        scores = scores.detach().cpu().double().numpy()
    return _top_indices(scores, keyframe_count)


def uniform_indices(num_frames, keyframe_count) -> List[int]:
    """
    Evenly spaced indices round(k (T-1) / (T'-1)), rounding halves up, with
    duplicates removed. A single key frame is the middle frame T // 2.
    """
    keyframe_count = _check_count(keyframe_count)
    if keyframe_count >= num_frames:
        return list(range(num_frames))
    if keyframe_count == 1:
        return [num_frames // 2]
    indices = []
    for k in range(keyframe_count):
        index = int(np.floor(k * (num_frames - 1) / (keyframe_count - 1) + 0.5))
        if not indices or indices[-1] != index:
            indices.append(index)
    return indices


def cosine_indices(frame_embeddings, text_query, keyframe_count) -> List[int]:
    """
    Frames whose embedding is most cosine-similar to the projected text.

    Args:
        frame_embeddings: [T, C_Q]
        text_query: [C_Q], the sentence embedding after the decoder's text
            projection.
    """
    keyframe_count = _check_count(keyframe_count)
    e = torch.as_tensor(frame_embeddings).detach().double()
    v = torch.as_tensor(text_query).detach().double()
    sims = F.cosine_similarity(e, v[None, :].expand_as(e), dim=-1, eps=1e-12)
    return _top_indices(sims.cpu().numpy(), keyframe_count)


def baseline_select(strategy, num_frames, keyframe_count, frame_embeddings=None,
                    text_query=None) -> List[int]:
    """
    Select key frames without the learned scorer.

    Args:
        strategy (SelectionStrategy or str): uniform, cosine or all.
        num_frames (int): T.
        keyframe_count (int): T'.
        frame_embeddings, text_query: Needed by the cosine strategy.
    """
    try:
        strategy = SelectionStrategy(strategy)
    except ValueError:
        raise ValueError(f"Unknown key frame strategy {strategy!r}.") from None
    if strategy == SelectionStrategy.UNIFORM:
        return uniform_indices(num_frames, keyframe_count)
    if strategy == SelectionStrategy.COSINE:
        if frame_embeddings is None or text_query is None:
            raise ValueError("Cosine selection needs frame embeddings and a text query.")
        return cosine_indices(frame_embeddings, text_query, keyframe_count)
    if strategy == SelectionStrategy.ALL:
        return list(range(num_frames))
    raise ValueError(f"Strategy {strategy.value} is not a baseline strategy.")
