"""
Video-level bipartite matching between queries and ground-truth objects.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

__all__ = ["MatchResult", "hungarian_match", "match_cost", "EPS"]

EPS = 1e-6


@dataclass(frozen=True)
class MatchResult:
    """
    Injective (query, object) pairs sorted by query index. Queries that do not
    appear are background.
    """
    pairs: Tuple[Tuple[int, int], ...]
    num_queries: int
    num_targets: int

    @property
    def query_indices(self):
        return [q for q, _ in self.pairs]

    @property
    def target_indices(self):
        return [g for _, g in self.pairs]

    def __len__(self):
        return len(self.pairs)

    def labels(self, target_classes, background):
        """
        Class label per query: the matched object's class, or background.
        """
        labels = [background] * self.num_queries
        for q, g in self.pairs:
            labels[q] = int(target_classes[g])
        return labels


def hungarian_match(cost) -> MatchResult:
    """
    Minimum-cost assignment of every ground-truth object (column) to a
    distinct query (row).

    Args:
        cost: [N, G] matrix with G <= N.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"Cost must be a matrix, got shape {cost.shape}.")
    num_queries, num_targets = cost.shape
    if num_targets > num_queries:
        raise ValueError(f"Cannot match {num_targets} objects to {num_queries} queries.")
    if not np.all(np.isfinite(cost)):
        raise ValueError("Cost matrix contains non-finite entries.")
    if num_targets == 0:
        return MatchResult((), num_queries, 0)
    rows, cols = linear_sum_assignment(cost)
    pairs = tuple(sorted((int(r), int(c)) for r, c in zip(rows, cols)))
    return MatchResult(pairs, num_queries, num_targets)


@torch.no_grad()
def match_cost(class_logits, masks, target_masks, target_classes, cls_weight=2.0, bce_weight=5.0,
               dice_weight=5.0, smooth=1.0):
    """
    Matching cost summed over frames.

    cost(i, g) = sum_t cls_weight * -log p_i[t](class_g)
                     + bce_weight * BCE(M_i[t], M_g[t])
                     + dice_weight * (1 - softdice(M_i[t], M_g[t]))

    Args:
        class_logits (Tensor): [T, N, C+1]
        masks (Tensor): [T, N, h, w] probabilities.
        target_masks (Tensor): [T, G, h, w] in {0, 1}.
        target_classes (Sequence[int]): G class ids.

    Returns:
        numpy [N, G] cost matrix.
    """
    num_frames, num_queries = class_logits.shape[:2]
    num_targets = target_masks.shape[1]
    if num_targets == 0:
        return np.zeros((num_queries, 0))

    probs = class_logits.softmax(-1).clamp(EPS, 1 - EPS)
    classes = torch.as_tensor(list(target_classes), dtype=torch.long, device=probs.device)
    cost_cls = -probs[:, :, classes].log()  # [T, N, G]

    p = masks.clamp(EPS, 1 - EPS).flatten(2)  # [T, N, P]
    y = target_masks.to(p.dtype).flatten(2)  # [T, G, P]
    num_pixels = p.shape[-1]
    # BCE(p, y) averaged over pixels, for every (query, object) pair at once
    cost_bce = -(torch.einsum("tnp,tgp->tng", p.log(), y)
                 + torch.einsum("tnp,tgp->tng", (1 - p).log(), 1 - y)) / num_pixels
    inter = torch.einsum("tnp,tgp->tng", p, y)
    total = p.sum(-1)[:, :, None] + y.sum(-1)[:, None, :]
    cost_dice = 1 - (2 * inter + smooth) / (total + smooth)

    cost = cls_weight * cost_cls + bce_weight * cost_bce + dice_weight * cost_dice
    return cost.sum(0).double().cpu().numpy()
