import math

from torch.optim.lr_scheduler import LambdaLR

__all__ = ["cosine_lr", "cosine_scheduler"]


def cosine_lr(step, total_steps, lr0):
    """
    lr0 (1 + cos(pi step / total_steps)) / 2, held at 0 after total_steps.
    """
    if total_steps <= 0:
        return lr0
    step = min(max(step, 0), total_steps)
    return lr0 * (1 + math.cos(math.pi * step / total_steps)) / 2


def cosine_scheduler(optimizer, total_steps):
    return LambdaLR(optimizer, lambda step: cosine_lr(step, total_steps, 1.0))
