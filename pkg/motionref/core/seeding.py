"""
Seed plumbing. Every random stream in the package is derived from the run seed
plus a tuple of integer keys, so streams never depend on call order.
"""

import hashlib
from contextlib import contextmanager

import numpy as np
import torch

__all__ = ["rng_for", "seed_everything", "fork_torch_rng", "stable_hash"]


def stable_hash(text):
    # Stable across interpreter runs, unlike hash()
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rng_for(seed, *keys):
    """
    numpy Generator keyed by (seed, *keys).
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            entropy.append(stable_hash(key))
        else:
            entropy.append(int(key) & 0xFFFFFFFFFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def seed_everything(seed, deterministic=True):
    """
    Seed torch and numpy's global state. In deterministic mode the numeric path
    is restricted to a single thread and deterministic kernels.
    """
    torch.manual_seed(seed)
    np.random.seed(seed & 0xFFFFFFFF)
    if deterministic:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)


@contextmanager
def fork_torch_rng(seed):
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield
