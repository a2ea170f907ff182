"""
Sentence embeddings for referring expressions.

The default encoder is frozen and vocabulary free: each token is hashed to a
seed-keyed random unit vector, modulated elementwise by a seed-keyed positional
vector, and the sum over tokens is L2 normalised. It carries no torch
parameters so it can never receive gradients.
"""

import re
import abc
import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import torch

from ..core.seeding import rng_for

__all__ = ["TextSource", "TextEmbedding", "encode_expression", "tokenize",
           "TextEncoder", "ToyTextEncoder", "ExternalTextEncoder"]

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


class TextSource(str, enum.Enum):
    TOY_HASH = "toy_hash"
    EXTERNAL = "external"


@dataclass(frozen=True, eq=False)
class TextEmbedding:
    vector: np.ndarray
    source: TextSource = TextSource.TOY_HASH

    def __post_init__(self):
        vector = np.array(self.vector, dtype=np.float64, copy=True)
        if vector.ndim != 1:
            raise ValueError(f"Text embedding must be a vector, got shape {vector.shape}.")
        norm = np.linalg.norm(vector)
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-6:
            raise ValueError(f"Text embedding must have unit norm, got {norm}.")
        vector.setflags(write=False)
        object.__setattr__(self, "vector", vector)
        object.__setattr__(self, "source", TextSource(self.source))

    @property
    def dim(self):
        return self.vector.shape[0]

    def as_tensor(self, dtype=torch.float32):
        return torch.as_tensor(self.vector, dtype=dtype)


def tokenize(expression):
    return [tok for tok in _TOKEN_SPLIT.split(expression.lower()) if tok]


@lru_cache(maxsize=4096)
def _token_vector(token, d, seed):
    vec = rng_for(seed, "token", token).standard_normal(d)
    return vec / np.linalg.norm(vec)


@lru_cache(maxsize=256)
def _position_vector(position, d, seed):
    # Entries kept away from zero so no token dimension is silenced
    rng = rng_for(seed, "position", position)
    return rng.uniform(0.5, 1.5, size=d) * rng.choice((-1.0, 1.0), size=d)


def encode_expression(expression, d, seed=0) -> TextEmbedding:
    """
    Encode an expression with the toy hash encoder.

    Args:
        expression (str): Referring expression. Must contain at least one
            alphanumeric token.
        d (int): Embedding dimension.
        seed (int): Seed that keys the token and position vectors.
    """
    if not isinstance(expression, str):
        raise TypeError(f"Expression must be a string, got {type(expression)}.")
    if d < 1:
        raise ValueError(f"Embedding dimension must be positive, got {d}.")
    tokens = tokenize(expression)
    if not expression.strip() or not tokens:
        raise ValueError(f"Cannot encode empty expression {expression!r}.")

    total = np.zeros(d)
    for position, token in enumerate(tokens):
        total += _token_vector(token, d, seed) * _position_vector(position, d, seed)
    norm = np.linalg.norm(total)
    if norm == 0:
        raise ValueError(f"Expression {expression!r} encodes to the zero vector.")
    return TextEmbedding(total / norm, TextSource.TOY_HASH)


class TextEncoder(abc.ABC):
    """
    String to sentence embedding. Implementations must be deterministic and
    must not expose trainable parameters to the segmentation model.
    """
    dim: int

    @abc.abstractmethod
    def encode(self, expression) -> TextEmbedding:
        pass

    def __call__(self, expression) -> TextEmbedding:
        return self.encode(expression)


class ToyTextEncoder(TextEncoder):
    def __init__(self, dim, seed=0):
        self.dim = dim
        self.seed = seed

    def encode(self, expression):
        return encode_expression(expression, self.dim, self.seed)

    def __repr__(self):
        return f"ToyTextEncoder(dim={self.dim}, seed={self.seed})"


class ExternalTextEncoder(TextEncoder):
    """
    Adapter for a pretrained sentence encoder.

    Args:
        fn (Callable[[str], array]): Function returning a [dim] vector for an
            expression. Its output is L2 normalised here.
        dim (int): Output dimension of fn.
        pooling (str): How fn reduces token states to one vector, for example
            "cls" (start token) or "mean". Recorded with run metadata only;
            the adapter does not interpret it.
    """
    def __init__(self, fn, dim, pooling="cls"):
        if not callable(fn):
            raise TypeError("ExternalTextEncoder expects a callable")
        self.fn = fn
        self.dim = dim
        self.pooling = pooling

    def encode(self, expression):
        if not expression.strip():
            raise ValueError("Cannot encode an empty expression.")
        vector = np.asarray(self.fn(expression), dtype=np.float64)
        if vector.shape != (self.dim,):
            raise ValueError(f"External encoder returned shape {vector.shape}, expected ({self.dim},).")
        norm = np.linalg.norm(vector)
        if norm == 0 or not np.isfinite(norm):
            raise ValueError(f"External encoder returned a degenerate vector for {expression!r}.")
        return TextEmbedding(vector / norm, TextSource.EXTERNAL)
