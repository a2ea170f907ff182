"""
Run configuration.

A run is described by one JSON document that mirrors RunConfig field for field.
Unknown keys are rejected by the schema in schemas/run_config.json.
"""

import json
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Dict, Tuple

import jsonschema

from .logging import get_logger

__all__ = ["RunConfig", "LossWeights", "ConfigError", "load_config", "save_config", "load_schema"]

logger = get_logger("config")


class ConfigError(ValueError):
    """
    Raised when a configuration document does not satisfy the schema or the
    cross-field invariants.
    """


def load_schema(name):
    text = resources.files("motionref").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class LossWeights:
    cls: float = 2.0
    bce: float = 5.0
    dice: float = 5.0
    temporal: float = 1.0
    video: float = 1.0
    keyframe: float = 1.0

    def __post_init__(self):
        for name, value in dataclasses.asdict(self).items():
            if value < 0:
                raise ValueError(f"Loss weight {name} must be non-negative, got {value}.")

    def as_dict(self) -> Dict[str, float]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    image_size: Tuple[int, int] = (96, 96)
    num_queries: int = 5
    query_dim: int = 64
    text_dim: int = 64
    mask_dim: int = 32
    decoder_layers: int = 3
    num_heads: int = 4
    num_classes: int = 3
    keyframe_count: int = 8
    threshold: float = 0.8
    backbone_channels: Tuple[int, int, int, int] = (32, 64, 128, 256)
    scorer_hidden: int = 64
    interframe_depth: int = 1
    interframe_temporal_embedding: bool = False
    masked_attention: bool = True
    max_frames: int = 32
    learning_rate: float = 3e-4
    weight_decay: float = 0.05
    betas: Tuple[float, float] = (0.9, 0.999)
    total_steps: int = 3000
    batch_size: int = 2
    train_clip_length: int = 16
    checkpoint_every: int = 500
    val_every: int = 0
    loss_weights: LossWeights = field(default_factory=LossWeights)
    dice_smoothing: float = 1.0
    deep_supervision: bool = False
    deterministic: bool = True
    workers: int = 0

    def __post_init__(self):
        # Normalise sequences coming from JSON into tuples so configs hash and compare
        object.__setattr__(self, "image_size", tuple(self.image_size))
        object.__setattr__(self, "backbone_channels", tuple(self.backbone_channels))
        object.__setattr__(self, "betas", tuple(self.betas))
        if isinstance(self.loss_weights, dict):
            object.__setattr__(self, "loss_weights", LossWeights(**self.loss_weights))
        self.validate()

    def validate(self):
        """
        Check the invariants that the schema cannot express.
        """
        if not 0 < self.threshold < 1:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}.")
        height, width = self.image_size
        if height % 32 or width % 32:
            raise ConfigError(f"image_size must be a multiple of 32, got {self.image_size}.")
        if self.query_dim % self.num_heads:
            raise ConfigError(f"query_dim ({self.query_dim}) must be divisible by "
                              f"num_heads ({self.num_heads}).")
        if self.query_dim % 4:
            raise ConfigError(f"query_dim must be a multiple of 4, got {self.query_dim}.")
        if self.keyframe_count > self.train_clip_length:
            raise ConfigError(f"keyframe_count ({self.keyframe_count}) exceeds "
                              f"train_clip_length ({self.train_clip_length}).")
        if self.train_clip_length > self.max_frames:
            raise ConfigError(f"train_clip_length ({self.train_clip_length}) exceeds "
                              f"max_frames ({self.max_frames}).")

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        for key in ("image_size", "backbone_channels", "betas"):
            data[key] = list(data[key])
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        try:
            jsonschema.validate(data, load_schema("run_config"))
        except jsonschema.ValidationError as err:
            path = "/".join(str(p) for p in err.absolute_path) or "<root>"
            raise ConfigError(f"Invalid config field {path}: {err.message}") from err
        return cls(**data)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def load_config(path) -> RunConfig:
    """
    Load and validate a configuration file.
    """
    with open(path, "r") as f:
        data = json.load(f)
    config = RunConfig.from_dict(data)
    logger.debug("Loaded config from %s", path)
    return config


def save_config(config: RunConfig, path):
    with open(path, "w") as f:
        json.dump(config.to_dict(), f, indent=4)
