"""
Training state: model, AdamW moments, schedule and step counter.
"""

import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import torch

from ..config import RunConfig
from ..core.seeding import seed_everything
from ..logging import get_logger
from ..model.segmenter import ReferringSegmenter
from .schedule import cosine_scheduler

__all__ = ["TrainState", "ConfigMismatchError", "config_diff", "build_optimizer"]

logger = get_logger("tools.checkpoint")


class ConfigMismatchError(ValueError):
    """
    A checkpoint was written with a different configuration.
    """
    def __init__(self, fields: List[str], path=None):
        where = f" in {path}" if path is not None else ""
        super().__init__(f"Checkpoint config{where} differs in fields: {', '.join(fields)}.")
        self.fields = fields


def config_diff(a: Dict[str, Any], b: Dict[str, Any]) -> List[str]:
    return sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))


def build_optimizer(model, config: RunConfig):
    # Trainable parameters only; the text encoder is frozen and has none
    params = [p for p in model.parameters() if p.requires_grad]
    return torch.optim.AdamW(params, lr=config.learning_rate, betas=tuple(config.betas),
                             weight_decay=config.weight_decay)


@dataclass
class TrainState:
    config: RunConfig
    model: ReferringSegmenter
    optimizer: torch.optim.Optimizer
    scheduler: torch.optim.lr_scheduler.LambdaLR
    step: int = 0

    @property
    def lr(self):
        return self.optimizer.param_groups[0]["lr"]

    @classmethod
    def initialize(cls, config: RunConfig) -> "TrainState":
        seed_everything(config.seed, config.deterministic)
        model = ReferringSegmenter(config)
        optimizer = build_optimizer(model, config)
        return cls(config, model, optimizer, cosine_scheduler(optimizer, config.total_steps))

    def state_dict(self):
        return {"config": self.config.to_dict(),
                "step": self.step,
                "model": self.model.state_dict(),
                "optimizer": self.optimizer.state_dict(),
                "scheduler": self.scheduler.state_dict(),
                "torch_rng": torch.get_rng_state()}

    def save(self, path):
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        torch.save(self.state_dict(), path)
        logger.info("Saved checkpoint at step %d to %s", self.step, path)

    @classmethod
    def load(cls, path, config: Optional[RunConfig] = None) -> "TrainState":
        """
        Restore a state. If config is given it must equal the stored one.

        Raises:
            ConfigMismatchError: config differs from the checkpoint's.
        """
        data = torch.load(path, map_location="cpu")
        stored = RunConfig.from_dict(data["config"])
        if config is not None:
            differing = config_diff(config.to_dict(), stored.to_dict())
            if differing:
                raise ConfigMismatchError(differing, path)
        state = cls.initialize(stored)
        state.model.load_state_dict(data["model"])
        state.optimizer.load_state_dict(data["optimizer"])
        state.scheduler.load_state_dict(data["scheduler"])
        state.step = int(data["step"])
        torch.set_rng_state(data["torch_rng"])
        logger.debug("Loaded checkpoint at step %d from %s", state.step, path)
        return state
