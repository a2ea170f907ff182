"""
Training loop.

One step draws a batch from the seeded sampler, runs the segmenter on every
(clip, expression) pair, averages the composite losses and takes one AdamW
step followed by one cosine schedule step. Nothing in the loop depends on
wall-clock time, so two runs with the same config write identical logs and
checkpoints.
"""

import os
import json
from typing import Dict, List, Optional

import numpy as np
import torch
from tqdm import tqdm

from ..config import RunConfig, save_config
from ..logging import get_logger, LoggingStream
from ..losses.criterion import ClipTarget, LossBreakdown, SetCriterion
from ..synthbench.expressions import ExpressionVariant
from .checkpoint import TrainState
from .data import BatchSampler, ClipDataset, TrainingItem
from .evaluate import SUMMARY_NAME, evaluate_run

__all__ = ["train", "train_step", "TrainingDivergedError", "LOG_NAME"]

logger = get_logger("tools.train")

LOG_NAME = "train_log.jsonl"
CHECKPOINT_DIR = "checkpoints"


class TrainingDivergedError(RuntimeError):
    """
    The loss became non-finite. dump_path holds the offending batch.
    """
    def __init__(self, step, dump_path):
        super().__init__(f"Non-finite loss at step {step}, batch dumped to {dump_path}.")
        self.step = step
        self.dump_path = dump_path


def _dump_batch(batch: List[TrainingItem], step, losses, out_dir):
    path = os.path.join(out_dir or os.getcwd(), f"diverged_step{step:06d}.pt")
    torch.save({"step": step,
                "clip_ids": [item.clip.clip_id for item in batch],
                "starts": [item.start for item in batch],
                "expressions": [item.sample.expression for item in batch],
                "target_ids": [sorted(item.sample.target_ids) for item in batch],
                "frames": [torch.as_tensor(np.array(item.clip.frames)) for item in batch],
                "masks": [torch.as_tensor(np.array(item.clip.masks)) for item in batch],
                "losses": losses}, path)
    return path


def train_step(state: TrainState, criterion: SetCriterion, batch: List[TrainingItem],
               out_dir=None) -> Dict[str, float]:
    """
    One optimisation step. Returns the batch-mean loss terms and the learning
    rate that was used.

    Raises:
        TrainingDivergedError: Some loss term is not finite. No update is made.
    """
    model = state.model
    model.train()
    state.optimizer.zero_grad(set_to_none=True)
    breakdowns: List[LossBreakdown] = []
    for item in batch:
        text = model.encode(item.sample.expression)
        output = model(item.clip.frames, text)
        target = ClipTarget.from_clip(item.clip, item.sample.target_ids)
        breakdown, _ = criterion(output, target)
        breakdowns.append(breakdown)

    records = [b.as_floats() for b in breakdowns]
    terms = {name: float(np.mean([r[name] for r in records])) for name in records[0]}
    if not all(b.is_finite() for b in breakdowns):
        path = _dump_batch(batch, state.step, records, out_dir)
        logger.error("Loss diverged at step %d: %s", state.step, terms)
        raise TrainingDivergedError(state.step, path)

    loss = torch.stack([b.total for b in breakdowns]).mean()
    loss.backward()
    terms["lr"] = state.lr
    state.optimizer.step()
    state.scheduler.step()
    state.step += 1
    return terms


def _checkpoint_path(out_dir, name):
    return os.path.join(out_dir, CHECKPOINT_DIR, f"{name}.pt")


def train(config: RunConfig, data_dir, out_dir=None, split="train", val_split="val", styles=None,
          variant=ExpressionVariant.ORIGIN, state: Optional[TrainState] = None, progress=True):
    """
    Train a segmenter.

    Args:
        config (RunConfig): Run configuration.
        data_dir: Generated dataset directory.
        out_dir (Optional[str]): Receives config.json, the step log, checkpoints
            every config.checkpoint_every steps, final.pt, best.pt and the
            training summary. Nothing is written if None.
        split, val_split (str): Training and validation splits.
        styles: Expression styles trained on, all if None.
        variant (ExpressionVariant): Expression variant trained on.
        state (Optional[TrainState]): Resume from this state.
        progress: True for a progress bar, "log" to send it to the log.

    Returns:
        (state, log): the final TrainState and the per-step records.
    """
    state = state or TrainState.initialize(config)
    dataset = ClipDataset.from_dir(data_dir, split, styles=styles, variant=variant,
                                   workers=config.workers or None)
    sampler = BatchSampler(dataset, config.batch_size, config.train_clip_length, config.seed)
    criterion = SetCriterion(config)
    logger.info("Training on %d clips (%d samples) for %d steps", len(dataset), dataset.num_samples,
                config.total_steps)

    log_file = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        save_config(config, os.path.join(out_dir, "config.json"))
        log_file = open(os.path.join(out_dir, LOG_NAME), "a" if state.step else "w")

    log: List[Dict[str, float]] = []
    best_val = None
    stream = LoggingStream(logger) if progress == "log" else None
    try:
        steps = range(state.step, config.total_steps)
        for step in tqdm(steps, desc="Training", disable=not progress, file=stream):
            record = {"step": step}
            record.update(train_step(state, criterion, sampler.batch(step), out_dir))
            if config.val_every and state.step % config.val_every == 0:
                report = evaluate_run(state, data_dir, val_split, styles=styles, variant=variant)
                record["val_jf"] = report.aggregate.get("J&F", 0.0)
                if best_val is None or record["val_jf"] > best_val["J&F"]:
                    best_val = {"step": state.step, "J&F": record["val_jf"]}
                    if out_dir is not None:
                        state.save(_checkpoint_path(out_dir, "best"))
            log.append(record)
            if log_file is not None:
                log_file.write(json.dumps(record, sort_keys=True) + "\n")
            if step % 50 == 0:
                logger.info("Step %d: loss %.4f lr %.3g", step, record["total"], record["lr"])
            if out_dir is not None and config.checkpoint_every and state.step % config.checkpoint_every == 0:
                state.save(_checkpoint_path(out_dir, f"step_{state.step:06d}"))
    finally:
        if log_file is not None:
            log_file.close()

    if out_dir is not None:
        state.save(_checkpoint_path(out_dir, "final"))
        with open(os.path.join(out_dir, SUMMARY_NAME), "w") as f:
            json.dump({"steps": state.step, "best_val": best_val,
                       "final_loss": log[-1]["total"] if log else None}, f, indent=2, sort_keys=True)
    return state, log
