# Import shortcuts to the training, evaluation and ablation tools
from .data import ClipDataset, BatchSampler, TrainingItem, crop_clip, parse_styles
from .schedule import cosine_lr, cosine_scheduler
from .checkpoint import TrainState, ConfigMismatchError, config_diff, build_optimizer
from .evaluate import ModelPredictor, OraclePredictor, evaluate_samples, evaluate_run, save_overlays
from .train import train, train_step, TrainingDivergedError
from .ablate import (AblationSpec, ablate_keyframes, ablate_expressions, ablate_expression_variants,
                     pprint_keyframe_table, pprint_grid)
from .snapshot import run_snapshot, diff_snapshots, pprint_snapshot_diff, state_digest

__all__ = ["ClipDataset", "BatchSampler", "TrainingItem", "crop_clip", "parse_styles", "cosine_lr",
           "cosine_scheduler", "TrainState", "ConfigMismatchError", "config_diff", "build_optimizer",
           "ModelPredictor", "OraclePredictor", "evaluate_samples", "evaluate_run", "save_overlays",
           "train", "train_step", "TrainingDivergedError", "AblationSpec", "ablate_keyframes",
           "ablate_expressions", "ablate_expression_variants", "pprint_keyframe_table", "pprint_grid",
           "run_snapshot", "diff_snapshots", "pprint_snapshot_diff", "state_digest"]
