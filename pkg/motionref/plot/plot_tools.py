"""
Static figures of training runs, ablations and predictions. Figures are built
on the Agg canvas directly so importing this module never touches the global
pyplot backend.
"""

import os
from typing import Mapping, Optional, Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from ..core.types import VideoClip
from ..logging import get_logger

__all__ = ["save_figure", "new_figure", "plot_training_curve", "plot_keyframe_ablation", "plot_clip_overlay"]

logger = get_logger("plot.plot_tools")

OVERLAY_COLOR = np.array([1.0, 0.2, 0.2])
GT_COLOR = np.array([0.2, 1.0, 0.2])


def new_figure(figsize=(6, 4)):
    fig = Figure(figsize=figsize)
    FigureCanvasAgg(fig)
    return fig


def save_figure(fig, fname, fig_folder=None):
    """
    Save a figure as fname.png to the given directory, or by default, figures
    """
    if fig_folder is None:
        fig_folder = os.path.join(os.getcwd(), 'figures')

    if not os.path.exists(fig_folder):
        os.makedirs(fig_folder)

    path = os.path.join(fig_folder, f"{fname}.png")
    logger.info("Saving figure to: %s", path)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    return path


def plot_training_curve(log: Sequence[Mapping[str, float]], terms=("total",)):
    """
    Loss terms against step, with validation J&F on a second axis if present.
    """
    fig = new_figure()
    ax = fig.add_subplot(1, 1, 1)
    steps = [r["step"] for r in log]
    for term in terms:
        ax.plot(steps, [r[term] for r in log], label=term)
    ax.set_xlabel("Step")
    ax.set_ylabel("Loss")
    ax.set_yscale("log")
    val = [(r["step"], r["val_jf"]) for r in log if "val_jf" in r]
    if val:
        ax2 = ax.twinx()
        ax2.plot(*zip(*val), "k.--", label="val J&F")
        ax2.set_ylabel("J&F")
        ax2.set_ylim(0, 1)
    ax.legend(loc="upper right")
    return fig


def plot_keyframe_ablation(table: Mapping[str, Mapping[int, float]]):
    """
    J&F against T' with one line per selection strategy.

    Args:
        table: strategy -> {T': J&F}.
    """
    fig = new_figure()
    ax = fig.add_subplot(1, 1, 1)
    for strategy, row in table.items():
        tprimes = sorted(row)
        ax.plot(tprimes, [row[t] for t in tprimes], "o-", label=strategy)
    ax.set_xlabel("T'")
    ax.set_ylabel("J&F")
    ax.legend()
    ax.grid(alpha=0.3)
    return fig


def plot_clip_overlay(clip: VideoClip, prediction, target_ids=None, frames: Optional[Sequence[int]] = None,
                      alpha=0.5):
    """
    Predicted (red) and ground truth (green) masks blended over a row of frames.

    Args:
        clip (VideoClip): Clip to show.
        prediction: bool [T, H, W] predicted mask.
        target_ids: Ground truth objects to outline, none if None.
        frames: Frame indices, by default up to 8 evenly spaced frames.
    """
    prediction = np.asarray(prediction, dtype=bool)
    if prediction.shape != clip.masks.shape:
        raise ValueError(f"Prediction shape {prediction.shape} does not match clip {clip.masks.shape}.")
    if frames is None:
        frames = np.unique(np.linspace(0, clip.num_frames - 1, min(8, clip.num_frames)).round().astype(int))
    gt = np.isin(clip.masks, list(target_ids)) if target_ids else np.zeros_like(prediction)

    fig = new_figure(figsize=(2 * len(frames), 2.2))
    for i, t in enumerate(frames):
        image = np.array(clip.frames[t], dtype=float)
        image[gt[t]] = (1 - alpha) * image[gt[t]] + alpha * GT_COLOR
        image[prediction[t]] = (1 - alpha) * image[prediction[t]] + alpha * OVERLAY_COLOR
        ax = fig.add_subplot(1, len(frames), i + 1)
        ax.imshow(image, interpolation="nearest")
        ax.set_title(f"t={t}", fontsize=8)
        ax.axis("off")
    return fig
