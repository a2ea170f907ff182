"""
Evaluation runner: predictors turn (clip, sample) pairs into binary masks of
the referred objects, which are scored and grouped by expression style.
"""

import os
import json
from typing import List, Optional

import torch
from tqdm import tqdm
from wrapt import decorator

from ..core.types import ReferringSample, VideoClip
from ..logging import get_logger, LoggingStream
from ..metrics.report import EvalReport, combine_reports, evaluate
from ..model.keyframes import SelectionStrategy
from ..model.segmenter import ReferringSegmenter, binarize_output
from ..plot import plot_tools
from .checkpoint import TrainState
from .data import ClipDataset

__all__ = ["ModelPredictor", "OraclePredictor", "evaluate_samples", "evaluate_run", "save_overlays",
           "SUMMARY_NAME"]

logger = get_logger("tools.evaluate")

SUMMARY_NAME = "training_summary.json"


class ModelPredictor:
    """
    Run the full model on a clip. Every referred object is scored against the
    union of the kept query masks.
    """
    def __init__(self, model: ReferringSegmenter, strategy=SelectionStrategy.OURS, keyframe_count=None):
        self.model = model
        self.strategy = SelectionStrategy(strategy)
        self.keyframe_count = keyframe_count

    def __call__(self, clip: VideoClip, sample: ReferringSample):
        self.model.eval()
        with torch.no_grad():
            output = self.model(clip.frames, self.model.encode(sample.expression), self.strategy,
                                self.keyframe_count)
        return binarize_output(output)


class OraclePredictor:
    """
    Returns the ground truth.
    """
    def __call__(self, clip: VideoClip, sample: ReferringSample):
        return {i: clip.object_mask(i) for i in sample.target_ids}


def evaluate_samples(dataset, predictor, tolerance=None, reports: Optional[List[EvalReport]] = None,
                     progress=False, metadata=None) -> EvalReport:
    """
    Score every sample of a dataset and combine the results, grouped by style.

    Args:
        dataset: ClipDataset, or an iterable of (clip, samples) pairs.
        predictor: Callable (clip, sample) -> masks, see metrics.evaluate.
        reports (Optional[list]): Per-sample reports are appended here as they
            are produced.
    """
    reports = [] if reports is None else reports
    entries = list(dataset)
    stream = LoggingStream(logger) if progress == "log" else None
    for clip, samples in tqdm(entries, desc="Evaluating", disable=not progress, file=stream):
        for index, sample in enumerate(samples):
            prediction = predictor(clip, sample)
            reports.append(evaluate(prediction, clip, sample.target_ids,
                                    sample_key=f"{sample.style.value}{index:02d}", group=sample.style.value,
                                    tolerance=tolerance))
    return combine_reports(reports, metadata)


def _best_val(checkpoint):
    path = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(checkpoint))), SUMMARY_NAME)
    if not os.path.exists(path):
        return None
    with open(path, "r") as f:
        return json.load(f).get("best_val")


@decorator
def _save_report(run_func, _, args, kwargs):
    """
    Save the report to report_path when the run ends, also if it is
    interrupted, in which case the samples scored so far are saved.
    """
    report_path = kwargs.pop("report_path", None)
    reports = kwargs.setdefault("reports", [])
    report = None
    try:
        report = run_func(*args, **kwargs)
    finally:
        if report_path is not None:
            if report is None and reports:
                report = combine_reports(reports, {"partial": True})
                logger.warning("Run interrupted, saving %d partial results", len(reports))
            if report is not None:
                try:
                    report.save(report_path)
                except Exception:
                    logger.exception("Failed to save report %s", report_path)
    return report


@_save_report
def evaluate_run(checkpoint, data_dir, split="val", strategy=SelectionStrategy.OURS, keyframe_count=None,
                 styles=None, variant="origin", config=None, tolerance=None, progress=False,
                 reports=None) -> EvalReport:
    """
    Evaluate a checkpoint on one split of a dataset.

    Args:
        checkpoint: Path of a TrainState checkpoint, or a TrainState.
        data_dir: Dataset directory.
        split (str): Split name.
        strategy (SelectionStrategy): Key frame strategy.
        keyframe_count (Optional[int]): T', the config value by default.
        styles, variant: Restrict or restyle the evaluated expressions.
        config (Optional[RunConfig]): If given, must match the checkpoint.
        report_path (Optional[str]): Where to write the JSON report.
    """
    state = checkpoint if isinstance(checkpoint, TrainState) else TrainState.load(checkpoint, config)
    dataset = ClipDataset.from_dir(data_dir, split, styles=styles, variant=variant,
                                   workers=state.config.workers or None)
    strategy = SelectionStrategy(strategy)
    metadata = {"split": split, "strategy": strategy.value, "step": state.step,
                "keyframe_count": keyframe_count or state.config.keyframe_count,
                "variant": str(getattr(variant, "value", variant))}
    if not isinstance(checkpoint, TrainState):
        metadata["checkpoint"] = os.path.abspath(checkpoint)
        best_val = _best_val(checkpoint)
        if best_val is not None:
            metadata["best_val"] = best_val
    predictor = ModelPredictor(state.model, strategy, keyframe_count)
    report = evaluate_samples(dataset, predictor, tolerance, reports=reports, progress=progress,
                              metadata=metadata)
    logger.info("%s J&F %.4f over %d objects", split, report.aggregate.get("J&F", float("nan")),
                report.counts.get("objects", 0))
    return report


def save_overlays(checkpoint, data_dir, split="val", fig_folder=None, count=4, strategy=SelectionStrategy.OURS,
                  keyframe_count=None, config=None):
    """
    Save prediction overlays of the first count samples of a split.

    Returns:
        Paths of the saved figures.
    """
    state = checkpoint if isinstance(checkpoint, TrainState) else TrainState.load(checkpoint, config)
    predictor = ModelPredictor(state.model, strategy, keyframe_count)
    paths = []
    for clip, samples in ClipDataset.from_dir(data_dir, split):
        for index, sample in enumerate(samples):
            if len(paths) >= count:
                return paths
            fig = plot_tools.plot_clip_overlay(clip, predictor(clip, sample), sample.target_ids)
            fig.suptitle(sample.expression, fontsize=9)
            name = f"overlay_{clip.clip_id}_{sample.style.value}{index:02d}"
            paths.append(plot_tools.save_figure(fig, name, fig_folder))
    return paths
