"""
Evaluation reports: per-object scores averaged over frames, aggregated over
referred objects, and grouped by expression style.
"""

import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional

import numpy as np
import jsonschema
import tabulate

from ..config import load_schema
from ..core.types import VideoClip
from ..logging import get_logger
from .measures import METRIC_NAMES, frame_measures

__all__ = ["EvalReport", "evaluate", "combine_reports", "pprint_report", "object_key"]

logger = get_logger("metrics.report")

Scores = Dict[str, float]


def object_key(clip_id, object_id, sample_key=None):
    if sample_key is None:
        return f"{clip_id}/{object_id}"
    return f"{clip_id}/{sample_key}/{object_id}"


def _mean_scores(scores: Iterable[Scores]) -> Scores:
    scores = list(scores)
    if not scores:
        return {}
    return {name: float(np.mean([s[name] for s in scores])) for name in METRIC_NAMES}


@dataclass
class EvalReport:
    """
    per_object maps "clip/sample/object" keys to their J, F, J&F, Dice and IoU.
    aggregate is the mean over per_object entries, groups the same mean within
    each expression style (object_groups maps keys to their style).
    """
    per_object: Dict[str, Scores] = field(default_factory=dict)
    aggregate: Scores = field(default_factory=dict)
    groups: Dict[str, Scores] = field(default_factory=dict)
    object_groups: Dict[str, str] = field(default_factory=dict)
    counts: Dict[str, int] = field(default_factory=dict)
    metadata: Dict[str, object] = field(default_factory=dict)

    def recompute(self):
        """
        Refresh aggregate, groups and counts from per_object.
        """
        self.aggregate = _mean_scores(self.per_object.values())
        members: Dict[str, list] = {}
        for key, group in self.object_groups.items():
            members.setdefault(group, []).append(self.per_object[key])
        self.groups = {group: _mean_scores(scores) for group, scores in sorted(members.items())}
        self.counts = {"objects": len(self.per_object)}
        for group, scores in sorted(members.items()):
            self.counts[f"objects_{group}"] = len(scores)
        return self

    def to_dict(self):
        return {"per_object": self.per_object, "aggregate": self.aggregate, "groups": self.groups,
                "object_groups": self.object_groups, "counts": self.counts,
                "metadata": self.metadata}

    @classmethod
    def from_dict(cls, data):
        jsonschema.validate(data, load_schema("eval_report"))
        return cls(**data)

    def validate(self):
        jsonschema.validate(json.loads(json.dumps(self.to_dict())), load_schema("eval_report"))
        return self

    def save(self, path):
        self.validate()
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
        logger.info("Wrote report with %d objects to %s", len(self.per_object), path)

    @classmethod
    def load(cls, path):
        with open(path, "r") as f:
            return cls.from_dict(json.load(f))


def evaluate(predictions, clip: VideoClip, target_ids, sample_key=None, group=None,
             tolerance: Optional[int] = None) -> EvalReport:
    """
    Score binary predictions of the referred objects of one sample.

    Each measure is computed per frame, averaged over every frame of the clip
    (frames where an object is absent follow the empty-mask convention), and
    then averaged over the referred objects. J is the per-frame IoU.

    Args:
        predictions: Either a mapping object_id -> bool [T, H, W], or one
            bool [T, H, W] array used for every target.
        clip (VideoClip): Ground truth.
        target_ids (Iterable[int]): Referred objects.
        sample_key (Optional[str]): Distinguishes samples on the same clip.
        group (Optional[str]): Expression style used for grouping.
        tolerance (Optional[int]): Boundary tolerance, default_tolerance if None.
    """
    target_ids = sorted(target_ids)
    unknown = set(target_ids) - set(clip.object_ids)
    if unknown:
        raise ValueError(f"Unknown target ids {sorted(unknown)} for clip {clip.clip_id}.")
    if not isinstance(predictions, Mapping):
        predictions = {object_id: predictions for object_id in target_ids}

    report = EvalReport(metadata={"clips": [clip.clip_id]})
    for object_id in target_ids:
        if object_id not in predictions:
            raise ValueError(f"No prediction for object {object_id} of clip {clip.clip_id}.")
        measures = frame_measures(predictions[object_id], clip.object_mask(object_id), tolerance)
        j = float(measures["IoU"].mean())
        f = float(measures["F"].mean())
        key = object_key(clip.clip_id, object_id, sample_key)
        report.per_object[key] = {"J": j, "F": f, "J&F": (j + f) / 2,
                                  "Dice": float(measures["Dice"].mean()), "IoU": j}
        if group is not None:
            report.object_groups[key] = str(group)
    return report.recompute()


def combine_reports(reports: Iterable[EvalReport], metadata: Optional[Mapping] = None) -> EvalReport:
    """
    Merge per-sample reports into one. Duplicate object keys are an error.
    """
    combined = EvalReport()
    clips = set()
    for report in reports:
        overlap = set(report.per_object) & set(combined.per_object)
        if overlap:
            raise ValueError(f"Reports share object keys {sorted(overlap)[:3]}.")
        combined.per_object.update(report.per_object)
        combined.object_groups.update(report.object_groups)
        clips.update(report.metadata.get("clips", []))
    combined.metadata = {"clips": sorted(clips)}
    combined.metadata.update(metadata or {})
    return combined.recompute()


def pprint_report(report: EvalReport, floatfmt=".4f"):
    """
    Print the aggregate and per-style scores as a table.
    """
    rows = [["all", report.counts.get("objects", 0)] + [report.aggregate.get(n, float("nan"))
                                                        for n in METRIC_NAMES]]
    for group, scores in report.groups.items():
        rows.append([group, report.counts.get(f"objects_{group}", 0)] + [scores[n] for n in METRIC_NAMES])
    print(tabulate.tabulate(rows, headers=("Style", "Objects") + METRIC_NAMES, floatfmt=floatfmt))
