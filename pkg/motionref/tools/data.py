"""
Training data: clips with their referring samples, filtered by expression
style and variant, and a seeded batch sampler.
"""

from collections import namedtuple
from typing import Iterable, List, Optional, Sequence

import numpy as np

from ..core.manifest import load_split
from ..core.seeding import rng_for
from ..core.types import ExpressionStyle, ObjectTrack, ReferringSample, VideoClip
from ..logging import get_logger
from ..synthbench.expressions import ExpressionParseError, ExpressionVariant, restyle_expression

__all__ = ["ClipDataset", "BatchSampler", "TrainingItem", "crop_clip", "parse_styles"]

logger = get_logger("tools.data")

TrainingItem = namedtuple("TrainingItem", ("clip", "sample", "start"))


def parse_styles(styles) -> Optional[frozenset]:
    """
    Turn "motion,appearance", a sequence of names, or None (every style)
    into a set of ExpressionStyle.
    """
    if styles is None:
        return None
    if isinstance(styles, str):
        styles = [s for s in styles.split(",") if s.strip()]
    styles = frozenset(ExpressionStyle(s.strip() if isinstance(s, str) else s) for s in styles)
    if not styles:
        raise ValueError("Style set must not be empty.")
    return styles


def crop_clip(clip: VideoClip, start, length) -> VideoClip:
    """
    Frames [start, start + length) of a clip. Unlike a recording slice every
    object is kept, with no boxes where it is absent.
    """
    stop = start + length
    if not 0 <= start < stop <= clip.num_frames:
        raise ValueError(f"Crop [{start}, {stop}) outside clip {clip.clip_id} of {clip.num_frames} frames.")
    if start == 0 and stop == clip.num_frames:
        return clip
    objects = tuple(ObjectTrack(o.object_id, o.class_id, o.per_frame_bbox[start:stop], o.attributes)
                    for o in clip.objects)
    return VideoClip(clip.clip_id, clip.frames[start:stop], clip.masks[start:stop], objects)


class ClipDataset:
    """
    Clips and their samples, restricted to the given styles and re-rendered
    as the given expression variant. Clips left without samples are dropped.

    Args:
        entries: (clip, samples) pairs as returned by load_manifest.
        styles: Allowed expression styles, None for all.
        variant (ExpressionVariant): Samples are restyled to this variant.
    """
    def __init__(self, entries, styles=None, variant=ExpressionVariant.ORIGIN):
        self.styles = parse_styles(styles)
        self.variant = ExpressionVariant(variant)
        self.entries = []
        skipped = 0
        for clip, samples in entries:
            kept = []
            for sample in samples:
                if self.styles is not None and sample.style not in self.styles:
                    continue
                if self.variant != ExpressionVariant.ORIGIN:
                    try:
                        sample = ReferringSample(sample.clip_id,
                                                 restyle_expression(sample.expression, self.variant),
                                                 sample.target_ids, sample.style)
                    except ExpressionParseError:
                        skipped += 1
                        continue
                kept.append(sample)
            if kept:
                self.entries.append((clip, kept))
        if skipped:
            logger.warning("Skipped %d samples that could not be restyled as %s", skipped, self.variant.value)

    @classmethod
    def from_dir(cls, data_dir, split=None, styles=None, variant=ExpressionVariant.ORIGIN, workers=None):
        return cls(load_split(data_dir, split, workers=workers), styles, variant)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def num_samples(self):
        return sum(len(samples) for _, samples in self.entries)

    def samples(self) -> Iterable[ReferringSample]:
        for _, samples in self.entries:
            yield from samples


class BatchSampler:
    """
    Deterministic batches: the batch of step k depends only on (seed, k).

    Each batch holds distinct clips where possible. Per clip one expression
    is drawn: first a style uniformly among the styles the clip has, then a
    sample of that style. Clips longer than clip_length are cropped to a
    random contiguous window on which a target is visible.
    """
    def __init__(self, dataset: ClipDataset, batch_size, clip_length, seed=0):
        if len(dataset) == 0:
            raise ValueError("Cannot sample batches from an empty dataset.")
        if batch_size < 1 or clip_length < 1:
            raise ValueError(f"batch_size and clip_length must be positive, got {batch_size}, {clip_length}.")
        self.dataset = dataset
        self.batch_size = batch_size
        self.clip_length = clip_length
        self.seed = seed

    def _crop_start(self, rng, clip, sample):
        length = min(self.clip_length, clip.num_frames)
        starts = np.arange(clip.num_frames - length + 1)
        relevance = clip.relevance(sample.target_ids)
        covered = np.array([relevance[s:s + length].any() for s in starts])
        if covered.any():
            starts = starts[covered]
        return int(starts[rng.integers(len(starts))]), length

    def batch(self, step) -> List[TrainingItem]:
        rng = rng_for(self.seed, "batch", step)
        count = len(self.dataset)
        replace = count < self.batch_size
        clip_indices = rng.choice(count, size=self.batch_size, replace=replace)
        items = []
        for index in clip_indices:
            clip, samples = self.dataset.entries[int(index)]
            styles = sorted({s.style.value for s in samples})
            style = styles[rng.integers(len(styles))]
            candidates = [s for s in samples if s.style.value == style]
            sample = candidates[rng.integers(len(candidates))]
            start, length = self._crop_start(rng, clip, sample)
            items.append(TrainingItem(crop_clip(clip, start, length), sample, start))
        return items
