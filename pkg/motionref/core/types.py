"""
Shared domain types: clips with ground truth, object tracks and referring
samples. All types are immutable once constructed.
"""

import enum
from collections import namedtuple
from dataclasses import dataclass, field
from typing import FrozenSet, Mapping, Optional, Sequence, Tuple

import numpy as np

__all__ = ["BBox", "ExpressionStyle", "ObjectTrack", "VideoClip", "ReferringSample", "mask_bbox",
           "sort_samples"]

class BBox(namedtuple("BBox", ("x0", "y0", "x1", "y1"))):
    """
    Half-open pixel box [x0, x1) x [y0, y1), x rightward, y downward.
    """
    __slots__ = ()

    @property
    def center(self):
        return ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)


class ExpressionStyle(str, enum.Enum):
    APPEARANCE = "appearance"
    SPATIAL = "spatial"
    MOTION = "motion"


def mask_bbox(mask) -> Optional[BBox]:
    """
    Tight half-open bounding box of a boolean mask, None if the mask is empty.
    """
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return BBox(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


def _readonly(array):
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class ObjectTrack:
    object_id: int
    class_id: int
    per_frame_bbox: Tuple[Optional[BBox], ...]
    attributes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.object_id < 1:
            raise ValueError(f"object_id must be positive, got {self.object_id}.")
        if self.class_id < 0:
            raise ValueError(f"class_id must be non-negative, got {self.class_id}.")
        boxes = tuple(None if b is None else BBox(*(int(v) for v in b))
                      for b in self.per_frame_bbox)
        object.__setattr__(self, "per_frame_bbox", boxes)
        object.__setattr__(self, "attributes", dict(sorted(self.attributes.items())))

    @property
    def visible_frames(self) -> Tuple[int, ...]:
        return tuple(t for t, box in enumerate(self.per_frame_bbox) if box is not None)

    def centers(self):
        # (t, x, y) of every visible frame
        return [(t, *box.center) for t, box in enumerate(self.per_frame_bbox) if box is not None]


@dataclass(frozen=True, eq=False)
class VideoClip:
    """
    T RGB frames in [0, 1] with per-pixel object ids (0 = background).
    """
    clip_id: str
    frames: np.ndarray
    masks: np.ndarray
    objects: Tuple[ObjectTrack, ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", _readonly(np.asarray(self.frames, dtype=np.float32)))
        object.__setattr__(self, "masks", _readonly(np.asarray(self.masks, dtype=np.uint8)))
        object.__setattr__(self, "objects",
                           tuple(sorted(self.objects, key=lambda o: o.object_id)))

    def __eq__(self, other):
        if not isinstance(other, VideoClip):
            return NotImplemented
        return (self.clip_id == other.clip_id
                and np.array_equal(self.frames, other.frames)
                and np.array_equal(self.masks, other.masks)
                and self.objects == other.objects)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_size(self) -> Tuple[int, int]:
        return self.frames.shape[1], self.frames.shape[2]

    @property
    def object_ids(self) -> Tuple[int, ...]:
        return tuple(o.object_id for o in self.objects)

    def object_by_id(self, object_id) -> ObjectTrack:
        for obj in self.objects:
            if obj.object_id == object_id:
                return obj
        raise KeyError(f"Object {object_id} not in clip {self.clip_id}.")

    def object_mask(self, object_id) -> np.ndarray:
        return self.masks == object_id

    def relevance(self, target_ids) -> np.ndarray:
        """
        Frame relevance labels: 1 where any target is visible.
        """
        return np.isin(self.masks, list(target_ids)).any(axis=(1, 2)).astype(np.float32)

    def validate(self):
        """
        Check the clip invariants, raising ValueError naming the first violation.
        """
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ValueError(f"{self.clip_id}: frames must have shape [T, H, W, 3], got {self.frames.shape}.")
        if self.num_frames < 1:
            raise ValueError(f"{self.clip_id}: clip must have at least one frame.")
        if self.masks.shape != self.frames.shape[:3]:
            raise ValueError(f"{self.clip_id}: masks shape {self.masks.shape} does not match "
                             f"frames {self.frames.shape[:3]}.")
        if self.frames.min() < 0 or self.frames.max() > 1:
            raise ValueError(f"{self.clip_id}: frame values must lie in [0, 1].")
        known = set(self.object_ids)
        present = set(int(i) for i in np.unique(self.masks)) - {0}
        unknown = present - known
        if unknown:
            raise ValueError(f"{self.clip_id}: mask ids {sorted(unknown)} have no object entry.")
        for obj in self.objects:
            if len(obj.per_frame_bbox) != self.num_frames:
                raise ValueError(f"{self.clip_id}: object {obj.object_id} has "
                                 f"{len(obj.per_frame_bbox)} boxes for {self.num_frames} frames.")
            visible = self.object_mask(obj.object_id).any(axis=(1, 2))
            for t, box in enumerate(obj.per_frame_bbox):
                if (box is not None) != bool(visible[t]):
                    raise ValueError(f"{self.clip_id}: object {obj.object_id} bbox presence "
                                     f"disagrees with its mask on frame {t}.")
        return self


@dataclass(frozen=True)
class ReferringSample:
    clip_id: str
    expression: str
    target_ids: FrozenSet[int]
    style: ExpressionStyle

    def __post_init__(self):
        object.__setattr__(self, "target_ids", frozenset(int(i) for i in self.target_ids))
        object.__setattr__(self, "style", ExpressionStyle(self.style))
        if not self.target_ids:
            raise ValueError(f"Sample on {self.clip_id} has no target ids.")
        if not self.expression.strip():
            raise ValueError(f"Sample on {self.clip_id} has an empty expression.")

    def check_against(self, clip: VideoClip):
        missing = self.target_ids - set(clip.object_ids)
        if missing:
            raise ValueError(f"Sample '{self.expression}' refers to unknown objects "
                             f"{sorted(missing)} in clip {clip.clip_id}.")
        return self

    @staticmethod
    def sort_key(sample: "ReferringSample"):
        return (sample.clip_id, sorted(sample.target_ids), sample.style.value, sample.expression)


def sort_samples(samples: Sequence[ReferringSample]):
    return sorted(samples, key=ReferringSample.sort_key)
