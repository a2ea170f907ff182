"""
Synthetic moving-shape clips with instance masks and referring expressions.

Every clip is planned (shapes and trajectories), rendered, turned into object
tracks from the rendered masks, and then described: motion descriptors come
from the bounding-box centers of the observed tracks, never from the plan, so
expressions always agree with the ground truth. Layouts with heavy occlusion
and clips whose motion expressions would be ambiguous are rejected and
re-drawn from the next attempt's random stream.
"""

import os
from collections import Counter, namedtuple
from dataclasses import dataclass, asdict
from functools import partial
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..core.manifest import frames_from_uint8, save_manifest, save_splits, MANIFEST_NAME
from ..core.seeding import rng_for
from ..core.types import ExpressionStyle, ObjectTrack, ReferringSample, VideoClip, mask_bbox
from ..logging import get_logger
from .expressions import AmbiguousExpressionError, render_expression
from .motion import (GridMode, MotionDescriptor, Segment, Side, Trajectory, describe_track, grid_cell,
                     merge_short_segments)
from .shapes import COLOR_RGB, Color, ShapeKind, ShapeSpec, MIN_SHAPE_SIZE, rasterize_shape, render_background

__all__ = ["GenerationSpec", "PlannedObject", "ClipPlan", "LayoutRejected", "plan_clip", "render_plan",
           "generate_clip", "generate_recording", "describe_clip", "slice_clip", "split_clips",
           "generate_benchmark", "dataset_statistics"]

logger = get_logger("synthbench.generate")

PlannedObject = namedtuple("PlannedObject", ("object_id", "shape", "trajectory"))
ClipPlan = namedtuple("ClipPlan", ("clip_id", "num_frames", "objects"))

SPLIT_FRACTIONS = (("train", 0.70), ("val", 0.15), ("test", 0.15))


class LayoutRejected(ValueError):
    """
    A planned layout violates the occlusion limits.
    """


@dataclass(frozen=True)
class GenerationSpec:
    """
    Parameters of the generator.

    Args:
        frame_size: (H, W) in pixels.
        min_frames, max_frames: Clip length range, inclusive.
        min_objects, max_objects: Objects per clip, inclusive.
        min_size, max_size: Shape size range in pixels, inclusive.
        grid_mode: "3x3" or "2x2" location names.
        distractor_prob: Probability that a clip holds two objects of the same
            color and shape.
        entry_prob, exit_prob: Per-object probability of entering or leaving
            the scene during the clip.
        stationary_prob: Per-object probability of not moving.
        max_occlusion: Largest tolerated occluded fraction of any object.
        max_attempts: Layout retries before giving up.
        recording_frames: Length range of long recordings.
        min_segment: Shortest recording segment kept on its own.
    """
    frame_size: Tuple[int, int] = (96, 96)
    min_frames: int = 12
    max_frames: int = 20
    min_objects: int = 2
    max_objects: int = 5
    min_size: int = 10
    max_size: int = 18
    grid_mode: GridMode = GridMode.GRID_3X3
    distractor_prob: float = 0.5
    entry_prob: float = 0.25
    exit_prob: float = 0.25
    stationary_prob: float = 0.2
    max_occlusion: float = 0.25
    max_attempts: int = 200
    recording_frames: Tuple[int, int] = (48, 80)
    min_segment: int = 10

    def __post_init__(self):
        object.__setattr__(self, "frame_size", tuple(int(v) for v in self.frame_size))
        object.__setattr__(self, "recording_frames", tuple(self.recording_frames))
        object.__setattr__(self, "grid_mode", GridMode(self.grid_mode))
        self.validate()

    def validate(self):
        height, width = self.frame_size
        if not 2 <= self.min_objects <= self.max_objects <= 5:
            raise ValueError(f"Object count range must lie within 2..5, got "
                             f"{self.min_objects}..{self.max_objects}.")
        if not 8 <= self.min_frames <= self.max_frames <= 32:
            raise ValueError(f"Clip length range must lie within 8..32, got "
                             f"{self.min_frames}..{self.max_frames}.")
        if self.min_size < MIN_SHAPE_SIZE or self.min_size > self.max_size:
            raise ValueError(f"Invalid shape size range {self.min_size}..{self.max_size}.")
        # Room for an entry point near an edge plus a clear middle band
        if 2 * (self.max_size + 2) > min(height, width):
            raise ValueError(f"Shapes of {self.max_size} px do not fit a {width}x{height} frame.")

    def to_dict(self):
        data = asdict(self)
        data["grid_mode"] = self.grid_mode.value
        return data


def _name_pool():
    return [(shape, color) for shape in ShapeKind for color in Color]


def _pick_names(rng, count, distractor):
    pool = _name_pool()
    order = rng.permutation(len(pool))
    names = [pool[i] for i in order[:count]]
    if distractor:
        names[1] = names[0]
    return names


def _edge_point(rng, side, margin, frame_size):
    height, width = frame_size
    if side in (Side.LEFT, Side.RIGHT):
        x = margin if side == Side.LEFT else width - margin
        return x, rng.uniform(0.3 * height, 0.7 * height)
    y = margin if side == Side.TOP else height - margin
    return rng.uniform(0.3 * width, 0.7 * width), y


def _inner_point(rng, margin, frame_size):
    height, width = frame_size
    return rng.uniform(margin, width - margin), rng.uniform(margin, height - margin)


_SIDES = (Side.LEFT, Side.RIGHT, Side.TOP, Side.BOTTOM)


def _plan_trajectory(rng, spec: GenerationSpec, shape: ShapeSpec, num_frames):
    margin = shape.half + 1
    third = max(2, num_frames // 3)
    t_in = int(rng.integers(1, third)) if rng.random() < spec.entry_prob else 0
    t_out = num_frames - int(rng.integers(1, third)) if rng.random() < spec.exit_prob else num_frames
    if t_out - t_in < 4:
        t_in, t_out = 0, num_frames

    if t_in > 0:
        start = _edge_point(rng, _SIDES[rng.integers(4)], margin, spec.frame_size)
    else:
        start = _inner_point(rng, margin, spec.frame_size)

    if t_out < num_frames:
        end = _edge_point(rng, _SIDES[rng.integers(4)], margin, spec.frame_size)
    elif t_in == 0 and rng.random() < spec.stationary_prob:
        end = start
    else:
        min_travel = 0.3 * min(spec.frame_size)
        for _ in range(20):
            end = _inner_point(rng, margin, spec.frame_size)
            if np.hypot(end[0] - start[0], end[1] - start[1]) >= min_travel:
                break

    waypoints = ((t_in, *start), (t_out - 1, *end))
    visibility = tuple(t_in <= t < t_out for t in range(num_frames))
    return Trajectory(waypoints, visibility)


def plan_clip(spec: GenerationSpec, rng, clip_id) -> ClipPlan:
    num_frames = int(rng.integers(spec.min_frames, spec.max_frames + 1))
    count = int(rng.integers(spec.min_objects, spec.max_objects + 1))
    names = _pick_names(rng, count, rng.random() < spec.distractor_prob)
    objects = []
    for object_id, (kind, color) in enumerate(names, start=1):
        shape = ShapeSpec(kind, color, int(rng.integers(spec.min_size, spec.max_size + 1)))
        objects.append(PlannedObject(object_id, shape, _plan_trajectory(rng, spec, shape, num_frames)))
    return ClipPlan(clip_id, num_frames, tuple(objects))


def render_plan(plan: ClipPlan, spec: GenerationSpec, rng) -> VideoClip:
    """
    Paint the planned objects in object id order (higher ids on top) over a
    textured background and build the clip with tracks from the masks.

    Raises:
        LayoutRejected: An object is fully occluded, or more than
            spec.max_occlusion of it is, on a frame where it is in the scene.
    """
    frame_size = spec.frame_size
    background = render_background(frame_size, rng)
    frames = np.repeat(background[None], plan.num_frames, axis=0)
    masks = np.zeros((plan.num_frames,) + frame_size, dtype=np.uint8)
    areas = {}
    for obj in plan.objects:
        color = COLOR_RGB[obj.shape.color]
        for t in range(plan.num_frames):
            if not obj.trajectory.visibility[t]:
                continue
            shape_mask = rasterize_shape(obj.shape, obj.trajectory.position(t), frame_size)
            frames[t][shape_mask] = color
            masks[t][shape_mask] = obj.object_id
            areas[obj.object_id, t] = np.count_nonzero(shape_mask)

    for (object_id, t), area in areas.items():
        visible = np.count_nonzero(masks[t] == object_id)
        if visible == 0 or 1 - visible / area > spec.max_occlusion:
            raise LayoutRejected(f"{plan.clip_id}: object {object_id} occluded on frame {t}.")

    tracks = []
    for obj in plan.objects:
        boxes = tuple(mask_bbox(masks[t] == obj.object_id) for t in range(plan.num_frames))
        tracks.append(ObjectTrack(obj.object_id, obj.shape.class_id, boxes, obj.shape.attributes()))

    frames_u8 = np.rint(np.clip(frames, 0, 1) * 255).astype(np.uint8)
    return VideoClip(plan.clip_id, frames_from_uint8(frames_u8), masks, tuple(tracks))


def describe_clip(clip: VideoClip, grid_mode=GridMode.GRID_3X3, strict=True):
    """
    Derive motion descriptors from the clip's tracks and emit the referring
    samples: per object an appearance and a spatial expression when they are
    unambiguous, and a motion expression.

    Args:
        clip (VideoClip): Clip whose object attributes hold shape, color and size.
        grid_mode: Grid used for location names.
        strict (bool): Raise AmbiguousExpressionError when two objects would
            share a motion expression. Otherwise those expressions are skipped.

    Returns:
        (descriptors, samples): descriptors by object id for objects visible on
        at least two frames, and the sorted samples.
    """
    grid_mode = GridMode(grid_mode)
    shapes = {obj.object_id: ShapeSpec.from_attributes(obj.attributes) for obj in clip.objects}
    descriptors: Dict[int, MotionDescriptor] = {}
    start_cells = {}
    for obj in clip.objects:
        centers = obj.centers()
        if not centers:
            continue
        start_cells[obj.object_id] = grid_cell(centers[0][1:], clip.frame_size, grid_mode)
        if len(centers) >= 2:
            descriptors[obj.object_id] = describe_track(centers, clip.num_frames, clip.frame_size, grid_mode)

    names = Counter(shape.name for shape in shapes.values())
    spatial_keys = Counter((shapes[i].name, cell) for i, cell in start_cells.items())
    motion_keys = Counter((shapes[i].name, d.direction, d.end_cell) for i, d in descriptors.items())

    samples = []
    for object_id, descriptor in descriptors.items():
        shape = shapes[object_id]
        if motion_keys[shape.name, descriptor.direction, descriptor.end_cell] > 1:
            if strict:
                raise AmbiguousExpressionError(f"{clip.clip_id}: two {shape.name}s move "
                                               f"{descriptor.direction.value} to the {descriptor.end_cell}.")
            logger.debug("%s: skipping ambiguous motion expression of object %d",
                         clip.clip_id, object_id)
            continue
        styles = [ExpressionStyle.MOTION]
        if names[shape.name] == 1:
            styles.append(ExpressionStyle.APPEARANCE)
        if spatial_keys[shape.name, start_cells[object_id]] == 1:
            styles.append(ExpressionStyle.SPATIAL)
        for style in styles:
            samples.append(ReferringSample(clip.clip_id, render_expression(descriptor, shape, style),
                                           {object_id}, style))
    return descriptors, sorted(samples, key=ReferringSample.sort_key)


def generate_clip(spec: GenerationSpec, seed, index=0, return_plan=False):
    """
    Generate clip number index of a benchmark. Deterministic in (spec, seed, index).

    Returns:
        (clip, samples), or (clip, samples, plan) with return_plan.
    """
    clip_id = f"clip_{index:04d}"
    for attempt in range(spec.max_attempts):
        rng = rng_for(seed, "clip", index, attempt)
        plan = plan_clip(spec, rng, clip_id)
        try:
            clip = render_plan(plan, spec, rng)
            _, samples = describe_clip(clip, spec.grid_mode, strict=True)
        except (LayoutRejected, AmbiguousExpressionError) as err:
            logger.debug("Attempt %d rejected: %s", attempt, err)
            continue
        return (clip, samples, plan) if return_plan else (clip, samples)
    raise RuntimeError(f"Could not generate {clip_id} in {spec.max_attempts} attempts.")


def slice_clip(clip: VideoClip, segment: Segment, clip_id=None) -> VideoClip:
    """
    Frames [start, stop) of a clip. Objects never visible in the slice are dropped.
    """
    start, stop = segment
    if not 0 <= start < stop <= clip.num_frames:
        raise ValueError(f"Segment {segment} outside clip of {clip.num_frames} frames.")
    masks = clip.masks[start:stop]
    present = set(int(i) for i in np.unique(masks)) - {0}
    objects = tuple(ObjectTrack(o.object_id, o.class_id, o.per_frame_bbox[start:stop], o.attributes)
                    for o in clip.objects if o.object_id in present)
    return VideoClip(clip_id or f"{clip.clip_id}_{start:04d}", clip.frames[start:stop], masks, objects)


def _plan_recording(spec: GenerationSpec, rng, clip_id):
    num_frames = int(rng.integers(spec.recording_frames[0], spec.recording_frames[1] + 1))
    count = int(rng.integers(spec.min_objects, min(spec.max_objects, 4) + 1))
    names = _pick_names(rng, count, rng.random() < spec.distractor_prob)
    objects = []
    step_frames = set()
    for object_id, (kind, color) in enumerate(names, start=1):
        shape = ShapeSpec(kind, color, int(rng.integers(spec.min_size, spec.max_size + 1)))
        margin = shape.half + 1
        num_steps = int(rng.integers(2, 5))
        times = sorted(set([0, num_frames - 1] + list(rng.integers(1, num_frames - 1, size=num_steps - 1))))
        step_frames.update(times[1:-1])
        waypoints = [(t, *_inner_point(rng, margin, spec.frame_size)) for t in times]
        objects.append(PlannedObject(object_id, shape, Trajectory(waypoints, (True,) * num_frames)))
    return ClipPlan(clip_id, num_frames, tuple(objects)), sorted(step_frames)


def generate_recording(spec: GenerationSpec, seed, index=0):
    """
    Render a long recording in which objects change direction at random step
    frames, cut it at a random subset of those steps, merge segments shorter
    than spec.min_segment into their neighbours, and describe each segment as
    its own clip.

    Returns:
        List of (clip, samples) pairs, one per segment with at least one sample.
    """
    recording_id = f"rec_{index:04d}"
    for attempt in range(spec.max_attempts):
        rng = rng_for(seed, "recording", index, attempt)
        plan, steps = _plan_recording(spec, rng, recording_id)
        try:
            recording = render_plan(plan, spec, rng)
        except LayoutRejected as err:
            logger.debug("Attempt %d rejected: %s", attempt, err)
            continue
        cuts = sorted(int(t) for t in steps if rng.random() < 0.5)
        bounds = [0] + cuts + [plan.num_frames]
        segments = [Segment(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        segments = merge_short_segments(segments, spec.min_segment)

        entries = []
        for k, segment in enumerate(segments):
            clip = slice_clip(recording, segment, f"{recording_id}_{k:02d}")
            _, samples = describe_clip(clip, spec.grid_mode, strict=False)
            if samples:
                entries.append((clip, samples))
        return entries
    raise RuntimeError(f"Could not generate {recording_id} in {spec.max_attempts} attempts.")


def _split_group(clip_id):
    # Segments of one recording stay in the same split
    return clip_id.rsplit("_", 1)[0] if clip_id.startswith("rec_") else clip_id


def split_clips(clip_ids: Sequence[str], seed) -> Dict[str, List[str]]:
    """
    Disjoint 70/15/15 train/val/test split by clip (recording segments are
    kept together).
    """
    groups = sorted(set(_split_group(c) for c in clip_ids))
    order = rng_for(seed, "split").permutation(len(groups))
    n_val = int(round(SPLIT_FRACTIONS[1][1] * len(groups)))
    n_test = int(round(SPLIT_FRACTIONS[2][1] * len(groups)))
    n_train = len(groups) - n_val - n_test
    assignment = {}
    for rank, i in enumerate(order):
        assignment[groups[i]] = "train" if rank < n_train else ("val" if rank < n_train + n_val else "test")
    splits = {name: [] for name, _ in SPLIT_FRACTIONS}
    for clip_id in sorted(clip_ids):
        splits[assignment[_split_group(clip_id)]].append(clip_id)
    return splits


def _clip_job(spec, seed, index):
    return [generate_clip(spec, seed, index)]


def _recording_job(spec, seed, index):
    return generate_recording(spec, seed, index)


def _run_jobs(job, count, workers, desc):
    if count == 0:
        return []
    results = []
    if workers and workers > 1:
        with Pool(workers) as pool:
            for result in tqdm(pool.imap(job, range(count)), total=count, desc=desc):
                results.extend(result)
    else:
        for index in tqdm(range(count), desc=desc):
            results.extend(job(index))
    return results


def generate_benchmark(spec: GenerationSpec, seed, out_dir, num_clips, num_recordings=0,
                       workers: Optional[int] = None):
    """
    Generate and save a benchmark: manifest.json, splits.json and PNG frames
    and masks under out_dir. Output does not depend on workers.

    Returns:
        List of (clip, samples) pairs.
    """
    entries = _run_jobs(partial(_clip_job, spec, seed), num_clips, workers, "Clips")
    entries += _run_jobs(partial(_recording_job, spec, seed), num_recordings, workers, "Recordings")
    os.makedirs(out_dir, exist_ok=True)
    save_manifest(entries, os.path.join(out_dir, MANIFEST_NAME))
    save_splits(split_clips([clip.clip_id for clip, _ in entries], seed), out_dir)
    logger.info("Generated %d clips in %s", len(entries), out_dir)
    return entries


def dataset_statistics(entries) -> Dict[str, object]:
    """
    Counts of clips, frames, objects and samples, samples per style, mean
    expression length in words and vocabulary size.
    """
    samples = [s for _, clip_samples in entries for s in clip_samples]
    words = [s.expression.lower().replace(",", "").split() for s in samples]
    styles = Counter(s.style.value for s in samples)
    distractor_clips = 0
    for clip, _ in entries:
        names = Counter((o.attributes.get("color"), o.attributes.get("shape")) for o in clip.objects)
        distractor_clips += any(n > 1 for n in names.values())
    stats = {
        "clips": len(entries),
        "frames": sum(clip.num_frames for clip, _ in entries),
        "objects": sum(len(clip.objects) for clip, _ in entries),
        "distractor_clips": distractor_clips,
        "samples": len(samples),
        "mean_words": float(np.mean([len(w) for w in words])) if words else 0.0,
        "vocabulary": len(set(w for ws in words for w in ws)),
    }
    for style in ExpressionStyle:
        stats[f"samples_{style.value}"] = styles.get(style.value, 0)
    return stats
