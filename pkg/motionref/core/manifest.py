"""
Manifest I/O.

A dataset is one JSON manifest plus, per clip, a directory of RGB frame PNGs
and a directory of 8 bit mask PNGs whose pixel value is the object id. Paths in
the manifest are relative to the manifest's directory.
"""

import os
import json
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Sequence, Tuple

import numpy as np
import jsonschema
from PIL import Image

from ..config import load_schema
from ..logging import get_logger
from .types import ObjectTrack, ReferringSample, VideoClip, sort_samples

__all__ = ["ManifestError", "ManifestIOError", "load_manifest", "save_manifest",
           "load_split", "save_splits", "frames_from_uint8", "MANIFEST_NAME", "SPLITS_NAME"]

logger = get_logger("core.manifest")

MANIFEST_NAME = "manifest.json"
SPLITS_NAME = "splits.json"

ClipEntry = Tuple[VideoClip, List[ReferringSample]]


class ManifestError(ValueError):
    """
    The manifest violates its schema or a type invariant. The message names
    the offending field.
    """


class ManifestIOError(OSError):
    """
    A frame or mask file referenced by the manifest could not be read.
    """
    def __init__(self, clip_id, message):
        super().__init__(f"clip {clip_id}: {message}")
        self.clip_id = clip_id


def frames_from_uint8(frames):
    """
    8 bit RGB to float32 in [0, 1], the same conversion used on load.
    """
    return np.asarray(frames, dtype=np.uint8).astype(np.float32) / np.float32(255.0)


def _frame_name(t):
    return f"frame_{t:04d}.png"


def _mask_name(t):
    return f"mask_{t:04d}.png"


def _is_png(name, prefix):
    return name.startswith(prefix) and name.endswith(".png")


def _clear_pngs(directory, prefix):
    for name in os.listdir(directory):
        if _is_png(name, prefix):
            os.remove(os.path.join(directory, name))


def _read_png(path, clip_id, mode):
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert(mode))
    except FileNotFoundError as err:
        raise ManifestIOError(clip_id, f"missing file {path}") from err
    except OSError as err:
        raise ManifestIOError(clip_id, f"unreadable file {path} ({err})") from err


def _load_clip(root, entry) -> VideoClip:
    clip_id = entry["clip_id"]
    frame_dir = os.path.join(root, entry["frame_dir"])
    mask_dir = os.path.join(root, entry["mask_dir"])
    if not os.path.isdir(frame_dir):
        raise ManifestIOError(clip_id, f"missing frame directory {frame_dir}")
    num_frames = entry.get("num_frames")
    if num_frames is None:
        num_frames = len([f for f in os.listdir(frame_dir) if _is_png(f, "frame_")])
    if num_frames == 0:
        raise ManifestError(f"clips[{clip_id}].frame_dir: no frames found in {frame_dir}")

    frames = np.stack([_read_png(os.path.join(frame_dir, _frame_name(t)), clip_id, "RGB")
                       for t in range(num_frames)])
    masks = np.stack([_read_png(os.path.join(mask_dir, _mask_name(t)), clip_id, "L")
                      for t in range(num_frames)])

    objects = []
    for obj in entry["objects"]:
        boxes = [None] * num_frames
        for key, box in obj["bboxes"].items():
            t = int(key)
            if t >= num_frames:
                raise ManifestError(f"clips[{clip_id}].objects[{obj['object_id']}].bboxes.{key}: "
                                    f"frame index beyond clip length {num_frames}")
            boxes[t] = box
        objects.append(ObjectTrack(object_id=obj["object_id"], class_id=obj["class_id"],
                                   per_frame_bbox=tuple(boxes), attributes=obj["attributes"]))

    clip = VideoClip(clip_id=clip_id, frames=frames_from_uint8(frames),
                     masks=masks, objects=tuple(objects))
    try:
        clip.validate()
    except ValueError as err:
        raise ManifestError(f"clips[{clip_id}]: {err}") from err
    return clip


def load_manifest(path, workers=None) -> List[ClipEntry]:
    """
    Load a manifest and materialise every clip it references.

    Args:
        path: Path to the manifest JSON file.
        workers (Optional[int]): If given, clips are decoded on a thread pool
            of this size. Output order does not depend on it.

    Returns:
        List of (clip, samples) pairs ordered by clip_id.
    """
    with open(path, "r") as f:
        data = json.load(f)
    try:
        jsonschema.validate(data, load_schema("manifest"))
    except jsonschema.ValidationError as err:
        field_path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ManifestError(f"{field_path}: {err.message}") from err

    root = os.path.dirname(os.path.abspath(path))
    entries = sorted(data["clips"], key=lambda c: c["clip_id"])
    clip_ids = [c["clip_id"] for c in entries]
    if len(set(clip_ids)) != len(clip_ids):
        raise ManifestError("clips.clip_id: duplicate clip ids")

    if workers:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            clips = list(pool.map(lambda e: _load_clip(root, e), entries))
    else:
        clips = [_load_clip(root, e) for e in entries]

    by_id: Dict[str, ClipEntry] = {clip.clip_id: (clip, []) for clip in clips}
    for i, raw in enumerate(data["samples"]):
        if raw["clip_id"] not in by_id:
            raise ManifestError(f"samples.{i}.clip_id: unknown clip {raw['clip_id']}")
        clip, samples = by_id[raw["clip_id"]]
        sample = ReferringSample(clip_id=raw["clip_id"], expression=raw["expression"],
                                 target_ids=raw["target_ids"], style=raw["style"])
        try:
            sample.check_against(clip)
        except ValueError as err:
            raise ManifestError(f"samples.{i}.target_ids: {err}") from err
        samples.append(sample)

    logger.info("Loaded %d clips and %d samples from %s",
                len(clips), len(data["samples"]), path)
    return [(clip, sort_samples(samples)) for clip, samples in by_id.values()]


def _clip_entry(clip: VideoClip, frame_dir, mask_dir):
    objects = []
    for obj in clip.objects:
        bboxes = {str(t): list(box) for t, box in enumerate(obj.per_frame_bbox) if box is not None}
        objects.append({"object_id": obj.object_id,
                        "class_id": obj.class_id,
                        "attributes": dict(obj.attributes),
                        "bboxes": bboxes})
    return {"clip_id": clip.clip_id, "frame_dir": frame_dir, "mask_dir": mask_dir,
            "num_frames": clip.num_frames, "objects": objects}


def save_manifest(data: Sequence[ClipEntry], path):
    """
    Write clips (PNG frames and masks) and the manifest. Clip directories are
    placed under clips/<clip_id>/ next to the manifest.
    """
    root = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(root, exist_ok=True)
    except OSError as err:
        raise OSError(f"Unable to create dataset directory {root}: {err}") from err

    clip_entries = []
    sample_entries = []
    for clip, samples in sorted(data, key=lambda e: e[0].clip_id):
        frame_dir = f"clips/{clip.clip_id}/frames"
        mask_dir = f"clips/{clip.clip_id}/masks"
        os.makedirs(os.path.join(root, frame_dir), exist_ok=True)
        os.makedirs(os.path.join(root, mask_dir), exist_ok=True)
        # Frames of an earlier, longer clip with the same id
        _clear_pngs(os.path.join(root, frame_dir), "frame_")
        _clear_pngs(os.path.join(root, mask_dir), "mask_")
        frames_u8 = np.rint(clip.frames * 255.0).astype(np.uint8)
        for t in range(clip.num_frames):
            Image.fromarray(frames_u8[t]).save(os.path.join(root, frame_dir, _frame_name(t)))
            Image.fromarray(np.ascontiguousarray(clip.masks[t])).save(os.path.join(root, mask_dir, _mask_name(t)))
        clip_entries.append(_clip_entry(clip, frame_dir, mask_dir))
        for sample in sort_samples(samples):
            sample_entries.append({"clip_id": sample.clip_id,
                                   "expression": sample.expression,
                                   "target_ids": sorted(sample.target_ids),
                                   "style": sample.style.value})

    with open(path, "w") as f:
        json.dump({"clips": clip_entries, "samples": sample_entries}, f, indent=2)
    logger.info("Saved %d clips to %s", len(clip_entries), path)


def save_splits(splits: Dict[str, Sequence[str]], data_dir):
    with open(os.path.join(data_dir, SPLITS_NAME), "w") as f:
        json.dump({name: sorted(ids) for name, ids in splits.items()}, f, indent=2)


def load_split(data_dir, split=None, workers=None) -> List[ClipEntry]:
    """
    Load the clips of one split of a generated dataset directory. With split
    None, or when the directory has no splits.json, every clip is returned.
    """
    entries = load_manifest(os.path.join(data_dir, MANIFEST_NAME), workers=workers)
    if split is None:
        return entries
    splits_path = os.path.join(data_dir, SPLITS_NAME)
    if not os.path.exists(splits_path):
        logger.warning("No %s in %s, using every clip for split %s", SPLITS_NAME, data_dir, split)
        return entries
    with open(splits_path, "r") as f:
        splits = json.load(f)
    if split not in splits:
        raise ValueError(f"Unknown split {split!r}. Available: {sorted(splits)}.")
    wanted = set(splits[split])
    return [entry for entry in entries if entry[0].clip_id in wanted]
