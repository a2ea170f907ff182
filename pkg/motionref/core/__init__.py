from .types import BBox, ExpressionStyle, ObjectTrack, VideoClip, ReferringSample, mask_bbox, sort_samples
from .manifest import (ManifestError, ManifestIOError, load_manifest, save_manifest,
                       load_split, save_splits, frames_from_uint8, MANIFEST_NAME, SPLITS_NAME)
from .seeding import rng_for, seed_everything, fork_torch_rng, stable_hash

__all__ = ["BBox", "ExpressionStyle", "ObjectTrack", "VideoClip", "ReferringSample", "mask_bbox",
           "sort_samples", "ManifestError", "ManifestIOError", "load_manifest", "save_manifest",
           "load_split", "save_splits", "frames_from_uint8", "MANIFEST_NAME", "SPLITS_NAME",
           "rng_for", "seed_everything", "fork_torch_rng", "stable_hash"]
