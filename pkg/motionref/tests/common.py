"""
Shared test helpers.
"""

import numpy as np
import torch

from motionref.config import RunConfig
from motionref.core.types import ObjectTrack, ReferringSample, VideoClip, mask_bbox
from motionref.synthbench.generate import GenerationSpec

FD_STEP = 1e-4
FD_RTOL = 1e-3


def tiny_config(**changes):
    """
    A model small enough to run a few steps on CPU in a test.
    """
    base = dict(image_size=(64, 64), num_queries=3, query_dim=16, text_dim=16, mask_dim=8,
                decoder_layers=2, num_heads=2, keyframe_count=2, backbone_channels=(4, 8, 8, 8),
                scorer_hidden=8, max_frames=8, train_clip_length=4, total_steps=3, batch_size=1,
                checkpoint_every=0, val_every=0)
    base.update(changes)
    return RunConfig(**base)


def tiny_spec(**changes):
    base = dict(frame_size=(64, 64), min_frames=8, max_frames=8, min_objects=2, max_objects=3,
                min_size=8, max_size=12, recording_frames=(24, 32))
    base.update(changes)
    return GenerationSpec(**base)


def box_clip(clip_id="clip", num_frames=4, size=(32, 32), boxes=None):
    """
    Clip with solid rectangular objects. boxes maps object id to a list of
    per-frame (x0, y0, x1, y1) boxes or None.
    """
    height, width = size
    masks = np.zeros((num_frames, height, width), dtype=np.uint8)
    for object_id, per_frame in sorted(boxes.items()):
        for t, box in enumerate(per_frame):
            if box is not None:
                x0, y0, x1, y1 = box
                masks[t, y0:y1, x0:x1] = object_id
    frames = np.zeros((num_frames, height, width, 3), dtype=np.float32)
    frames[..., 0] = masks > 0
    objects = tuple(ObjectTrack(object_id, 0, tuple(mask_bbox(masks[t] == object_id) for t in range(num_frames)),
                                {"shape": "square", "color": "red", "size": "4"})
                    for object_id in sorted(boxes))
    return VideoClip(clip_id, frames, masks, objects)


def random_masks(rng, shape, density=None):
    density = rng.uniform(0.1, 0.6) if density is None else density
    return rng.random(shape) < density


def finite_difference_check(loss_fn, param, num_entries=6, seed=0, step=FD_STEP, rtol=FD_RTOL):
    """
    Compare the autograd gradient of loss_fn() with respect to param against
    central differences on a few sampled entries. Everything is expected to
    be float64. Returns the largest relative error.
    """
    param.grad = None
    loss = loss_fn()
    grad, = torch.autograd.grad(loss, param)
    rng = np.random.default_rng(seed)
    flat = param.data.view(-1)
    worst = 0.0
    for index in rng.choice(flat.numel(), size=min(num_entries, flat.numel()), replace=False):
        original = flat[index].item()
        with torch.no_grad():
            flat[index] = original + step
            plus = loss_fn().item()
            flat[index] = original - step
            minus = loss_fn().item()
            flat[index] = original
        numeric = (plus - minus) / (2 * step)
        analytic = grad.reshape(-1)[index].item()
        scale = max(abs(numeric), abs(analytic), 1e-4)
        worst = max(worst, abs(numeric - analytic) / scale)
    assert worst <= rtol, f"finite difference mismatch, relative error {worst}"
    return worst


def sample_for(clip, expression="The red square", target_ids=(1,), style="appearance"):
    return ReferringSample(clip.clip_id, expression, set(target_ids), style)
