"""
Desk-scale convolutional backbone producing a stride 4/8/16/32 feature pyramid
and a stride 4 mask feature map.
"""

from collections import namedtuple
from typing import Sequence

import torch
from torch import nn
from torch.nn import functional as F

from ..core.seeding import fork_torch_rng

__all__ = ["FeaturePyramid", "ToyBackbone", "STRIDES", "padded_size", "pad_frames", "mask_grid_size"]

STRIDES = (4, 8, 16, 32)

FeaturePyramid = namedtuple("FeaturePyramid", ("levels", "mask_features"))
FeaturePyramid.__doc__ = """
Channel-last features. levels[i] has shape [T, H/s, W/s, C_s] for
s = STRIDES[i]; mask_features has shape [T, H/4, W/4, d_m].
"""


def padded_size(height, width, canvas=None):
    """
    Smallest multiple of 32 covering (height, width), or canvas if the frame
    fits inside it.
    """
    stride = STRIDES[-1]
    size = (-(-height // stride) * stride, -(-width // stride) * stride)
    if canvas is not None and height <= canvas[0] and width <= canvas[1]:
        size = tuple(canvas)
    return size


def pad_frames(frames, size):
    # Zeros go at the bottom and right
    height, width = frames.shape[1:3]
    if (height, width) == tuple(size):
        return frames
    if size[0] < height or size[1] < width:
        raise ValueError(f"Cannot pad {height}x{width} frames to {size[0]}x{size[1]}.")
    return F.pad(frames, (0, 0, 0, size[1] - width, 0, size[0] - height))


def mask_grid_size(height, width):
    """
    Stride 4 cells whose centers lie inside a height x width frame.
    """
    stride = STRIDES[0]
    return (height + stride // 2 - 1) // stride, (width + stride // 2 - 1) // stride


class _MixBlock(nn.Module):
    """
    Residual pointwise channel mixing.
    """
    def __init__(self, channels):
        super().__init__()
        self.mix = nn.Conv2d(channels, channels, kernel_size=1)

    def forward(self, x):
        return x + F.relu(self.mix(x))


def _down(in_channels, out_channels):
    return nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=2, padding=1)


class ToyBackbone(nn.Module):
    """
    Four convolutional stages. Stage 1 downsamples twice (net stride 4), every
    later stage once. There are no normalisation layers, so with zero biases a
    zero image maps to zero features.

    Args:
        channels (Sequence[int]): Channel count per stage.
        mask_dim (int): Channel count d_m of the mask feature map.
        seed (int): Seed for parameter initialisation.
    """
    def __init__(self, channels: Sequence[int] = (32, 64, 128, 256), mask_dim=32, seed=0):
        super().__init__()
        if len(channels) != len(STRIDES):
            raise ValueError(f"Backbone needs {len(STRIDES)} stage widths, got {len(channels)}.")
        self.channels = tuple(channels)
        self.mask_dim = mask_dim

        c1, c2, c3, c4 = self.channels
        self.stages = nn.ModuleList([
            nn.Sequential(_down(3, c1), nn.ReLU(), _down(c1, c1), _MixBlock(c1)),
            nn.Sequential(_down(c1, c2), _MixBlock(c2)),
            nn.Sequential(_down(c2, c3), _MixBlock(c3)),
            nn.Sequential(_down(c3, c4), _MixBlock(c4)),
        ])
        self.lateral = nn.ModuleList([nn.Conv2d(c, mask_dim, kernel_size=1) for c in self.channels])
        self.smooth = nn.Conv2d(mask_dim, mask_dim, kernel_size=3, padding=1)

        with fork_torch_rng(seed):
            self.reset_parameters()

    def reset_parameters(self):
        for module in self.modules():
            if isinstance(module, nn.Conv2d):
                nn.init.kaiming_normal_(module.weight, nonlinearity="relu")
                nn.init.zeros_(module.bias)

    @staticmethod
    def check_input(frames):
        if frames.ndim != 4 or frames.shape[-1] != 3:
            raise ValueError(f"Frames must have shape [T, H, W, 3], got {tuple(frames.shape)}.")
        height, width = frames.shape[1:3]
        if height % STRIDES[-1] or width % STRIDES[-1]:
            raise ValueError(f"Frame size must be a multiple of {STRIDES[-1]}, got {height}x{width}.")

    def forward(self, frames) -> FeaturePyramid:
        """
        Args:
            frames (Tensor): [T, H, W, 3] in [0, 1].
        """
        self.check_input(frames)
        x = frames.permute(0, 3, 1, 2)
        features = []
        for stage in self.stages:
            x = stage(x)
            features.append(x)

        # Top-down pathway: coarsest lateral upsampled and summed into finer ones
        merged = self.lateral[-1](features[-1])
        for lateral, feature in zip(reversed(self.lateral[:-1]), reversed(features[:-1])):
            merged = lateral(feature) + F.interpolate(merged, size=feature.shape[-2:], mode="nearest")
        mask_features = self.smooth(merged)

        levels = [f.permute(0, 2, 3, 1) for f in features]
        return FeaturePyramid(levels, mask_features.permute(0, 2, 3, 1))

    def extract_features(self, frames):
        return self(frames)
