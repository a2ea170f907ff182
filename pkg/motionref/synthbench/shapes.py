"""
Solid shapes and textured backgrounds for the synthetic benchmark.
"""

import enum
from dataclasses import dataclass

import numpy as np
from matplotlib.path import Path
from scipy import ndimage

__all__ = ["ShapeKind", "Color", "ShapeSpec", "rasterize_shape", "render_background", "COLOR_RGB",
           "MIN_SHAPE_SIZE"]

MIN_SHAPE_SIZE = 6


class ShapeKind(str, enum.Enum):
    CIRCLE = "circle"
    SQUARE = "square"
    TRIANGLE = "triangle"

    @property
    def class_id(self):
        return list(ShapeKind).index(self)


class Color(str, enum.Enum):
    RED = "red"
    GREEN = "green"
    BLUE = "blue"
    YELLOW = "yellow"
    MAGENTA = "magenta"
    CYAN = "cyan"


COLOR_RGB = {
    Color.RED: (0.90, 0.10, 0.10),
    Color.GREEN: (0.10, 0.80, 0.20),
    Color.BLUE: (0.15, 0.30, 0.95),
    Color.YELLOW: (0.95, 0.90, 0.10),
    Color.MAGENTA: (0.90, 0.15, 0.85),
    Color.CYAN: (0.10, 0.85, 0.90),
}


@dataclass(frozen=True)
class ShapeSpec:
    """
    A shape of side (or diameter) size pixels.
    """
    shape: ShapeKind
    color: Color
    size: int

    def __post_init__(self):
        object.__setattr__(self, "shape", ShapeKind(self.shape))
        object.__setattr__(self, "color", Color(self.color))
        if self.size < MIN_SHAPE_SIZE:
            raise ValueError(f"Shape size must be at least {MIN_SHAPE_SIZE} px, got {self.size}.")

    @property
    def class_id(self):
        return self.shape.class_id

    @property
    def half(self):
        return self.size / 2

    @property
    def name(self):
        return f"{self.color.value} {self.shape.value}"

    def attributes(self):
        return {"shape": self.shape.value, "color": self.color.value, "size": str(self.size)}

    @classmethod
    def from_attributes(cls, attributes):
        return cls(attributes["shape"], attributes["color"], int(attributes["size"]))

    def fits(self, frame_size):
        height, width = frame_size
        return self.size + 2 <= min(height, width)


def _pixel_centers(frame_size):
    height, width = frame_size
    ys, xs = np.mgrid[0:height, 0:width]
    return xs + 0.5, ys + 0.5


def rasterize_shape(spec: ShapeSpec, center, frame_size):
    """
    Boolean [H, W] mask of a shape centered at (x, y), sampled at pixel centers.

    The triangle has vertices (cx - h, cy - h), (cx + h, cy), (cx, cy + h), so
    both its centroid and its bounding-box center sit at (cx, cy).
    """
    cx, cy = center
    h = spec.half
    px, py = _pixel_centers(frame_size)
    if spec.shape == ShapeKind.CIRCLE:
        return (px - cx) ** 2 + (py - cy) ** 2 <= h ** 2
    if spec.shape == ShapeKind.SQUARE:
        return (np.abs(px - cx) <= h) & (np.abs(py - cy) <= h)
    path = Path([(cx - h, cy - h), (cx + h, cy), (cx, cy + h)])
    inside = path.contains_points(np.column_stack((px.ravel(), py.ravel())))
    return inside.reshape(frame_size)


def render_background(frame_size, rng, cell=16):
    """
    Low-frequency muted noise texture, [H, W, 3] in [0, 1].
    """
    height, width = frame_size
    coarse_shape = (max(2, -(-height // cell)), max(2, -(-width // cell)))
    luminance = rng.uniform(0.30, 0.60, size=coarse_shape)
    tint = rng.uniform(-0.05, 0.05, size=coarse_shape + (3,))
    coarse = luminance[..., None] + tint
    zoom = (height / coarse_shape[0], width / coarse_shape[1], 1)
    background = ndimage.zoom(coarse, zoom, order=1, mode="nearest")
    return np.clip(background[:height, :width], 0.0, 1.0)
