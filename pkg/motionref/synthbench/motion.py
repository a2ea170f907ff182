"""
Trajectories and the motion descriptors derived from observed object tracks.
"""

import enum
import math
from collections import namedtuple
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

__all__ = ["Direction", "Side", "GridMode", "Trajectory", "MotionDescriptor", "Segment",
           "estimate_direction", "grid_cell", "grid_cells", "nearest_side", "describe_track",
           "merge_short_segments", "STATIONARY_THRESHOLD"]

STATIONARY_THRESHOLD = 3.0


class Direction(str, enum.Enum):
    STATIONARY = "stationary"
    RIGHT = "right"
    DOWN_RIGHT = "down-right"
    DOWN = "down"
    DOWN_LEFT = "down-left"
    LEFT = "left"
    UP_LEFT = "up-left"
    UP = "up"
    UP_RIGHT = "up-right"


# Compass sectors in order of increasing screen angle (y points down)
_SECTORS = (Direction.RIGHT, Direction.DOWN_RIGHT, Direction.DOWN, Direction.DOWN_LEFT,
            Direction.LEFT, Direction.UP_LEFT, Direction.UP, Direction.UP_RIGHT)


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    TOP = "top"
    BOTTOM = "bottom"
    NONE = "none"


class GridMode(str, enum.Enum):
    GRID_2X2 = "2x2"
    GRID_3X3 = "3x3"

    @property
    def size(self):
        return 2 if self == GridMode.GRID_2X2 else 3

    @property
    def rows(self):
        return ("top", "bottom") if self == GridMode.GRID_2X2 else ("top", "mid", "bottom")

    @property
    def cols(self):
        return ("left", "right") if self == GridMode.GRID_2X2 else ("left", "center", "right")


def grid_cells(grid_mode) -> List[str]:
    grid_mode = GridMode(grid_mode)
    return [f"{row}-{col}" for row in grid_mode.rows for col in grid_mode.cols]


@dataclass(frozen=True)
class Trajectory:
    """
    Piecewise linear path through (frame, x, y) waypoints. visibility[t] says
    whether the object is in the scene at frame t.
    """
    waypoints: Tuple[Tuple[int, float, float], ...]
    visibility: Tuple[bool, ...]

    def __post_init__(self):
        waypoints = tuple((int(t), float(x), float(y)) for t, x, y in self.waypoints)
        if not waypoints:
            raise ValueError("Trajectory needs at least one waypoint.")
        frames = [t for t, _, _ in waypoints]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError(f"Waypoint frames must be strictly increasing, got {frames}.")
        object.__setattr__(self, "waypoints", waypoints)
        object.__setattr__(self, "visibility", tuple(bool(v) for v in self.visibility))

    @property
    def num_frames(self):
        return len(self.visibility)

    def position(self, t):
        frames = [w[0] for w in self.waypoints]
        x = np.interp(t, frames, [w[1] for w in self.waypoints])
        y = np.interp(t, frames, [w[2] for w in self.waypoints])
        return float(x), float(y)

    def positions(self):
        return [self.position(t) for t in range(self.num_frames)]


@dataclass(frozen=True)
class MotionDescriptor:
    direction: Direction
    start_cell: str
    end_cell: str
    entry_side: Side = Side.NONE
    exit_side: Side = Side.NONE
    grid_mode: GridMode = GridMode.GRID_3X3

    def __post_init__(self):
        for name, enum_type in (("direction", Direction), ("entry_side", Side),
                                ("exit_side", Side), ("grid_mode", GridMode)):
            object.__setattr__(self, name, enum_type(getattr(self, name)))
        valid = grid_cells(self.grid_mode)
        for cell in (self.start_cell, self.end_cell):
            if cell not in valid:
                raise ValueError(f"Cell {cell!r} is not valid for a {self.grid_mode.value} grid.")

    @property
    def appears(self):
        return self.entry_side != Side.NONE

    @property
    def disappears(self):
        return self.exit_side != Side.NONE


def estimate_direction(centers: Sequence[Sequence[float]], threshold=STATIONARY_THRESHOLD) -> Direction:
    """
    Compass direction of the net displacement between the first and last
    center. Points are (x, y) or (t, x, y) with y pointing down.

    Sectors are 45 degrees wide and centered on the compass directions. An
    angle exactly on a sector edge belongs to the sector with the smaller
    angle, which is the counter-clockwise one on screen.
    """
    if len(centers) < 2:
        raise ValueError(f"Direction needs at least 2 visible frames, got {len(centers)}.")
    x0, y0 = centers[0][-2:]
    x1, y1 = centers[-1][-2:]
    dx, dy = x1 - x0, y1 - y0
    if math.hypot(dx, dy) < threshold:
        return Direction.STATIONARY
    theta = math.degrees(math.atan2(dy, dx))
    return _SECTORS[math.ceil((theta - 22.5) / 45) % 8]


def grid_cell(point, frame_size, grid_mode=GridMode.GRID_3X3) -> str:
    """
    Name of the grid cell holding point (x, y). Bins are half-open.
    """
    grid_mode = GridMode(grid_mode)
    x, y = point
    height, width = frame_size
    if not (0 <= x < width and 0 <= y < height):
        raise ValueError(f"Point {point} lies outside a {width}x{height} frame.")
    g = grid_mode.size
    col = min(int(math.floor(x * g / width)), g - 1)
    row = min(int(math.floor(y * g / height)), g - 1)
    return f"{grid_mode.rows[row]}-{grid_mode.cols[col]}"


def nearest_side(point, frame_size) -> Side:
    x, y = point
    height, width = frame_size
    distances = ((x, Side.LEFT), (width - x, Side.RIGHT), (y, Side.TOP), (height - y, Side.BOTTOM))
    return min(distances, key=lambda d: d[0])[1]


def describe_track(centers, num_frames, frame_size, grid_mode=GridMode.GRID_3X3) -> MotionDescriptor:
    """
    Motion descriptor of an observed track.

    Args:
        centers: (t, x, y) bounding-box centers of the visible frames.
        num_frames (int): Clip length. An object invisible on the first
            (last) frame appears (disappears) through the side nearest to
            its first (last) visible center.
        frame_size: (H, W).
    """
    direction = estimate_direction(centers)
    first_t, *first = centers[0]
    last_t, *last = centers[-1]
    entry = nearest_side(first, frame_size) if first_t > 0 else Side.NONE
    exit_ = nearest_side(last, frame_size) if last_t < num_frames - 1 else Side.NONE
    return MotionDescriptor(direction=direction,
                            start_cell=grid_cell(first, frame_size, grid_mode),
                            end_cell=grid_cell(last, frame_size, grid_mode),
                            entry_side=entry, exit_side=exit_, grid_mode=grid_mode)


class Segment(namedtuple("Segment", ("start", "stop"))):
    """
    Half-open frame range [start, stop).
    """
    __slots__ = ()

    @property
    def length(self):
        return self.stop - self.start


def merge_short_segments(segments: Sequence[Segment], min_frames=10) -> List[Segment]:
    """
    Merge every contiguous segment shorter than min_frames into its
    predecessor, or into its successor when it has no predecessor. Every
    output segment has at least min_frames frames unless it is the only one.
    """
    merged: List[Segment] = []
    pending: Optional[Segment] = None
    for segment in segments:
        segment = Segment(*segment)
        if pending is not None:
            segment = Segment(pending.start, segment.stop)
            pending = None
        if segment.length >= min_frames:
            merged.append(segment)
        elif merged:
            merged[-1] = Segment(merged[-1].start, segment.stop)
        else:
            pending = segment
    if pending is not None:
        if merged:
            merged[-1] = Segment(merged[-1].start, pending.stop)
        else:
            merged.append(pending)
    return merged
