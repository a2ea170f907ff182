# Import shortcuts for the benchmark generator
from .shapes import ShapeKind, Color, ShapeSpec, rasterize_shape, render_background, COLOR_RGB, MIN_SHAPE_SIZE
from .motion import (Direction, Side, GridMode, Trajectory, MotionDescriptor, Segment, estimate_direction,
                     grid_cell, grid_cells, nearest_side, describe_track, merge_short_segments,
                     STATIONARY_THRESHOLD)
from .expressions import (ExpressionVariant, ParsedExpression, ExpressionParseError, AmbiguousExpressionError,
                          render_expression, parse_expression, restyle_expression, GENERIC_NAME)
from .generate import (GenerationSpec, PlannedObject, ClipPlan, LayoutRejected, plan_clip, render_plan,
                       generate_clip, generate_recording, describe_clip, slice_clip, split_clips,
                       generate_benchmark, dataset_statistics)

__all__ = ["ShapeKind", "Color", "ShapeSpec", "rasterize_shape", "render_background", "COLOR_RGB",
           "MIN_SHAPE_SIZE", "Direction", "Side", "GridMode", "Trajectory", "MotionDescriptor", "Segment",
           "estimate_direction", "grid_cell", "grid_cells", "nearest_side", "describe_track",
           "merge_short_segments", "STATIONARY_THRESHOLD", "ExpressionVariant", "ParsedExpression",
           "ExpressionParseError", "AmbiguousExpressionError", "render_expression", "parse_expression",
           "restyle_expression", "GENERIC_NAME", "GenerationSpec", "PlannedObject", "ClipPlan",
           "LayoutRejected", "plan_clip", "render_plan", "generate_clip", "generate_recording",
           "describe_clip", "slice_clip", "split_clips", "generate_benchmark", "dataset_statistics"]
