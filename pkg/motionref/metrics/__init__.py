from .measures import iou, dice, boundary_mask, boundary_f, default_tolerance, frame_measures, METRIC_NAMES
from .report import EvalReport, evaluate, combine_reports, pprint_report, object_key

__all__ = ["iou", "dice", "boundary_mask", "boundary_f", "default_tolerance", "frame_measures",
           "METRIC_NAMES", "EvalReport", "evaluate", "combine_reports", "pprint_report", "object_key"]
