from .plot_tools import save_figure, new_figure, plot_training_curve, plot_keyframe_ablation, plot_clip_overlay

__all__ = ["save_figure", "new_figure", "plot_training_curve", "plot_keyframe_ablation", "plot_clip_overlay"]
