"""
Command line interface.

    motionref train --config cfg.json --data DIR --out DIR
    motionref eval --checkpoint CKPT --data DIR --split val --report out.json --plot figures
    motionref ablate-kfs --checkpoint CKPT --data DIR --strategies ours,uniform,cosine --tprime 4,8,16
    motionref ablate-expr --config cfg.json --data DIR --train-styles "motion,appearance;appearance"
    motionref ablate-variants --config cfg.json --data DIR --train-variants origin,no_name
"""

import os
import sys
import argparse

from .config import ConfigError, RunConfig, load_config
from .core.manifest import ManifestError, ManifestIOError
from .logging import configure_logging, get_logger
from .metrics.report import pprint_report
from .plot import plot_tools
from .tools.ablate import AblationSpec, ablate_expression_variants, ablate_expressions, ablate_keyframes
from .tools.checkpoint import ConfigMismatchError
from .tools.evaluate import evaluate_run, save_overlays
from .tools.train import TrainingDivergedError, train

__all__ = ["main", "build_parser"]

logger = get_logger("cli")

ALL_STYLES = "appearance,spatial,motion"


def _csv(text):
    return [item.strip() for item in text.split(",") if item.strip()]


def _ints(text):
    return [int(item) for item in _csv(text)]


def _style_sets(text):
    return [_csv(group) for group in text.split(";") if group.strip()]


def _config(args):
    return load_config(args.config) if args.config else RunConfig()


def _train(args):
    config = _config(args)
    _, log = train(config, args.data, args.out, styles=args.styles, variant=args.variant,
                   progress="log" if args.quiet else True)
    if log:
        fig = plot_tools.plot_training_curve(log, ("total", "cls", "mask_bce", "mask_dice"))
        plot_tools.save_figure(fig, "training_curve", args.out)


def _eval(args):
    config = load_config(args.config) if args.config else None
    report = evaluate_run(args.checkpoint, args.data, args.split, strategy=args.strategy,
                          keyframe_count=args.tprime, styles=args.styles, variant=args.variant,
                          config=config, progress=True, report_path=args.report)
    pprint_report(report)
    if args.plot is not None:
        save_overlays(args.checkpoint, args.data, args.split, args.plot, count=args.plot_count,
                      strategy=args.strategy, keyframe_count=args.tprime, config=config)


def _ablate_kfs(args):
    spec = AblationSpec(strategies=_csv(args.strategies), tprime_values=_ints(args.tprime))
    ablate_keyframes(spec, args.checkpoint, args.data, args.split, out_dir=args.out)


def _ablate_expr(args):
    ablate_expressions(_style_sets(args.train_styles), _csv(args.test_styles), _config(args), args.data,
                       out_dir=args.out, split=args.split)


def _ablate_variants(args):
    ablate_expression_variants(_csv(args.train_variants), _csv(args.test_variants), _config(args), args.data,
                               out_dir=args.out, split=args.split)


def build_parser():
    parser = argparse.ArgumentParser(prog="motionref",
                                     description="Motion-guided referring video object segmentation")
    parser.add_argument("--log-level", default="INFO")
    parser.add_argument("--log-file", default=None)
    commands = parser.add_subparsers(dest="command", required=True)

    cmd = commands.add_parser("train", help="Train a segmenter")
    cmd.add_argument("--config", default=None, help="RunConfig JSON, defaults if omitted")
    cmd.add_argument("--data", required=True)
    cmd.add_argument("--out", required=True)
    cmd.add_argument("--styles", default=None, help="Comma separated training styles")
    cmd.add_argument("--variant", default="origin", choices=("origin", "no_location", "no_name"))
    cmd.add_argument("--quiet", action="store_true", help="Send progress to the log")
    cmd.set_defaults(func=_train)

    cmd = commands.add_parser("eval", help="Evaluate a checkpoint")
    cmd.add_argument("--checkpoint", required=True)
    cmd.add_argument("--data", required=True)
    cmd.add_argument("--split", default="val")
    cmd.add_argument("--report", default=None)
    cmd.add_argument("--config", default=None, help="Must match the checkpoint's config")
    cmd.add_argument("--strategy", default="ours", choices=("ours", "uniform", "cosine", "all"))
    cmd.add_argument("--tprime", type=int, default=None)
    cmd.add_argument("--styles", default=None)
    cmd.add_argument("--variant", default="origin", choices=("origin", "no_location", "no_name"))
    cmd.add_argument("--plot", default=None, metavar="DIR", help="Save prediction overlays to DIR")
    cmd.add_argument("--plot-count", type=int, default=4)
    cmd.set_defaults(func=_eval)

    cmd = commands.add_parser("ablate-kfs", help="Key frame strategy against T'")
    cmd.add_argument("--checkpoint", required=True)
    cmd.add_argument("--data", required=True)
    cmd.add_argument("--split", default="val")
    cmd.add_argument("--strategies", default="ours,uniform,cosine")
    cmd.add_argument("--tprime", default="4,8,16")
    cmd.add_argument("--out", default=None)
    cmd.set_defaults(func=_ablate_kfs)

    cmd = commands.add_parser("ablate-expr", help="Training styles against test styles")
    cmd.add_argument("--config", default=None)
    cmd.add_argument("--data", required=True)
    cmd.add_argument("--split", default="val")
    cmd.add_argument("--train-styles", default=f"{ALL_STYLES};appearance,spatial",
                     help="Semicolon separated style sets")
    cmd.add_argument("--test-styles", default=ALL_STYLES)
    cmd.add_argument("--out", default=None)
    cmd.set_defaults(func=_ablate_expr)

    cmd = commands.add_parser("ablate-variants", help="Training variants against test variants")
    cmd.add_argument("--config", default=None)
    cmd.add_argument("--data", required=True)
    cmd.add_argument("--split", default="val")
    cmd.add_argument("--train-variants", default="origin,no_location,no_name")
    cmd.add_argument("--test-variants", default="origin,no_location,no_name")
    cmd.add_argument("--out", default=None)
    cmd.set_defaults(func=_ablate_variants)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.log_file is not None:
        os.makedirs(os.path.dirname(os.path.abspath(args.log_file)), exist_ok=True)
    configure_logging(args.log_level, args.log_file)
    try:
        args.func(args)
    except (ConfigError, ConfigMismatchError, ManifestError, ManifestIOError) as err:
        logger.error("%s", err)
        return 2
    except TrainingDivergedError as err:
        logger.error("%s", err)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
