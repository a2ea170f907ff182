"""
Command line interface of the benchmark generator.

    synthbench generate --clips 120 --min-frames 12 --max-frames 20 --size 96 96 \
        --grid 3x3 --seed 0 --out data/bench
"""

import argparse
import sys

import tabulate

from ..logging import configure_logging, get_logger
from .generate import GenerationSpec, dataset_statistics, generate_benchmark

__all__ = ["main", "build_parser"]

logger = get_logger("synthbench.cli")


def build_parser():
    parser = argparse.ArgumentParser(prog="synthbench",
                                     description="Synthetic moving-shape referring segmentation benchmark")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("generate", help="Render clips, masks and expressions")
    gen.add_argument("--clips", type=int, default=120, help="Number of independent clips")
    gen.add_argument("--min-frames", type=int, default=12)
    gen.add_argument("--max-frames", type=int, default=20)
    gen.add_argument("--size", type=int, nargs=2, metavar=("H", "W"), default=(96, 96))
    gen.add_argument("--grid", choices=("2x2", "3x3"), default="3x3")
    gen.add_argument("--min-objects", type=int, default=2)
    gen.add_argument("--max-objects", type=int, default=5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="Output directory")
    gen.add_argument("--recordings", type=int, default=0,
                     help="Number of long recordings cut into additional clips")
    gen.add_argument("--workers", type=int, default=0, help="Worker processes (0: in process)")
    gen.add_argument("--log-level", default="INFO")
    return parser


def _generate(args):
    spec = GenerationSpec(frame_size=tuple(args.size), min_frames=args.min_frames,
                          max_frames=args.max_frames, min_objects=args.min_objects,
                          max_objects=args.max_objects, grid_mode=args.grid)
    entries = generate_benchmark(spec, args.seed, args.out, args.clips, num_recordings=args.recordings,
                                 workers=args.workers)
    stats = dataset_statistics(entries)
    print(tabulate.tabulate(sorted(stats.items()), headers=("Statistic", "Value"), floatfmt=".2f"))
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        if args.command == "generate":
            return _generate(args)
    except ValueError as err:
        logger.error("%s", err)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
