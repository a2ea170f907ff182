"""
Ablation runners: key frame strategy against T', and training expression
styles or variants against test styles or variants.
"""

import os
import json
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import tabulate

from ..config import RunConfig
from ..core.types import ExpressionStyle
from ..logging import get_logger
from ..model.keyframes import SelectionStrategy
from ..plot import plot_tools
from ..synthbench.expressions import ExpressionVariant
from .checkpoint import TrainState
from .data import parse_styles
from .evaluate import evaluate_run
from .train import train

__all__ = ["AblationSpec", "ablate_keyframes", "ablate_expressions", "ablate_expression_variants",
           "pprint_keyframe_table", "pprint_grid", "GRID_METRICS"]

logger = get_logger("tools.ablate")

GRID_METRICS = ("J", "F", "J&F")
ALL_STYLES = tuple(s.value for s in ExpressionStyle)


@dataclass(frozen=True)
class AblationSpec:
    """
    Args:
        strategies: Key frame strategies compared.
        tprime_values: Key frame counts T'.
        train_styles: Style sets, one model is trained per set.
        test_styles: Styles evaluated separately.
    """
    strategies: Tuple[SelectionStrategy, ...] = (SelectionStrategy.OURS, SelectionStrategy.UNIFORM,
                                                 SelectionStrategy.COSINE)
    tprime_values: Tuple[int, ...] = (4, 8, 16)
    train_styles: Tuple[Tuple[str, ...], ...] = field(default=(ALL_STYLES,))
    test_styles: Tuple[str, ...] = ALL_STYLES

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(SelectionStrategy(s) for s in self.strategies))
        object.__setattr__(self, "tprime_values", tuple(int(t) for t in self.tprime_values))
        object.__setattr__(self, "train_styles", tuple(tuple(sorted(s.value for s in parse_styles(styles)))
                                                       for styles in self.train_styles))
        object.__setattr__(self, "test_styles", tuple(sorted(s.value for s in parse_styles(self.test_styles))))
        for name in ("strategies", "tprime_values", "train_styles"):
            if not getattr(self, name):
                raise ValueError(f"AblationSpec.{name} must not be empty.")
        if any(t < 1 for t in self.tprime_values):
            raise ValueError(f"T' values must be positive, got {self.tprime_values}.")


def _write_json(data, out_dir, name):
    if out_dir is None:
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)


def pprint_keyframe_table(table: Dict[str, Dict[int, float]], floatfmt=".4f"):
    tprimes = sorted({t for row in table.values() for t in row})
    rows = [[strategy] + [row.get(t, float("nan")) for t in tprimes] for strategy, row in table.items()]
    print(tabulate.tabulate(rows, headers=["Strategy"] + [f"T'={t}" for t in tprimes], floatfmt=floatfmt))


def pprint_grid(grid: Dict[str, Dict[str, Dict[str, float]]], floatfmt=".4f"):
    """
    Training sets as rows, test sets as column groups of J, F and J&F.
    """
    tests = sorted({test for row in grid.values() for test in row})
    headers = ["Train"] + [f"{test} {m}" for test in tests for m in GRID_METRICS]
    rows = []
    for train_label, row in grid.items():
        rows.append([train_label] + [row.get(test, {}).get(m, float("nan")) for test in tests
                                     for m in GRID_METRICS])
    print(tabulate.tabulate(rows, headers=headers, floatfmt=floatfmt))


def ablate_keyframes(spec: AblationSpec, checkpoint, data_dir, split="val", out_dir=None, progress=False):
    """
    Evaluate every (strategy, T') pair with the weights of one checkpoint.

    Returns:
        strategy -> {T': J&F}. With out_dir, the table, each report and a line
        plot are saved there.
    """
    state = checkpoint if isinstance(checkpoint, TrainState) else TrainState.load(checkpoint)
    table: Dict[str, Dict[int, float]] = {}
    for strategy in spec.strategies:
        row = table.setdefault(strategy.value, {})
        for tprime in spec.tprime_values:
            report_path = None
            if out_dir is not None:
                os.makedirs(out_dir, exist_ok=True)
                report_path = os.path.join(out_dir, f"report_{strategy.value}_{tprime}.json")
            report = evaluate_run(state, data_dir, split, strategy=strategy, keyframe_count=tprime,
                                  progress=progress, report_path=report_path)
            row[tprime] = report.aggregate.get("J&F", float("nan"))
            logger.info("%s T'=%d: J&F %.4f", strategy.value, tprime, row[tprime])

    _write_json({s: {str(t): v for t, v in row.items()} for s, row in table.items()}, out_dir,
                "keyframe_ablation.json")
    if out_dir is not None:
        plot_tools.save_figure(plot_tools.plot_keyframe_ablation(table), "keyframe_ablation", out_dir)
    pprint_keyframe_table(table)
    return table


def _grid_cell(report):
    return {m: report.aggregate.get(m, float("nan")) for m in GRID_METRICS}


def ablate_expressions(train_styles: Sequence, test_styles: Sequence, config: RunConfig, data_dir,
                       out_dir=None, split="val", progress=False):
    """
    Train one model per training style set and evaluate it on each test style.

    Args:
        train_styles: Sequence of style sets, e.g. [["motion", "appearance"], ["appearance"]].
        test_styles: Styles evaluated one at a time.

    Returns:
        train label -> test style -> {J, F, J&F}.
    """
    spec = AblationSpec(strategies=(SelectionStrategy.OURS,), tprime_values=(config.keyframe_count,),
                        train_styles=tuple(train_styles), test_styles=tuple(test_styles))
    grid: Dict[str, Dict[str, Dict[str, float]]] = {}
    for styles in spec.train_styles:
        label = "+".join(styles)
        run_dir = os.path.join(out_dir, f"train_{label}") if out_dir is not None else None
        state, _ = train(config, data_dir, run_dir, styles=styles, progress=progress)
        grid[label] = {}
        for test in spec.test_styles:
            report = evaluate_run(state, data_dir, split, styles=[test])
            grid[label][test] = _grid_cell(report)
    _write_json(grid, out_dir, "expression_ablation.json")
    pprint_grid(grid)
    return grid


def ablate_expression_variants(train_variants: Sequence, test_variants: Sequence, config: RunConfig, data_dir,
                               out_dir=None, split="val", styles: Optional[Sequence] = None, progress=False):
    """
    Train one model per expression variant and evaluate it on each variant,
    giving same-variant cells on the diagonal and cross-variant cells off it.

    Returns:
        train variant -> test variant -> {J, F, J&F}.
    """
    train_variants = [ExpressionVariant(v) for v in train_variants]
    test_variants = [ExpressionVariant(v) for v in test_variants]
    if not train_variants or not test_variants:
        raise ValueError("Variant lists must not be empty.")
    grid: Dict[str, Dict[str, Dict[str, float]]] = {}
    for variant in train_variants:
        run_dir = os.path.join(out_dir, f"train_{variant.value}") if out_dir is not None else None
        state, _ = train(config, data_dir, run_dir, styles=styles, variant=variant, progress=progress)
        grid[variant.value] = {}
        for test in test_variants:
            report = evaluate_run(state, data_dir, split, styles=styles, variant=test)
            grid[variant.value][test.value] = _grid_cell(report)
    _write_json(grid, out_dir, "variant_ablation.json")
    pprint_grid(grid)
    return grid
