import os
import json
import math

import numpy as np
import pytest
import torch

from motionref.cli import main as motionref_main
from motionref.config import save_config
from motionref.core.types import ExpressionStyle
from motionref.metrics.report import EvalReport, evaluate
from motionref.model.decoder import FramePrediction, QuerySet
from motionref.model.keyframes import SelectionStrategy
from motionref.model.segmenter import SegmenterOutput
from motionref.synthbench import generate_benchmark
from motionref.synthbench.cli import main as synthbench_main
from motionref.tools import (AblationSpec, BatchSampler, ClipDataset, ConfigMismatchError, ModelPredictor,
                             OraclePredictor, TrainState, TrainingDivergedError, ablate_expression_variants,
                             ablate_expressions, ablate_keyframes, config_diff, cosine_lr, crop_clip,
                             diff_snapshots, evaluate_run, evaluate_samples, parse_styles, pprint_snapshot_diff,
                             run_snapshot, save_overlays, state_digest, train, train_step)
from motionref.tools import evaluate as evaluate_module
from motionref.losses.criterion import SetCriterion

from .common import box_clip, sample_for, tiny_config, tiny_spec


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    path = str(tmp_path_factory.mktemp("bench"))
    generate_benchmark(tiny_spec(), 0, path, num_clips=6)
    return path


def test_cosine_lr():
    assert cosine_lr(50, 100, 5e-5) == pytest.approx(2.5e-5)
    assert cosine_lr(0, 100, 5e-5) == 5e-5
    assert cosine_lr(100, 100, 5e-5) == pytest.approx(0.0, abs=1e-20)
    assert cosine_lr(150, 100, 5e-5) == pytest.approx(0.0, abs=1e-20)
    assert cosine_lr(3, 0, 1e-3) == 1e-3
    values = [cosine_lr(s, 37, 1.0) for s in range(38)]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_scheduler_follows_cosine():
    state = TrainState.initialize(tiny_config(total_steps=10, learning_rate=1e-3))
    lrs = []
    for _ in range(10):
        lrs.append(state.lr)
        state.optimizer.step()
        state.scheduler.step()
    assert lrs == pytest.approx([cosine_lr(s, 10, 1e-3) for s in range(10)])
    assert state.lr == pytest.approx(0.0, abs=1e-20)


def test_parse_styles():
    assert parse_styles(None) is None
    assert parse_styles("motion, appearance") == {ExpressionStyle.MOTION, ExpressionStyle.APPEARANCE}
    assert parse_styles(["spatial"]) == {ExpressionStyle.SPATIAL}
    for empty in ("", ",", []):
        with pytest.raises(ValueError):
            parse_styles(empty)
    with pytest.raises(ValueError):
        parse_styles("colour")


def test_dataset_filters(data_dir):
    everything = ClipDataset.from_dir(data_dir, "train")
    motion = ClipDataset.from_dir(data_dir, "train", styles="motion")
    assert len(everything) == 4
    assert all(s.style == ExpressionStyle.MOTION for s in motion.samples())
    assert motion.num_samples < everything.num_samples
    no_name = ClipDataset.from_dir(data_dir, "train", variant="no_name")
    assert all(s.expression.startswith("The object") for s in no_name.samples())


def test_crop_clip(data_dir):
    clip, _ = ClipDataset.from_dir(data_dir, "train").entries[0]
    part = crop_clip(clip, 2, 4)
    assert part.num_frames == 4 and part.object_ids == clip.object_ids
    assert crop_clip(clip, 0, clip.num_frames) is clip
    with pytest.raises(ValueError):
        crop_clip(clip, 6, 4)


def test_batch_sampler(data_dir):
    dataset = ClipDataset.from_dir(data_dir, "train")
    sampler = BatchSampler(dataset, batch_size=2, clip_length=4, seed=3)
    first, again = sampler.batch(5), sampler.batch(5)
    assert [(i.clip.clip_id, i.start, i.sample) for i in first] == [(i.clip.clip_id, i.start, i.sample)
                                                                     for i in again]
    assert first[0].clip.clip_id != first[1].clip.clip_id
    for step in range(10):
        for item in sampler.batch(step):
            assert item.clip.num_frames == 4
            assert item.clip.relevance(item.sample.target_ids).any()
    with pytest.raises(ValueError):
        BatchSampler(ClipDataset([]), 1, 4)


def _params(model):
    return {name: p.detach().clone() for name, p in model.named_parameters()}


def test_zero_steps_is_initialization(data_dir, tmp_path):
    config = tiny_config(total_steps=0)
    state, log = train(config, data_dir, str(tmp_path), progress=False)
    assert log == [] and state.step == 0
    reference = TrainState.initialize(config)
    for name, value in _params(reference.model).items():
        assert torch.equal(value, dict(state.model.named_parameters())[name]), name
    assert os.path.exists(os.path.join(tmp_path, "checkpoints", "final.pt"))


def test_gradient_flow(data_dir):
    config = tiny_config()
    state = TrainState.initialize(config)
    batch = BatchSampler(ClipDataset.from_dir(data_dir, "train"), 1, 4, seed=0).batch(0)
    text_before = state.model.encode(batch[0].sample.expression).vector.copy()
    before = _params(state.model)
    terms = train_step(state, SetCriterion(config), batch)
    assert state.step == 1
    assert all(math.isfinite(v) for v in terms.values())
    assert terms["lr"] == config.learning_rate

    after = _params(state.model)
    for group in ("backbone", "decoder", "scorer", "interframe"):
        names = [n for n in before if n.startswith(group + ".")]
        assert names, group
        change = sum(float((after[n] - before[n]).norm()) for n in names)
        assert change > 0, group
    assert not any(n.startswith("text_encoder") for n in before)
    np.testing.assert_array_equal(state.model.encode(batch[0].sample.expression).vector, text_before)


def test_divergence_dumps_batch(data_dir, tmp_path):
    config = tiny_config()
    state = TrainState.initialize(config)
    with torch.no_grad():
        state.model.scorer.out.bias.fill_(float("nan"))
    before = _params(state.model)
    batch = BatchSampler(ClipDataset.from_dir(data_dir, "train"), 1, 4, seed=0).batch(0)
    with pytest.raises(TrainingDivergedError) as info:
        train_step(state, SetCriterion(config), batch, str(tmp_path))
    assert info.value.step == 0 and state.step == 0
    dump = torch.load(info.value.dump_path)
    assert dump["clip_ids"] == [batch[0].clip.clip_id]
    assert dump["expressions"] == [batch[0].sample.expression]
    for name, value in _params(state.model).items():
        assert torch.equal(value, before[name]) or torch.isnan(value).any(), name


def test_train_artifacts_and_determinism(data_dir, tmp_path):
    config = tiny_config(total_steps=3, checkpoint_every=2)
    runs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        state, log = train(config, data_dir, out, progress=False)
        runs.append(out)
    assert state.step == 3 and [r["step"] for r in log] == [0, 1, 2]
    assert set(log[0]) >= {"total", "cls", "mask_bce", "mask_dice", "temporal", "video_mask", "keyframe_aux", "lr"}
    with open(os.path.join(runs[0], "train_log.jsonl")) as f:
        assert [json.loads(line) for line in f] == log
    for name in ("step_000002.pt", "final.pt"):
        assert os.path.exists(os.path.join(runs[0], "checkpoints", name))
    assert diff_snapshots(*runs) == []

    restored = TrainState.load(os.path.join(runs[0], "checkpoints", "final.pt"), config)
    assert restored.step == 3
    assert state_digest(restored.model.state_dict()) == state_digest(state.model.state_dict())


def test_validation_and_best_val(data_dir, tmp_path):
    config = tiny_config(total_steps=2, val_every=1)
    _, log = train(config, data_dir, str(tmp_path), progress=False)
    assert all("val_jf" in r for r in log)
    with open(os.path.join(tmp_path, "training_summary.json")) as f:
        summary = json.load(f)
    assert summary["best_val"]["J&F"] == max(r["val_jf"] for r in log)
    assert os.path.exists(os.path.join(tmp_path, "checkpoints", "best.pt"))
    report = evaluate_run(os.path.join(tmp_path, "checkpoints", "final.pt"), data_dir, "val")
    assert report.metadata["best_val"] == summary["best_val"]
    assert report.metadata["step"] == 2


def test_config_mismatch(tmp_path):
    path = str(tmp_path / "state.pt")
    TrainState.initialize(tiny_config()).save(path)
    with pytest.raises(ConfigMismatchError) as info:
        TrainState.load(path, tiny_config(seed=9, total_steps=5))
    assert info.value.fields == ["seed", "total_steps"]
    assert "seed" in str(info.value)
    assert config_diff({"a": 1, "b": 2}, {"a": 1, "c": 2}) == ["b", "c"]


def test_oracle_evaluation(data_dir):
    report = evaluate_samples(ClipDataset.from_dir(data_dir, "val"), OraclePredictor())
    assert report.aggregate and all(v == 1.0 for v in report.aggregate.values())
    assert set(report.groups) <= {s.value for s in ExpressionStyle}


def test_random_model_report(data_dir, tmp_path):
    state = TrainState.initialize(tiny_config())
    path = str(tmp_path / "report.json")
    report = evaluate_run(state, data_dir, "val", report_path=path)
    assert all(math.isfinite(v) for v in report.aggregate.values())
    loaded = EvalReport.load(path)
    assert loaded.aggregate == pytest.approx(report.aggregate)
    assert loaded.metadata["strategy"] == "ours"


def test_interrupted_evaluation_saves_partial_report(data_dir, tmp_path, monkeypatch):
    class Flaky:
        def __init__(self, *args):
            self.calls = 0

        def __call__(self, clip, sample):
            self.calls += 1
            if self.calls > 1:
                raise RuntimeError("interrupted")
            return OraclePredictor()(clip, sample)

    monkeypatch.setattr(evaluate_module, "ModelPredictor", Flaky)
    path = str(tmp_path / "partial.json")
    with pytest.raises(RuntimeError):
        evaluate_run(TrainState.initialize(tiny_config()), data_dir, "val", report_path=path)
    report = EvalReport.load(path)
    assert report.metadata["partial"] is True
    assert report.counts["objects"] == 1


def test_ablate_keyframes(data_dir, tmp_path):
    state = TrainState.initialize(tiny_config())
    spec = AblationSpec(strategies=("ours", "uniform"), tprime_values=(4, 8))
    table = ablate_keyframes(spec, state, data_dir, "val", out_dir=str(tmp_path))
    assert set(table) == {"ours", "uniform"}
    assert all(set(row) == {4, 8} for row in table.values())
    assert all(math.isfinite(v) for row in table.values() for v in row.values())
    for name in ("keyframe_ablation.json", "keyframe_ablation.png", "report_ours_4.json", "report_uniform_8.json"):
        assert os.path.exists(os.path.join(tmp_path, name))
    EvalReport.load(os.path.join(tmp_path, "report_ours_8.json"))

    # Clips have 8 frames, so T' = 8 selects every frame
    everything = evaluate_run(state, data_dir, "val", strategy=SelectionStrategy.ALL)
    assert table["ours"][8] == everything.aggregate["J&F"]
    assert table["uniform"][8] == everything.aggregate["J&F"]


def test_ablation_spec_validation():
    with pytest.raises(ValueError):
        AblationSpec(strategies=())
    with pytest.raises(ValueError):
        AblationSpec(tprime_values=())
    with pytest.raises(ValueError):
        AblationSpec(tprime_values=(0,))
    with pytest.raises(ValueError):
        AblationSpec(train_styles=((),))
    with pytest.raises(ValueError):
        AblationSpec(strategies=("random",))
    with pytest.raises(ValueError):
        ablate_expressions([], ["motion"], tiny_config(), "unused")


def test_ablate_expressions(data_dir, tmp_path):
    config = tiny_config(total_steps=1)
    grid = ablate_expressions([["motion", "appearance", "spatial"], ["appearance"]], ["motion", "appearance"],
                              config, data_dir, out_dir=str(tmp_path), split="train", progress=False)
    assert set(grid) == {"appearance+motion+spatial", "appearance"}
    for row in grid.values():
        assert set(row) == {"motion", "appearance"}
        assert all(set(cell) == {"J", "F", "J&F"} for cell in row.values())
        assert all(math.isfinite(v) for v in row["motion"].values())
    assert os.path.exists(os.path.join(tmp_path, "expression_ablation.json"))


def test_snapshot_diff(tmp_path, capsys):
    for name in ("a", "b"):
        os.makedirs(tmp_path / name)
        save_config(tiny_config(), str(tmp_path / name / "config.json"))
        torch.save({"w": torch.ones(3)}, str(tmp_path / name / "state.pt"))
    assert diff_snapshots(str(tmp_path / "a"), str(tmp_path / "b")) == []
    pprint_snapshot_diff([])
    assert "identical" in capsys.readouterr().out

    torch.save({"w": torch.zeros(3)}, str(tmp_path / "b" / "state.pt"))
    (tmp_path / "b" / "extra.json").write_text("{}")
    diffs = diff_snapshots(str(tmp_path / "a"), str(tmp_path / "b"))
    assert diffs == [("extra.json", "missing in first"), ("state.pt", "content differs")]
    assert set(run_snapshot(str(tmp_path / "a"))) == {"config.json", "state.pt"}
    assert state_digest({"x": torch.ones(2)}) != state_digest({"x": torch.ones(2, dtype=torch.float64)})


def test_cli(data_dir, tmp_path):
    config_path = str(tmp_path / "config.json")
    save_config(tiny_config(total_steps=1), config_path)
    out = str(tmp_path / "run")
    assert motionref_main(["train", "--config", config_path, "--data", data_dir, "--out", out, "--quiet"]) == 0
    assert os.path.exists(os.path.join(out, "training_curve.png"))
    report = str(tmp_path / "report.json")
    checkpoint = os.path.join(out, "checkpoints", "final.pt")
    assert motionref_main(["eval", "--checkpoint", checkpoint, "--data", data_dir, "--report", report]) == 0
    assert os.path.exists(report)
    figures = str(tmp_path / "figures")
    assert motionref_main(["eval", "--checkpoint", checkpoint, "--data", data_dir, "--plot", figures,
                           "--plot-count", "1"]) == 0
    assert len([n for n in os.listdir(figures) if n.startswith("overlay_")]) == 1

    save_config(tiny_config(total_steps=1, seed=4), config_path)
    assert motionref_main(["eval", "--checkpoint", checkpoint, "--data", data_dir, "--config", config_path]) == 2


def test_synthbench_cli(tmp_path, capsys):
    out = str(tmp_path / "bench")
    code = synthbench_main(["generate", "--clips", "2", "--min-frames", "8", "--max-frames", "8", "--size", "64", "64",
                            "--max-objects", "3", "--seed", "1", "--out", out])
    assert code == 0
    assert os.path.exists(os.path.join(out, "manifest.json"))
    assert "samples_motion" in capsys.readouterr().out
    assert synthbench_main(["generate", "--clips", "1", "--size", "16", "16", "--out", out]) == 2


@pytest.mark.parametrize("image_size", [(64, 64), (96, 96)])
def test_train_and_evaluate_off_the_32_grid(tmp_path, image_size):
    data_dir = str(tmp_path / "bench80")
    generate_benchmark(tiny_spec(frame_size=(80, 80)), 2, data_dir, num_clips=6)
    config = tiny_config(total_steps=1, image_size=image_size)
    state, log = train(config, data_dir, str(tmp_path / "run"), progress=False)
    assert math.isfinite(log[0]["total"])
    report = evaluate_run(state, data_dir, "val")
    assert report.counts["objects"] > 0
    assert all(math.isfinite(v) for v in report.aggregate.values())


class _FixedOutputModel:
    """
    Stands in for ReferringSegmenter, returning the given kept query masks on
    an 8x8 cell grid.
    """
    def __init__(self, masks, kept):
        self.masks = torch.as_tensor(masks, dtype=torch.float32)
        self.kept = torch.as_tensor(kept)

    def eval(self):
        return self

    def encode(self, expression):
        return expression

    def __call__(self, frames, text, strategy, keyframe_count):
        num_frames, num_queries = self.kept.shape
        prediction = FramePrediction(class_logits=torch.zeros(num_frames, num_queries, 3),
                                     mask_embeddings=torch.zeros(num_frames, num_queries, 4),
                                     masks=self.masks, kept=self.kept)
        return SegmenterOutput(queries=QuerySet(torch.zeros(num_frames, num_queries, 4)),
                               frame_prediction=prediction, frame_embeddings=torch.zeros(num_frames, 4),
                               scores=torch.full((num_frames,), 0.5), indices=[0],
                               keyframe_queries=torch.zeros(1, num_queries, 4),
                               keyframe_prediction=prediction.index_frames([0]),
                               mask_features=torch.zeros(num_frames, 8, 8, 4), frame_size=(32, 32))


def test_model_predictor_takes_union_of_kept_queries():
    clip = box_clip("two", num_frames=2, size=(32, 32),
                    boxes={1: [(0, 0, 8, 8)] * 2, 2: [(16, 16, 24, 24)] * 2})
    sample = sample_for(clip, "The red squares", (1, 2))
    masks = np.zeros((2, 3, 8, 8))
    masks[:, 0, 0:2, 0:2] = 1
    masks[:, 1, 4:6, 4:6] = 1
    masks[:, 2] = 1
    kept = np.ones((2, 3), dtype=bool)

    # A kept full-frame query swamps both objects
    prediction = ModelPredictor(_FixedOutputModel(masks, kept))(clip, sample)
    assert prediction.shape == (2, 32, 32) and prediction.all()
    report = evaluate(prediction, clip, sample.target_ids)
    assert all(row["J"] == pytest.approx(64 / 1024) for row in report.per_object.values())
    assert report.aggregate["J&F"] < 0.5

    # Without it, each object is scored against the union of both target queries
    kept[:, 2] = False
    prediction = ModelPredictor(_FixedOutputModel(masks, kept))(clip, sample)
    np.testing.assert_array_equal(prediction, clip.masks > 0)
    report = evaluate(prediction, clip, sample.target_ids)
    assert all(row["J"] == pytest.approx(0.5) for row in report.per_object.values())


def test_save_overlays(data_dir, tmp_path):
    state = TrainState.initialize(tiny_config())
    paths = save_overlays(state, data_dir, "val", fig_folder=str(tmp_path), count=2)
    assert len(paths) == 2
    assert all(os.path.exists(p) and os.path.basename(p).startswith("overlay_") for p in paths)
    assert save_overlays(state, data_dir, "val", fig_folder=str(tmp_path / "none"), count=0) == []


def test_ablate_expression_variants(data_dir, tmp_path):
    config = tiny_config(total_steps=1)
    grid = ablate_expression_variants(["origin", "no_name"], ["origin", "no_name"], config, data_dir,
                                      out_dir=str(tmp_path), split="train")
    assert set(grid) == {"origin", "no_name"}
    for row in grid.values():
        assert set(row) == {"origin", "no_name"}
        assert all(set(cell) == {"J", "F", "J&F"} for cell in row.values())
        assert all(math.isfinite(v) for cell in row.values() for v in cell.values())
    with open(os.path.join(tmp_path, "variant_ablation.json")) as f:
        assert json.load(f) == grid
    with pytest.raises(ValueError):
        ablate_expression_variants([], ["origin"], config, data_dir)
