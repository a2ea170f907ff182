import numpy as np
import pytest

from motionref.metrics.measures import boundary_f, boundary_mask, default_tolerance, dice, frame_measures, iou
from motionref.metrics.report import EvalReport, combine_reports, evaluate, object_key, pprint_report

from .common import box_clip, random_masks


def _block(x0, y0, size=(6, 6)):
    mask = np.zeros(size, dtype=bool)
    mask[y0:y0 + 2, x0:x0 + 2] = True
    return mask


def test_iou_and_dice():
    a, b = _block(1, 1), _block(2, 1)
    assert iou(a, a) == 1.0 and dice(a, a) == 1.0
    assert iou(a, _block(4, 4)) == 0.0 and dice(a, _block(4, 4)) == 0.0
    assert iou(a, b) == pytest.approx(1 / 3)
    assert dice(a, b) == pytest.approx(0.5)


def test_empty_conventions():
    empty = np.zeros((4, 4), dtype=bool)
    assert iou(empty, empty) == 1.0 and dice(empty, empty) == 1.0 and boundary_f(empty, empty) == 1.0
    full = _block(0, 0, (4, 4))
    assert iou(empty, full) == 0.0 and dice(full, empty) == 0.0
    assert boundary_f(empty, full) == 0.0 and boundary_f(full, empty) == 0.0


def test_shape_mismatch():
    with pytest.raises(ValueError):
        iou(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(ValueError):
        boundary_f(np.zeros((4, 4)), np.zeros((4, 4)), tolerance=-1)


def test_dice_iou_relation():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a = random_masks(rng, (8, 8))
        b = random_masks(rng, (8, 8))
        if not (a.any() and b.any()):
            continue
        j = iou(a, b)
        assert dice(a, b) == pytest.approx(2 * j / (1 + j))


def test_measures_are_symmetric():
    rng = np.random.default_rng(2)
    for _ in range(300):
        a = random_masks(rng, (8, 8))
        b = random_masks(rng, (8, 8))
        assert iou(a, b) == iou(b, a)
        assert dice(a, b) == dice(b, a)
        assert boundary_f(a, b, 1) == pytest.approx(boundary_f(b, a, 1))


def test_dice_bounds_iou():
    rng = np.random.default_rng(3)
    for _ in range(300):
        a = random_masks(rng, (8, 8))
        b = random_masks(rng, (8, 8))
        j, d = iou(a, b), dice(a, b)
        if j in (0.0, 1.0):
            assert d == j
        else:
            assert d > j


def test_measures_translation_invariant():
    rng = np.random.default_rng(4)
    for _ in range(100):
        a = np.zeros((20, 20), dtype=bool)
        b = np.zeros((20, 20), dtype=bool)
        a[6:14, 6:14] = random_masks(rng, (8, 8))
        b[6:14, 6:14] = random_masks(rng, (8, 8))
        shift = tuple(int(v) for v in rng.integers(-5, 6, size=2))
        moved_a, moved_b = np.roll(a, shift, axis=(0, 1)), np.roll(b, shift, axis=(0, 1))
        assert iou(moved_a, moved_b) == iou(a, b)
        assert dice(moved_a, moved_b) == dice(a, b)
        assert boundary_f(moved_a, moved_b, 1) == pytest.approx(boundary_f(a, b, 1))


def _brute_boundary(mask):
    height, width = mask.shape
    points = []
    for y in range(height):
        for x in range(width):
            if not mask[y, x]:
                continue
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ny, nx = y + dy, x + dx
                if not (0 <= ny < height and 0 <= nx < width) or not mask[ny, nx]:
                    points.append((y, x))
                    break
    return points


def _brute_f(pred, gt, tolerance):
    pb, gb = _brute_boundary(pred), _brute_boundary(gt)
    if not pb and not gb:
        return 1.0
    if not pb or not gb:
        return 0.0

    def near(p, others):
        return any(max(abs(p[0] - o[0]), abs(p[1] - o[1])) <= tolerance for o in others)

    precision = sum(near(p, gb) for p in pb) / len(pb)
    recall = sum(near(g, pb) for g in gb) / len(gb)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def test_boundary_mask():
    mask = np.zeros((5, 5), dtype=bool)
    mask[1:4, 1:4] = True
    boundary = boundary_mask(mask)
    assert boundary.sum() == 8 and not boundary[2, 2]
    assert set(zip(*np.nonzero(boundary))) == set(_brute_boundary(mask))


def test_boundary_shifted_square():
    square = np.zeros((16, 16), dtype=bool)
    square[3:13, 3:13] = True
    shifted = np.roll(square, 1, axis=1)
    assert boundary_f(square, square, 1) == 1.0
    assert boundary_f(square, shifted, 1) == pytest.approx(_brute_f(square, shifted, 1))
    assert boundary_f(square, shifted, 1) == 1.0
    assert boundary_f(square, shifted, 0) == pytest.approx(_brute_f(square, shifted, 0))
    assert boundary_f(square, shifted, 0) < 1.0


def test_boundary_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        a = random_masks(rng, (8, 8))
        b = random_masks(rng, (8, 8))
        tolerance = int(rng.integers(0, 3))
        assert boundary_f(a, b, tolerance) == pytest.approx(_brute_f(a, b, tolerance))


def test_default_tolerance():
    assert default_tolerance((96, 96)) == 1
    assert default_tolerance((480, 854)) == 8


def test_frame_measures_requires_stacks():
    with pytest.raises(ValueError):
        frame_measures(np.zeros((4, 4)), np.zeros((4, 4)))


def _two_frame_clip():
    return box_clip("c", num_frames=2, size=(16, 16), boxes={1: [(2, 2, 8, 8), (2, 2, 8, 8)]})


def test_evaluate_perfect():
    clip = _two_frame_clip()
    report = evaluate({1: clip.object_mask(1)}, clip, [1])
    assert all(v == 1.0 for v in report.aggregate.values())
    assert list(report.per_object) == ["c/1"]


def test_evaluate_mean_over_frames():
    clip = _two_frame_clip()
    prediction = clip.object_mask(1).copy()
    prediction[1] = False
    prediction[1, 10:14, 10:14] = True
    report = evaluate(prediction, clip, [1], sample_key="motion00", group="motion")
    key = object_key("c", 1, "motion00")
    assert report.per_object[key]["J"] == pytest.approx(0.5)
    assert report.per_object[key]["J"] == report.per_object[key]["IoU"]
    assert report.groups["motion"]["J"] == pytest.approx(0.5)
    assert report.counts == {"objects": 1, "objects_motion": 1}


def test_evaluate_errors():
    clip = _two_frame_clip()
    with pytest.raises(ValueError):
        evaluate({1: clip.object_mask(1)}, clip, [7])
    with pytest.raises(ValueError):
        evaluate({}, clip, [1])


def test_evaluate_matches_recomputation():
    rng = np.random.default_rng(2)
    for _ in range(50):
        _check_random_video(rng)


def _check_random_video(rng):
    boxes = {}
    for object_id in (1, 2, 3):
        frames = []
        for t in range(5):
            if t and rng.random() < 0.2:
                frames.append(None)
                continue
            x0 = 20 * (object_id - 1) + int(rng.integers(0, 14))
            y0 = int(rng.integers(0, 14))
            frames.append((x0, y0, x0 + 6, y0 + 6))
        boxes[object_id] = frames
    clip = box_clip("r", num_frames=5, size=(20, 60), boxes=boxes)
    predictions = {i: random_masks(rng, (5, 20, 60), 0.1) for i in (1, 2, 3)}
    report = evaluate(predictions, clip, [1, 2, 3], tolerance=1)

    per_object = []
    for i in (1, 2, 3):
        gt = clip.masks == i
        js, ds, fs = [], [], []
        for p, g in zip(predictions[i], gt):
            inter, union = np.sum(p & g), np.sum(p | g)
            js.append(1.0 if union == 0 else inter / union)
            total = p.sum() + g.sum()
            ds.append(1.0 if total == 0 else 2 * inter / total)
            fs.append(_brute_f(p, g, 1))
        per_object.append((np.mean(js), np.mean(fs), np.mean(ds)))
        scores = report.per_object[f"r/{i}"]
        assert scores["J"] == pytest.approx(per_object[-1][0], abs=1e-9)
        assert scores["F"] == pytest.approx(per_object[-1][1], abs=1e-9)
        assert scores["Dice"] == pytest.approx(per_object[-1][2], abs=1e-9)
    j, f, _ = np.mean(per_object, axis=0)
    assert report.aggregate["J&F"] == pytest.approx((j + f) / 2, abs=1e-9)


def test_report_schema_and_round_trip(tmp_path):
    clip = _two_frame_clip()
    report = combine_reports([evaluate(clip.object_mask(1), clip, [1], "appearance00", "appearance"),
                              evaluate(clip.object_mask(1), clip, [1], "motion00", "motion")],
                             {"split": "val"})
    assert report.metadata == {"clips": ["c"], "split": "val"}
    assert set(report.groups) == {"appearance", "motion"}
    path = str(tmp_path / "report.json")
    report.save(path)
    loaded = EvalReport.load(path)
    assert loaded.aggregate == report.aggregate
    assert loaded.groups == report.groups


def test_combine_duplicates():
    clip = _two_frame_clip()
    report = evaluate(clip.object_mask(1), clip, [1])
    with pytest.raises(ValueError):
        combine_reports([report, report])


def test_combine_empty():
    report = combine_reports([])
    assert report.aggregate == {} and report.counts == {"objects": 0}


def test_pprint_report(capsys):
    clip = _two_frame_clip()
    pprint_report(evaluate(clip.object_mask(1), clip, [1], "spatial00", "spatial"))
    out = capsys.readouterr().out
    assert "spatial" in out and "J&F" in out
