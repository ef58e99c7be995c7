import json

import pytest
from hypothesis import given, settings, strategies as st

from linekit.boxgeom import BBox
from linekit.errors import DomainError
from linekit.evalkit import (IOU_THRESHOLDS, Detection, EvalConfig, GroundTruth, average_precision, evaluate,
                             match_detections, nms, report_json)
from linekit.rng import SplitMix64

from oracles import brute_ap, brute_match, brute_nms


def rand_box(rng, extent=50, quantum=None):
    x, y = rng.uniform(0, extent), rng.uniform(0, extent)
    w, h = rng.uniform(2, 20), rng.uniform(2, 20)
    if quantum:
        x, y, w, h = (round(v / quantum) * quantum for v in (x, y, w, h))
        w, h = max(w, quantum), max(h, quantum)
    return BBox(x, y, x + w, y + h)


def test_threshold_list():
    assert len(IOU_THRESHOLDS) == 10
    assert IOU_THRESHOLDS[0] == 0.5 and IOU_THRESHOLDS[-1] == 0.95
    assert 0.6 in IOU_THRESHOLDS


def test_nms_examples(backend):
    d = Detection("a", 0, 0.9, BBox(0, 0, 10, 10))
    assert nms([d], 0.5) == [d]
    dup = Detection("a", 0, 0.8, BBox(0, 0, 10, 10))
    assert nms([dup, d], 0.5) == [d]
    other_cls = Detection("a", 1, 0.8, BBox(0, 0, 10, 10))
    other_img = Detection("b", 0, 0.8, BBox(0, 0, 10, 10))
    assert nms([d, other_cls, other_img], 0.5) == [d, other_cls, other_img]
    with pytest.raises(DomainError):
        nms([d], 1.5)


def test_nms_matches_brute_force(backend):
    rng = SplitMix64(42)
    for trial in range(200):
        n = rng.randint(0, 20)
        items = [(rng.randint(0, 1), rng.randint(0, 2), round(rng.random(), 2), rand_box(rng, 30))
                 for _ in range(n)]
        dets = [Detection(*it) for it in items]
        thresh = rng.uniform(0.2, 0.8)
        expect = brute_nms([(i, c, s, b.as_tuple()) for i, c, s, b in items], thresh)
        assert nms(dets, thresh) == [dets[i] for i in expect]


def test_match_examples():
    gt = [GroundTruth("a", 0, BBox(0, 0, 10, 10))]
    m = match_detections([Detection("a", 0, 0.9, BBox(0, 0, 10, 7))], gt, 0.5)
    assert (m.n_tp, m.n_fp, m.n_fn) == (1, 0, 0)
    assert match_detections([], gt, 0.5).n_fn == 1
    two = [Detection("a", 0, 0.6, BBox(0, 0, 10, 9)), Detection("a", 0, 0.9, BBox(0, 0, 10, 8))]
    m = match_detections(two, gt, 0.5)
    assert m.order == [1, 0] and m.tp == [True, False] and m.n_fn == 0


def test_match_prefers_highest_iou_unmatched_gt():
    gts = [GroundTruth("a", 0, BBox(0, 0, 10, 10)), GroundTruth("a", 0, BBox(1, 0, 11, 10))]
    dets = [Detection("a", 0, 0.9, BBox(1, 0, 11, 10)), Detection("a", 0, 0.8, BBox(1, 0, 11, 10))]
    m = match_detections(dets, gts, 0.5)
    assert m.tp == [True, True]


@pytest.mark.parametrize("flags,n_gt,expected", [
    ([True], 1, 1.0),
    ([], 2, 0.0),
    ([True, False, True], 2, 0.5 + 0.5 * 2 / 3),
])
def test_average_precision_examples(flags, n_gt, expected):
    assert average_precision(flags, n_gt) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.booleans(), max_size=30), st.integers(0, 30))
def test_average_precision_matches_walk(flags, extra):
    n_gt = sum(flags) + extra
    assert average_precision(flags, n_gt) == pytest.approx(brute_ap(flags, n_gt), abs=1e-12)


def test_evaluate_perfect_and_iou_060():
    gt = [GroundTruth("img", 2, BBox(0, 0, 10, 10))]
    rep = evaluate([Detection("img", 2, 0.9, BBox(0, 0, 10, 10))], gt)
    assert rep.map50 == 1.0 and rep.map5095 == 1.0
    assert rep.precision == 1.0 and rep.recall == 1.0
    rep = evaluate([Detection("img", 2, 0.9, BBox(0, 0, 10, 6))], gt)
    assert rep.map5095 == pytest.approx(0.3, abs=1e-12)
    assert [rep.map_by_threshold[t] for t in IOU_THRESHOLDS] == [1, 1, 1] + [0] * 7


def test_evaluate_undefined_without_gt():
    rep = evaluate([Detection("x", 0, 0.5, BBox(0, 0, 1, 1))], [])
    assert rep.map50 is None and not rep.defined
    assert '"map50": null' in report_json(rep)


def test_classes_without_gt_are_excluded():
    gt = [GroundTruth("i", 0, BBox(0, 0, 4, 4))]
    dets = [Detection("i", 0, 0.9, BBox(0, 0, 4, 4)), Detection("i", 3, 0.9, BBox(0, 0, 4, 4))]
    rep = evaluate(dets, gt)
    assert rep.map50 == 1.0
    assert rep.per_class[3].ap50 is None and rep.per_class[3].fp == 1


def _random_scene(rng, n_img=5, max_boxes=10):
    gts, dets = [], []
    for img in range(n_img):
        for _ in range(rng.randint(0, max_boxes)):
            cls = rng.randint(0, 2)
            b = rand_box(rng, quantum=0.5)
            gts.append(GroundTruth(img, cls, b))
            if rng.random() < 0.8:
                j = [rng.uniform(-2, 2) for _ in range(2)]
                d = BBox(b.x1 + j[0], b.y1 + j[1], b.x2 + j[0], b.y2 + j[1])
                dets.append(Detection(img, cls, round(rng.random(), 3), d))
        for _ in range(rng.randint(0, 3)):
            dets.append(Detection(img, rng.randint(0, 2), round(rng.random(), 3), rand_box(rng)))
    return dets, gts


def test_evaluate_against_exhaustive_reference(backend):
    rng = SplitMix64(555)
    cfg = EvalConfig(class_names=("a", "b", "c"), conf_thresh=0.25)
    for _ in range(30):
        dets, gts = _random_scene(rng)
        rep = evaluate(dets, gts, cfg)
        per_t = []
        for t in IOU_THRESHOLDS:
            aps = []
            for cls in range(3):
                cd = [(d.image_id, d.class_id, d.score, d.box.as_tuple()) for d in dets if d.class_id == cls]
                cg = [(g.image_id, g.class_id, g.box.as_tuple()) for g in gts if g.class_id == cls]
                if not cg:
                    continue
                flags, _ = brute_match(cd, cg, t)
                aps.append(brute_ap(flags, len(cg)))
            per_t.append(sum(aps) / len(aps) if aps else None)
        if per_t[0] is None:
            assert rep.map50 is None
            continue
        assert rep.map50 == pytest.approx(per_t[0], abs=1e-12)
        assert rep.map5095 == pytest.approx(sum(per_t) / 10, abs=1e-12)
        for cls, res in enumerate(rep.per_class):
            cd = [(d.image_id, d.class_id, d.score, d.box.as_tuple())
                  for d in dets if d.class_id == cls and d.score >= 0.25]
            cg = [(g.image_id, g.class_id, g.box.as_tuple()) for g in gts if g.class_id == cls]
            flags, fn = brute_match(cd, cg, 0.5)
            assert (res.tp, res.fp, res.fn) == (sum(flags), len(flags) - sum(flags), fn)
            assert res.tp + res.fn == len(cg)
        for v in (rep.map50, rep.map5095, rep.precision, rep.recall):
            assert 0 <= v <= 1


def test_ap_monotone_in_threshold():
    rng = SplitMix64(3)
    for _ in range(20):
        dets, gts = _random_scene(rng)
        rep = evaluate(dets, gts, EvalConfig(class_names=("a", "b", "c")))
        for res in rep.per_class:
            aps = [res.ap[t] for t in IOU_THRESHOLDS]
            assert all(a >= b - 1e-15 for a, b in zip(aps, aps[1:]))


def test_duplicate_detection_adds_one_fp():
    rng = SplitMix64(17)
    cfg = EvalConfig(class_names=("a", "b", "c"), conf_thresh=0.0)
    for _ in range(20):
        dets, gts = _random_scene(rng)
        if not gts:
            continue
        gt0 = gts[0]
        match = Detection(gt0.image_id, gt0.class_id, 1.0, gt0.box)
        with_tp = evaluate(dets + [match], gts, cfg)
        dup = evaluate(dets + [match, Detection(gt0.image_id, gt0.class_id, 1.0, gt0.box)], gts, cfg)
        c = gt0.class_id
        assert dup.per_class[c].fp == with_tp.per_class[c].fp + 1
        assert dup.per_class[c].tp == with_tp.per_class[c].tp
        for t in IOU_THRESHOLDS:
            assert dup.per_class[c].ap[t] <= with_tp.per_class[c].ap[t] + 1e-15


def test_report_json_is_canonical():
    gt = [GroundTruth("img", 0, BBox(0, 0, 10, 10))]
    rep = evaluate([Detection("img", 0, 0.9, BBox(0, 0, 10, 6))], gt)
    text = report_json(rep, 0.45)
    assert text == report_json(rep, 0.45)
    doc = json.loads(text)
    assert set(doc) == {"map50", "map5095", "precision", "recall", "per_class", "config"}
    assert doc["map5095"] == 0.3
    assert set(doc["per_class"][0]) == {"name", "ap50", "ap5095", "tp", "fp", "fn"}
    assert list(doc) == sorted(doc)
    assert text.index('"config"') < text.index('"map50"')
