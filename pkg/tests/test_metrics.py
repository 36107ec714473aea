import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tomeval import BBox, Detection, GroundTruthObject, UsageError
from tomeval.metrics import (
    EvalConfig,
    average_precision,
    counts_vs_threshold,
    evaluate,
    f1,
    iou,
    match_detections,
    mean_average_precision,
    pr_curve,
    precision,
    recall,
)

from oracles import brute_force_counts, raster_iou, step_integral_ap


def gt(*box, label="tomato"):
    return GroundTruthObject(label, BBox(*box))


def det(conf, *box, image="img", label="tomato"):
    return Detection(image, label, conf, BBox(*box))


# ---- IoU

def test_iou_identity_and_disjoint():
    a = BBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BBox(20, 20, 30, 30)) == 0.0
    assert iou(a, BBox(10, 0, 20, 10)) == 0.0  # touching edges share no area


def test_iou_half_overlap_matches_pixel_count():
    a, b = (0, 0, 10, 10), (5, 0, 15, 10)
    assert raster_iou(a, b) == pytest.approx(1 / 3, abs=0)
    assert iou(BBox(*a), BBox(*b)) == pytest.approx(1 / 3, rel=1e-15)


int_box = st.tuples(st.integers(0, 40), st.integers(0, 40), st.integers(1, 20), st.integers(1, 20)).map(
    lambda t: (t[0], t[1], t[0] + t[2], t[1] + t[3]))


@settings(max_examples=300, deadline=None)
@given(int_box, int_box)
def test_iou_equals_raster_oracle(a, b):
    assert iou(BBox(*a), BBox(*b)) == pytest.approx(raster_iou(a, b), abs=1e-12)
    assert iou(BBox(*a), BBox(*b)) == iou(BBox(*b), BBox(*a))


# ---- matching

def test_single_detection_above_threshold_is_tp():
    # IoU of (0,0,10,10) with (0,0,10,6) is 0.6
    out = match_detections([det(0.8, 0, 0, 10, 6)], [gt(0, 0, 10, 10)])
    assert (out.tp, out.fp, out.fn) == (1, 0, 0)


def test_second_detection_on_same_gt_is_fp():
    g = [gt(0, 0, 10, 10)]
    dets = [det(0.7, 0, 0, 10, 7), det(0.9, 0, 0, 10, 8)]  # IoU 0.7 and 0.8
    out = match_detections(dets, g)
    assert (out.tp, out.fp, out.fn) == (1, 1, 0)
    assert out.detections[0].confidence == 0.9 and out.is_tp == (True, False)


def test_no_detections_all_fn():
    out = match_detections([], [gt(0, 0, 10, 10), gt(20, 20, 30, 30)])
    assert (out.tp, out.fp, out.fn) == (0, 0, 2)


def test_mixed_images_rejected():
    with pytest.raises(UsageError):
        match_detections([det(0.5, 0, 0, 1, 1, image="a"), det(0.5, 0, 0, 1, 1, image="b")], [])


def test_iou_threshold_is_inclusive():
    # IoU exactly 0.5
    out = match_detections([det(0.9, 0, 0, 10, 5)], [gt(0, 0, 10, 10)])
    assert out.tp == 1


def test_takes_best_unmatched_gt():
    g = [gt(0, 0, 10, 10), gt(2, 0, 12, 10)]
    d = [det(0.9, 2, 0, 12, 10), det(0.8, 1, 0, 11, 10)]
    out = match_detections(d, g)
    assert out.matched_gt == (1, 0)


def test_confidence_filter_is_inclusive():
    out = match_detections([det(0.4, 0, 0, 10, 10)], [gt(0, 0, 10, 10)], EvalConfig(0.5, 0.4))
    assert out.tp == 1
    out = match_detections([det(0.4, 0, 0, 10, 10)], [gt(0, 0, 10, 10)], EvalConfig(0.5, 0.41))
    assert (out.tp, out.fp, out.fn) == (0, 0, 1)


def random_scene(rng, max_dets=6, max_gts=6, span=20):
    def box():
        x0, y0 = rng.integers(0, span, 2)
        w, h = rng.integers(1, 10, 2)
        return (int(x0), int(y0), int(x0 + w), int(y0 + h))

    gts = [box() for _ in range(rng.integers(0, max_gts + 1))]
    # coarse confidences so ties happen
    dets = [(float(rng.integers(0, 5)) / 4, box()) for _ in range(rng.integers(0, max_dets + 1))]
    return dets, gts


def test_matcher_equals_brute_force_oracle():
    rng = np.random.default_rng(1)
    for _ in range(2000):
        dets, gts = random_scene(rng)
        t = float(rng.choice([0.1, 0.3, 0.5, 0.75]))
        tau = float(rng.choice([0.0, 0.25, 0.5]))
        out = match_detections([det(c, *b) for c, b in dets], [gt(*b) for b in gts], EvalConfig(t, tau))
        tp, fp, fn, _ = brute_force_counts(dets, gts, t, tau)
        assert (out.tp, out.fp, out.fn) == (tp, fp, fn)


# ---- P/R/F1

def test_prf_definitions():
    assert precision(3, 1) == 0.75
    assert recall(3, 1) == 0.75
    assert f1(0.5, 1.0) == pytest.approx(2 / 3)
    assert precision(0, 0) == recall(0, 0) == f1(0, 0) == 0.0


@given(st.floats(0, 1))
def test_f1_fixed_point(x):
    assert f1(x, x) == pytest.approx(x, abs=1e-15)


# ---- PR curve and AP

HAND_DETS = [det(0.9, 0, 0, 10, 10), det(0.8, 50, 50, 60, 60), det(0.7, 20, 0, 30, 10)]
HAND_GTS = {"img": [gt(0, 0, 10, 10), gt(20, 0, 30, 10)]}


def test_pr_curve_hand_case():
    curve = pr_curve(HAND_DETS, HAND_GTS)
    assert curve.points() == [(0.5, 1.0), (0.5, 0.5), (1.0, pytest.approx(2 / 3))]


def test_ap_hand_case_all_point():
    curve = pr_curve(HAND_DETS, HAND_GTS)
    assert average_precision(curve) == pytest.approx(0.5 * 1.0 + 0.5 * (2 / 3), abs=1e-12)
    assert average_precision(curve) == pytest.approx(step_integral_ap(curve.recall, curve.precision), abs=1e-12)


def test_ap_hand_case_eleven_point():
    curve = pr_curve(HAND_DETS, HAND_GTS)
    # r in {0..0.5} -> 1.0 (6 points), r in {0.6..1.0} -> 2/3 (5 points)
    assert average_precision(curve, "11-point") == pytest.approx((6 + 5 * 2 / 3) / 11)


def test_ap_single_tp_and_all_fp():
    g = {"img": [gt(0, 0, 10, 10)]}
    assert average_precision(pr_curve([det(0.5, 0, 0, 10, 10)], g)) == 1.0
    assert pr_curve([det(0.5, 0, 0, 10, 10)], g).points() == [(1.0, 1.0)]
    assert average_precision(pr_curve([det(0.5, 40, 40, 50, 50)], g)) == 0.0


def test_pr_curve_needs_ground_truth():
    with pytest.raises(UsageError):
        pr_curve([det(0.5, 0, 0, 1, 1)], {"img": []})


def test_ap_invariant_under_monotone_confidence_rescaling():
    rng = np.random.default_rng(5)
    for _ in range(50):
        dets, gts = random_scene(rng, 8, 6)
        if not gts:
            continue
        confs = rng.permutation(len(dets)) / max(len(dets), 1)
        d1 = [det(float(c), *b) for c, (_, b) in zip(confs, dets)]
        d2 = [det(float(c) ** 3, *b) for c, (_, b) in zip(confs, dets)]
        g = {"img": [gt(*b) for b in gts]}
        assert average_precision(pr_curve(d1, g)) == average_precision(pr_curve(d2, g))


def test_curve_recall_monotone_and_bounded():
    rng = np.random.default_rng(7)
    for _ in range(200):
        dets, gts = random_scene(rng)
        if not gts:
            continue
        c = pr_curve([det(cf, *b) for cf, b in dets], {"img": [gt(*b) for b in gts]})
        assert np.all(np.diff(c.recall) >= 0)
        assert np.all((0 <= c.precision) & (c.precision <= 1))
        assert 0 <= average_precision(c) <= 1


def test_map():
    assert mean_average_precision({"tomato": 0.42}) == 0.42
    assert mean_average_precision({"a": 0.4, "b": 0.8}) == pytest.approx(0.6)
    assert mean_average_precision({"a": 1.0, "b": 1.0, "c": 1.0}) == 1.0
    with pytest.raises(UsageError):
        mean_average_precision({})


def test_pr_curve_across_images_sorted_globally():
    dets = [det(0.6, 0, 0, 10, 10, image="a"), det(0.9, 40, 40, 50, 50, image="b")]
    gts = {"a": [gt(0, 0, 10, 10)], "b": [gt(0, 0, 10, 10)]}
    c = pr_curve(dets, gts)
    assert c.points() == [(0.0, 0.0), (0.5, 0.5)]
    assert list(c.confidence) == [0.9, 0.6]


# ---- counts vs threshold

def test_counts_vs_threshold_rows():
    g = {"img": [gt(0, 0, 10, 10)]}
    d = [det(0.6, 0, 0, 10, 10), det(0.3, 50, 50, 60, 60)]
    rows = counts_vs_threshold(d, g, 0.01)
    assert len(rows) == 101
    for k, (t, c) in enumerate(rows):
        assert t == k / 100
        expected = (1, 1, 0) if k <= 30 else (1, 0, 0) if k <= 60 else (0, 0, 1)
        assert (c.tp, c.fp, c.fn) == expected


def test_counts_vs_threshold_monotone_and_matches_direct():
    rng = np.random.default_rng(11)
    for _ in range(100):
        dets, gts = random_scene(rng)
        d = [det(round(float(rng.random()), 2), *b) for _, b in dets]
        g = {"img": [gt(*b) for b in gts]}
        rows = counts_vs_threshold(d, g, 0.05)
        assert rows[0][1] == match_detections(d, g["img"]).counts
        for (t0, a), (t1, b) in zip(rows, rows[1:]):
            assert b.tp <= a.tp and b.fp <= a.fp and b.fn >= a.fn
        for t, c in rows[::4]:
            assert c == match_detections(d, g["img"], EvalConfig(0.5, t)).counts


# ---- evaluate

def test_evaluate_multiclass_report():
    gts = {"a": [gt(0, 0, 10, 10), gt(20, 20, 30, 30, label="leaf")]}
    dets = {"a": [det(0.9, 0, 0, 10, 10, image="a"), det(0.8, 20, 20, 30, 30, image="a", label="leaf"),
                  det(0.7, 60, 60, 70, 70, image="a")]}
    rep = evaluate(dets, gts)
    assert sorted(rep.per_class) == ["leaf", "tomato"]
    assert rep.per_class["tomato"].ap == 1.0
    assert rep.map == 1.0
    t = rep.totals
    assert (t.tp, t.fp, t.fn) == (2, 1, 0)
    js = rep.to_json()
    assert set(js) >= {"config", "per_class", "map", "curve"}
    assert js["per_class"]["tomato"]["fp"] == 1
