import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from botd import dataio, geometry as geo
from botd.errors import ShapeMismatch
from botd.evaluate import (BenchReport, EvalReport, aggregate, bench_decode, frames_per_second,
                           mask_iou, match_detections, upper_iou, upper_iou_study)
from botd.labelgen import label_image, render_label_maps
from botd.reconstruct import STAGES


def rect(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


# ---------------------------------------------------------------- mask IoU

def test_mask_iou_examples():
    a = np.zeros((100, 100), bool)
    a[10:90, 10:90] = True
    half = np.zeros_like(a)
    half[10:90, 10:50] = True
    assert mask_iou(a, a) == 1.0
    assert mask_iou(a, ~a) == 0.0
    assert mask_iou(a, half) == 0.5
    assert mask_iou(np.zeros((3, 3)), np.zeros((3, 3))) == 1.0
    with pytest.raises(ShapeMismatch):
        mask_iou(a, a[1:])


# ---------------------------------------------------------------- upper IoU

def test_square_upper_iou():
    v = upper_iou(rect(128, 128, 384, 384), 512, 0.5)
    assert 0.935 <= v <= 0.955
    assert abs(v - (1 - (4 - math.pi) / 16)) <= 0.011


def test_disk_upper_iou():
    disk = oracles.regular_polygon(100, 100, 70, n=256)
    assert upper_iou(disk, 200, 0.5) >= 0.98


def test_upper_iou_approaches_one():
    poly = rect(20, 30, 150, 90)
    assert upper_iou(poly, 200, 0.99) >= 0.999
    assert upper_iou(poly, 200, 0.999) == 1.0


def test_upper_iou_rescales():
    # a polygon given at 100 px behaves like its 2x copy at 200 px
    poly = rect(10, 20, 80, 60)
    assert upper_iou(poly, 200, 0.5, image_size=(100, 100)) == upper_iou(2 * poly, 200, 0.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(-40, 40), st.integers(-40, 40), st.integers(0, 50))
def test_upper_iou_translation_invariant(dx, dy, seed):
    rng = np.random.default_rng(seed)
    poly = np.round(oracles.regular_polygon(100, 100, rng.uniform(20, 45), n=int(rng.integers(3, 10)),
                                            phase=rng.uniform(0, 6)))
    a = upper_iou(poly, 200, 0.5)
    b = upper_iou(poly + [dx, dy], 200, 0.5)
    assert abs(a - b) <= 1e-6


CM_SCALES = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


def _max_dip(poly, size):
    vals = [upper_iou(poly, size, s, (size, size)) for s in CM_SCALES]
    return max(a - b for a, b in zip(vals, vals[1:]))


def test_upper_iou_monotone_in_cm_scale_convex():
    for (w, _), anns in dataio.synth_dataset(4, 20, "convex", size=640):
        assert _max_dip(anns[0].polygon, w) <= 0.005


@pytest.mark.xfail(strict=True, reason="digital disks are not nested-open: openings of small squares "
                                        "and 32-gons dip by up to ~0.04 between neighbouring scales")
@pytest.mark.parametrize("kind", ["squares", "disks"])
def test_upper_iou_monotone_in_cm_scale_per_shape(kind):
    for (w, _), anns in dataio.synth_dataset(4, 20, kind, size=640):
        assert _max_dip(anns[0].polygon, w) <= 0.005


@pytest.mark.parametrize("kind", dataio.KINDS)
def test_mean_upper_iou_monotone_in_cm_scale(kind):
    _, by_cm = upper_iou_study(dataio.synth_dataset(4, 20, kind, size=640), [], CM_SCALES)
    assert all(b >= a - 0.005 for a, b in zip(by_cm.iou, by_cm.iou[1:])), by_cm.iou


def test_upper_iou_study_shapes_and_circles():
    data = [((256, 256), [dataio.TextInstanceAnnotation(oracles.regular_polygon(128, 128, r, n=64))])
            for r in (32, 48, 80)]
    by_image, by_cm = upper_iou_study(data, [256, 512], [0.3, 0.5, 0.9], fixed_image_scale=256)
    assert by_image.axis == [256.0, 512.0] and len(by_image.iou) == 2
    assert by_cm.axis_name == "cm_scale" and len(by_cm.rows()) == 3
    assert all(0.9 <= v <= 1.0 for v in by_image.iou + by_cm.iou)


# ---------------------------------------------------------------- matching

def test_match_identity():
    gts = [(rect(0, 0, 10, 10), True), (rect(20, 0, 35, 12), True)]
    rep = match_detections([(g, 0.9) for g, _ in gts], gts)
    assert (rep.precision, rep.recall, rep.f_measure) == (1.0, 1.0, 1.0)
    assert rep.counts == (2, 0, 0)


def test_match_vacuous():
    rep = match_detections([], [(rect(0, 0, 5, 5), False)])
    assert (rep.precision, rep.recall) == (1.0, 1.0)
    assert match_detections([], []).f_measure == 1.0


def test_match_dont_care_discard():
    gts = [(rect(0, 0, 10, 10), True), (rect(40, 40, 60, 50), False)]
    rep = match_detections([(rect(40, 40, 60, 50), 0.8)], gts)
    assert rep.counts == (0, 0, 1)


def test_match_false_positive_and_threshold():
    gts = [(rect(0, 0, 10, 10), True)]
    # IoU exactly 0.5 counts
    assert match_detections([(rect(0, 0, 10, 5), 0.5)], gts).counts == (1, 0, 0)
    assert match_detections([(rect(0, 0, 10, 4), 0.5)], gts).counts == (0, 1, 1)
    with pytest.raises(ValueError):
        match_detections([], gts, iou_threshold=1.0)


def test_match_one_to_one_by_score():
    gts = [(rect(0, 0, 10, 10), True)]
    preds = [(rect(0, 0, 10, 9), 0.4), (rect(0, 0, 10, 10), 0.9)]
    rep = match_detections(preds, gts)
    assert rep.counts == (1, 1, 0)
    assert rep.precision == 0.5 and rep.recall == 1.0
    assert rep.f_measure == pytest.approx(2 / 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_match_permutation_invariant(seed, rnd):
    rng = np.random.default_rng(seed)

    def box():
        x, y = rng.integers(0, 30, 2)
        return rect(x, y, x + rng.integers(3, 12), y + rng.integers(3, 12))

    gts = [(box(), bool(rng.random() < 0.8)) for _ in range(int(rng.integers(0, 6)))]
    preds = [(box(), float(s)) for s in rng.permutation(20)[:int(rng.integers(0, 6))] / 20]
    base = match_detections(preds, gts).counts
    g2, p2 = list(gts), list(preds)
    rnd.shuffle(g2)
    rnd.shuffle(p2)
    assert match_detections(p2, g2).counts == base


def test_report_harmonic_mean_and_aggregate():
    r = EvalReport.from_counts([(3, 1, 2), (1, 0, 0)])
    assert r.counts == (4, 1, 2)
    assert r.f_measure == pytest.approx(2 * r.precision * r.recall / (r.precision + r.recall))
    assert EvalReport.from_counts([(0, 2, 3)]).f_measure == 0.0
    assert aggregate([EvalReport.from_counts([(1, 0, 0)]), EvalReport.from_counts([(0, 1, 1)])]).counts == (1, 1, 1)


# ---------------------------------------------------------------- benchmark

def test_bench_empty():
    rep = bench_decode([])
    assert rep == BenchReport()
    assert rep.to_dict()["stages"] == []
    assert math.isnan(frames_per_second(rep))


def test_bench_report_rows():
    maps = []
    for (w, h), anns in dataio.synth_dataset(1, 3, "convex", size=256, instances=4):
        maps.append(render_label_maps(label_image(anns, w, h), w, h))
    one = bench_decode(maps, repetitions=1)
    five = bench_decode(maps, repetitions=5)
    for rep in (one, five):
        assert [s.stage for s in rep.stages] == list(STAGES)
        assert all(s.p95_ms >= s.median_ms >= 0 for s in rep.stages)
        assert rep.per_image.median_ms > 0
    assert five.repetitions == 5 and five.images == 3
    assert frames_per_second(one) > 0
    with pytest.raises(ValueError):
        bench_decode(maps, repetitions=0)
