"""Mask IoU, upper-IoU fidelity studies, detection matching and decode benchmarks."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import ShapeMismatch
from .labelgen import label_from_mask
from .reconstruct import STAGES, bold_outline, decode_detailed


def mask_iou(a, b) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} vs {b.shape}")
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(a & b)) / union


# --------------------------------------------------------------------------
# upper IoU
# --------------------------------------------------------------------------

@dataclass
class UpperIoUReport:
    axis_name: str          # "image_scale" or "cm_scale"
    axis: list[float]
    iou: list[float]
    fixed: dict = field(default_factory=dict)

    def rows(self):
        return list(zip(self.axis, self.iou))


def _scaled(poly, image_scale: float, image_size):
    p = np.asarray(poly, dtype=np.float64)
    if image_size is None:
        n = int(round(image_scale))
        return p, n, n
    w, h = image_size
    f = image_scale / min(w, h)
    return p * f, max(int(round(w * f)), 1), max(int(round(h * f)), 1)


def upper_iou(poly, image_scale: float, cm_scale: float = 0.5, image_size=None) -> float:
    """IoU between a text mask and its reconstruction from exact CM and PMD.

    ``poly`` is given in an image of ``image_size = (width, height)``, which
    is resized so its short side equals ``image_scale``.  Without
    ``image_size`` the polygon is taken to live in an
    ``image_scale x image_scale`` canvas already.
    """
    p, w, h = _scaled(poly, image_scale, image_size)
    text = geo.rasterize_polygon(p, w, h)
    lab = label_from_mask(text, cm_scale)
    rec = bold_outline(lab.cm, lab.pmd, cm_scale)
    return mask_iou(rec, text)


def _mean_upper_iou(dataset, image_scale, cm_scale) -> float:
    vals = []
    for (w, h), anns in dataset:
        for ann in anns:
            if ann.care:
                vals.append(upper_iou(ann.polygon, image_scale, cm_scale, (w, h)))
    return float(np.mean(vals)) if vals else float("nan")


def upper_iou_study(dataset, image_scales=(), cm_scales=(), fixed_cm_scale: float = 0.5,
                    fixed_image_scale: float = 640) -> tuple[UpperIoUReport, UpperIoUReport]:
    """Mean upper IoU along each axis with the other held fixed.

    ``dataset`` is a sequence of ``((width, height), annotations)``.
    Returns ``(by_image_scale, by_cm_scale)``.
    """
    by_image = UpperIoUReport("image_scale", [float(s) for s in image_scales], [],
                              {"cm_scale": fixed_cm_scale})
    by_image.iou = [_mean_upper_iou(dataset, s, fixed_cm_scale) for s in by_image.axis]
    by_cm = UpperIoUReport("cm_scale", [float(s) for s in cm_scales], [],
                           {"image_scale": fixed_image_scale})
    by_cm.iou = [_mean_upper_iou(dataset, fixed_image_scale, s) for s in by_cm.axis]
    return by_image, by_cm


# --------------------------------------------------------------------------
# detection matching
# --------------------------------------------------------------------------

@dataclass
class EvalReport:
    precision: float
    recall: float
    f_measure: float
    per_image: list[tuple[int, int, int]] = field(default_factory=list)

    @classmethod
    def from_counts(cls, per_image) -> "EvalReport":
        per_image = [tuple(int(v) for v in c) for c in per_image]
        tp = sum(c[0] for c in per_image)
        fp = sum(c[1] for c in per_image)
        fn = sum(c[2] for c in per_image)
        # 0/0 reads as vacuously perfect
        p = tp / (tp + fp) if tp + fp else 1.0
        r = tp / (tp + fn) if tp + fn else 1.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f, per_image)

    @property
    def counts(self) -> tuple[int, int, int]:
        return (sum(c[0] for c in self.per_image), sum(c[1] for c in self.per_image),
                sum(c[2] for c in self.per_image))


def aggregate(reports) -> EvalReport:
    return EvalReport.from_counts([c for r in reports for c in r.per_image])


def _poly_key(poly) -> tuple:
    return tuple(np.round(np.asarray(poly, dtype=np.float64), 6).ravel().tolist())


def _iou_matrix(pred_polys, gt_polys) -> np.ndarray:
    if not pred_polys or not gt_polys:
        return np.zeros((len(pred_polys), len(gt_polys)))
    allv = np.concatenate([np.asarray(p, dtype=np.float64) for p in pred_polys + gt_polys])
    x0, y0 = np.floor(allv.min(axis=0)).astype(int)
    x1, y1 = np.ceil(allv.max(axis=0)).astype(int)
    w, h = max(x1 - x0, 1), max(y1 - y0, 1)

    def stack(polys):
        return np.stack([geo.rasterize_window(p, x0, y0, w, h).ravel() for p in polys]).astype(np.float32)

    P, G = stack(pred_polys), stack(gt_polys)
    inter = P @ G.T
    union = P.sum(axis=1)[:, None] + G.sum(axis=1)[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, inter / union, 0.0)
    return iou.astype(np.float64)


def match_detections(preds, gts, iou_threshold: float = 0.5) -> EvalReport:
    """Greedy one-to-one matching of one image's detections.

    ``preds``: ``(polygon, score)`` pairs; ``gts``: ``(polygon, care)``
    pairs.  A prediction whose best-overlapping ground truth is don't-care
    (at IoU >= threshold) is dropped before counting.  Remaining predictions
    are matched in descending score order to the unmatched care instance of
    highest IoU.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in (0, 1)")
    pred_polys = [np.asarray(p, dtype=np.float64) for p, _ in preds]
    scores = np.array([float(s) for _, s in preds])
    gt_polys = [np.asarray(g, dtype=np.float64) for g, _ in gts]
    care = np.array([bool(c) for _, c in gts], dtype=bool)
    iou = _iou_matrix(pred_polys, gt_polys)
    # gt preference among equal IoUs: care first, then geometry, never list order
    gt_rank = sorted(range(len(gts)), key=lambda k: (not care[k], _poly_key(gt_polys[k])))

    def best_gt(pi, allowed):
        best, best_v = None, -1.0
        for k in gt_rank:
            if allowed(k) and iou[pi, k] > best_v:
                best, best_v = k, iou[pi, k]
        return best, best_v

    tp = fp = 0
    matched = np.zeros(len(gts), dtype=bool)
    order = np.argsort(-scores, kind="stable")
    for pi in order:
        if len(gts):
            k, v = best_gt(pi, lambda _k: True)
            if not care[k] and v >= iou_threshold:
                continue
        k, v = best_gt(pi, lambda _k: care[_k] and not matched[_k])
        if k is not None and v >= iou_threshold:
            matched[k] = True
            tp += 1
        else:
            fp += 1
    fn = int(care.sum()) - tp
    return EvalReport.from_counts([(tp, fp, fn)])


# --------------------------------------------------------------------------
# post-processing benchmark
# --------------------------------------------------------------------------

@dataclass
class StageStats:
    stage: str
    median_ms: float
    p95_ms: float
    mean_ms: float


@dataclass
class BenchReport:
    images: int = 0
    repetitions: int = 0
    stages: list[StageStats] = field(default_factory=list)
    per_image: StageStats | None = None

    def to_dict(self) -> dict:
        return {
            "images": self.images,
            "repetitions": self.repetitions,
            "stages": [vars(s) for s in self.stages],
            "per_image_total": vars(self.per_image) if self.per_image else None,
        }


def _stats(name, seconds) -> StageStats:
    ms = np.asarray(seconds, dtype=np.float64) * 1e3
    return StageStats(name, float(np.median(ms)), float(np.percentile(ms, 95)), float(ms.mean()))


def bench_decode(label_maps, cm_scale: float = 0.5, repetitions: int = 1,
                 bin_threshold: float = 0.5, min_area: int = 16) -> BenchReport:
    """Per-stage wall-clock statistics of decoding each map, over all runs."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    maps = list(label_maps)
    if not maps:
        return BenchReport()
    samples = {s: [] for s in STAGES}
    totals = []
    for _ in range(repetitions):
        for lm in maps:
            cls = lm.cls.astype(np.float64) if lm.cls.dtype == bool else lm.cls
            t = time.perf_counter()
            _, timing = decode_detailed(cls, lm.reg, cm_scale, bin_threshold, min_area)
            totals.append(time.perf_counter() - t)
            for s in STAGES:
                samples[s].append(timing[s])
    return BenchReport(len(maps), repetitions, [_stats(s, samples[s]) for s in STAGES],
                       _stats("total", totals))


def frames_per_second(report: BenchReport) -> float:
    if report.per_image is None or report.per_image.median_ms == 0:
        return math.nan
    return 1e3 / report.per_image.median_ms
