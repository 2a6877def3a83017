"""Decode CM + PMD maps back to text instances by bolding the CM outline."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import geometry as geo
from .errors import EmptyMask, InvalidPmd, ShapeMismatch
from .labelgen import erosion_radius

STAGES = ("binarize", "components", "bolding", "tracing")


def _bold_window(cm_sub: np.ndarray, r0: int, c0: int, shape, r: float):
    # Bold a CM given as a crop at (r0, c0) of an image of ``shape``.  The
    # result lives in the crop grown by r (clipped to the image): nothing
    # farther out is within r of a CM pixel.
    pad = int(math.ceil(r)) + 1
    h, w = shape
    wr0, wc0 = max(r0 - pad, 0), max(c0 - pad, 0)
    wr1 = min(r0 + cm_sub.shape[0] + pad, h)
    wc1 = min(c0 + cm_sub.shape[1] + pad, w)
    win = np.zeros((wr1 - wr0, wc1 - wc0), dtype=bool)
    win[r0 - wr0:r0 - wr0 + cm_sub.shape[0], c0 - wc0:c0 - wc0 + cm_sub.shape[1]] = cm_sub
    return geo.dilate_disk(geo.outline(win), r) | win, wr0, wc0


def bold_outline(cm, pmd: float, cm_scale: float = 0.5) -> np.ndarray:
    """Dilate the CM outline by ``(1 - cm_scale) * pmd`` and fill in the CM.

    For a non-empty CM this is the same set as dilating the whole CM.
    """
    if not pmd > 0:
        raise InvalidPmd(f"pmd must be positive, got {pmd}")
    if not 0.0 < cm_scale < 1.0:
        raise ValueError(f"cm_scale must lie in (0, 1), got {cm_scale}")
    cm = np.asarray(cm, dtype=bool)
    bb = geo.mask_bbox(cm)
    if bb is None:
        raise EmptyMask("center mask is empty")
    sub, r0, c0 = _bold_window(cm[bb[0]:bb[1], bb[2]:bb[3]], bb[0], bb[2], cm.shape,
                               erosion_radius(pmd, cm_scale))
    out = np.zeros_like(cm)
    out[r0:r0 + sub.shape[0], c0:c0 + sub.shape[1]] = sub
    return out


@dataclass
class Detection:
    polygon: np.ndarray
    score: float
    pmd: float
    area: int
    mask: np.ndarray = field(repr=False)   # bolded mask inside its window
    origin: tuple[int, int] = (0, 0)       # (row, col) of mask[0, 0]

    def full_mask(self, height: int, width: int) -> np.ndarray:
        out = np.zeros((height, width), dtype=bool)
        r0, c0 = self.origin
        out[r0:r0 + self.mask.shape[0], c0:c0 + self.mask.shape[1]] = self.mask
        return out


def decode_detailed(cls, reg, cm_scale: float = 0.5, bin_threshold: float = 0.5,
                    min_area: int = 16, reduce: str = "mean"):
    """Full decode; returns ``(detections, stage_seconds)``.

    ``reduce`` picks how the per-pixel PMD map is collapsed per component:
    ``"mean"`` or ``"median"``.  A component whose PMD values are all equal
    uses that value verbatim.
    """
    if reduce not in ("mean", "median"):
        raise ValueError(f"unknown reduce {reduce!r}")
    cls = np.asarray(cls, dtype=np.float64)
    reg = np.asarray(reg, dtype=np.float64)
    if cls.shape != reg.shape:
        raise ShapeMismatch(f"cls {cls.shape} vs reg {reg.shape}")
    timings = dict.fromkeys(STAGES, 0.0)

    t = time.perf_counter()
    binary = cls > bin_threshold
    timings["binarize"] = time.perf_counter() - t

    t = time.perf_counter()
    labels, n = geo.label_components(binary)
    slices = ndimage.find_objects(labels) if n else []
    timings["components"] = time.perf_counter() - t

    out = []
    for k, sl in enumerate(slices, start=1):
        t = time.perf_counter()
        comp = labels[sl] == k
        area = int(comp.sum())
        if area < min_area:
            timings["bolding"] += time.perf_counter() - t
            continue
        probs = cls[sl][comp]
        pmds = reg[sl][comp]
        lo, hi = pmds.min(), pmds.max()
        if lo == hi:
            pmd = float(lo)
        elif reduce == "mean":
            pmd = float(pmds.mean())
        else:
            pmd = float(np.median(pmds))
        score = float(probs.mean())
        if not pmd > 0:
            timings["bolding"] += time.perf_counter() - t
            continue
        bolded, r0, c0 = _bold_window(comp, sl[0].start, sl[1].start, cls.shape,
                                      erosion_radius(pmd, cm_scale))
        timings["bolding"] += time.perf_counter() - t

        t = time.perf_counter()
        poly = geo.trace_outer_boundary(bolded)
        poly[:, 0] += c0
        poly[:, 1] += r0
        timings["tracing"] += time.perf_counter() - t
        out.append(Detection(poly, score, pmd, int(bolded.sum()), bolded, (r0, c0)))
    return out, timings


def decode(cls, reg, cm_scale: float = 0.5, bin_threshold: float = 0.5,
           min_area: int = 16, reduce: str = "mean") -> list[tuple[np.ndarray, float]]:
    """Text polygons with scores, in component order (first pixel in raster order)."""
    dets, _ = decode_detailed(cls, reg, cm_scale, bin_threshold, min_area, reduce)
    return [(d.polygon, d.score) for d in dets]
