"""Portable (PPM) overlays: ground truth, CM outline, PMD segment, reconstruction."""

from __future__ import annotations

import math

import numpy as np

from . import geometry as geo

COLORS = {
    "text": (50, 50, 50),
    "gt": (40, 110, 255),
    "cm": (255, 220, 0),
    "pmd": (255, 30, 30),
    "pred": (0, 230, 0),
}


def write_ppm(path, rgb) -> None:
    a = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = a.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(a.tobytes())


def _segment_pixels(x0, y0, x1, y1, height, width):
    n = max(int(math.ceil(2 * math.hypot(x1 - x0, y1 - y0))), 1)
    t = np.linspace(0.0, 1.0, n + 1)
    cols = np.floor(x0 + t * (x1 - x0)).astype(int)
    rows = np.floor(y0 + t * (y1 - y0)).astype(int)
    ok = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
    return rows[ok], cols[ok]


def pmd_segment_end(text_mask, center) -> tuple[float, float]:
    """Center of the background pixel nearest to ``center`` (off-image counts)."""
    m = np.pad(np.asarray(text_mask, dtype=bool), 1, constant_values=False)
    rows, cols = np.nonzero(~m)
    cx, cy = center[0] + 1, center[1] + 1
    d2 = (cols + 0.5 - cx) ** 2 + (rows + 0.5 - cy) ** 2
    k = int(np.argmin(d2))
    return cols[k] + 0.5 - 1, rows[k] + 0.5 - 1


def render_overlay(width: int, height: int, annotations=(), labels=(), predictions=()) -> np.ndarray:
    """RGB image (uint8, H x W x 3) in the style of the qualitative figures.

    ``labels`` must be aligned with the care annotations when both are given.
    """
    img = np.zeros((height, width, 3), dtype=np.uint8)
    texts = [geo.rasterize_polygon(a.polygon, width, height) for a in annotations]
    for t in texts:
        img[t] = COLORS["text"]
    for t in texts:
        img[geo.outline(t)] = COLORS["gt"]
    for lab in labels:
        img[geo.outline(lab.cm)] = COLORS["cm"]
    for poly in predictions:
        img[geo.outline(geo.rasterize_polygon(poly, width, height))] = COLORS["pred"]
    care_texts = [t for t, a in zip(texts, annotations) if a.care]
    for t, lab in zip(care_texts, labels):
        ex, ey = pmd_segment_end(t, lab.center)
        rr, cc = _segment_pixels(lab.center[0], lab.center[1], ex, ey, height, width)
        img[rr, cc] = COLORS["pmd"]
    return img
