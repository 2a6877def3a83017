"""Per-instance center mask (CM) / polar minimum distance (PMD) labels and head-target maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import EmptyMask, ShapeMismatch


def erosion_radius(pmd: float, cm_scale: float) -> float:
    """Radius that shrinks the text mask to its CM (and bolds the CM back).

    Label generation and reconstruction must share this exact expression so
    that erosion and dilation thresholds agree to the last bit.
    """
    return (1.0 - cm_scale) * pmd


def _check_scale(cm_scale: float) -> None:
    if not 0.0 < cm_scale < 1.0:
        raise ValueError(f"cm_scale must lie in (0, 1), got {cm_scale}")


@dataclass(frozen=True, eq=False)
class InstanceLabel:
    center: geo.Point2
    pmd: float
    cm: np.ndarray
    cm_scale: float

    @property
    def radius(self) -> float:
        return erosion_radius(self.pmd, self.cm_scale)

    def __eq__(self, other):
        if not isinstance(other, InstanceLabel):
            return NotImplemented
        return (self.center == other.center and self.pmd == other.pmd
                and self.cm_scale == other.cm_scale and np.array_equal(self.cm, other.cm))


@dataclass(frozen=True, eq=False)
class LabelMaps:
    cls: np.ndarray   # bool (H, W)
    reg: np.ndarray   # float64 (H, W), PMD in pixels on CM pixels, else 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.cls.shape


def label_from_mask(text: np.ndarray, cm_scale: float) -> InstanceLabel:
    """Build the label of an already rasterized text mask."""
    _check_scale(cm_scale)
    text = np.asarray(text, dtype=bool)
    bb = geo.mask_bbox(text)
    if bb is None:
        raise EmptyMask("text mask is empty")
    r0, r1, c0, c1 = bb
    # everything outside the bounding box is background, so the crop gives
    # the same distances as the full image
    sub = text[r0:r1, c0:c1]
    d2 = geo.squared_distance_transform(sub)
    ci, cj = divmod(int(np.argmax(d2)), d2.shape[1])
    pmd = float(np.sqrt(d2[ci, cj]))
    r = erosion_radius(pmd, cm_scale)

    eroded = d2 > r * r
    cm_sub = np.zeros_like(sub)
    if eroded[ci, cj]:
        labels, _ = geo.label_components(eroded)
        cm_sub = labels == labels[ci, cj]
    else:
        cm_sub[ci, cj] = True

    cm = np.zeros_like(text)
    cm[r0:r1, c0:c1] = cm_sub
    return InstanceLabel(geo.Point2(c0 + cj + 0.5, r0 + ci + 0.5), pmd, cm, float(cm_scale))


def make_instance_label(poly, width: int, height: int, cm_scale: float = 0.5) -> InstanceLabel:
    """Rasterize ``poly`` and derive its center, PMD and CM.

    The CM is the component of the text mask eroded by
    ``(1 - cm_scale) * pmd`` that contains the center.
    """
    _check_scale(cm_scale)
    text = geo.rasterize_polygon(poly, width, height)
    if not text.any():
        raise EmptyMask("polygon covers no pixel center inside the image")
    return label_from_mask(text, cm_scale)


def render_label_maps(labels, width: int, height: int) -> LabelMaps:
    """Union of CMs as ``cls``; per-pixel PMD as ``reg``.

    Where CMs overlap the smaller PMD wins.
    """
    cls = np.zeros((height, width), dtype=bool)
    reg = np.full((height, width), np.inf)
    for lab in labels:
        if lab.cm.shape != (height, width):
            raise ShapeMismatch(f"CM shape {lab.cm.shape} != {(height, width)}")
        cls |= lab.cm
        np.minimum(reg, np.where(lab.cm, lab.pmd, np.inf), out=reg)
    reg[~cls] = 0.0
    return LabelMaps(cls, reg)


def label_image(annotations, width: int, height: int, cm_scale: float = 0.5,
                include_dont_care: bool = False) -> list[InstanceLabel]:
    """Labels for every (care) annotation of one image.

    Annotations whose polygon covers no pixel center are skipped.
    """
    out = []
    for ann in annotations:
        if not ann.care and not include_dont_care:
            continue
        text = geo.rasterize_polygon(ann.polygon, width, height)
        if text.any():
            out.append(label_from_mask(text, cm_scale))
    return out
