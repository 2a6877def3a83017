"""Training objectives with analytic gradients.

Every loss has a ``*_grad`` companion returning the derivative with respect
to the prediction, so the objectives can be checked against finite
differences without an autodiff framework.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidPmd, ShapeMismatch


@dataclass(frozen=True)
class LossSample:
    pred_pmd: float
    gt_pmd: float

    def __post_init__(self):
        if not (self.pred_pmd > 0 and self.gt_pmd > 0):
            raise InvalidPmd(f"PMD values must be positive: {self.pred_pmd}, {self.gt_pmd}")


@dataclass(frozen=True)
class PmdIoUContext:
    n: int        # points on the CM outline
    s_cm: float   # CM area, pixels^2

    def __post_init__(self):
        if self.n < 1 or self.s_cm < 1:
            raise ValueError(f"need n >= 1 and s_cm >= 1, got n={self.n}, s_cm={self.s_cm}")


def _sample(pred, gt=None) -> LossSample:
    if isinstance(pred, LossSample):
        return pred
    return LossSample(float(pred), float(gt))


# --------------------------------------------------------------------------
# classification: soft Dice
# --------------------------------------------------------------------------

def _dice_terms(pred, gt):
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeMismatch(f"pred {p.shape} vs gt {g.shape}")
    return p, g, float((p * g).sum()), float(p.sum() + g.sum())


def dice_loss(pred, gt) -> float:
    """``1 - (2 * sum(pred * gt) + 1) / (sum(pred) + sum(gt) + 1)``."""
    _, _, inter, total = _dice_terms(pred, gt)
    return 1.0 - (2.0 * inter + 1.0) / (total + 1.0)


def dice_loss_grad(pred, gt) -> np.ndarray:
    p, g, inter, total = _dice_terms(pred, gt)
    den = total + 1.0
    return -(2.0 * g * den - (2.0 * inter + 1.0)) / (den * den)


# --------------------------------------------------------------------------
# regression: PMD IoU and baselines
# --------------------------------------------------------------------------

def pmd_iou_ratio(pred: float, gt: float, n: float, s_cm: float) -> float:
    """Area ratio of the two bolded masks, ``min(a, b) / max(a, b)`` with
    ``a = n/2 * pred + s_cm`` and ``b = n/2 * gt + s_cm``.

    No validation; :func:`pmd_iou` is the checked entry point.
    """
    a = 0.5 * n * pred + s_cm
    b = 0.5 * n * gt + s_cm
    if a == b:
        return 1.0
    return min(a, b) / max(a, b)


def pmd_iou(sample, ctx: PmdIoUContext, gt=None) -> float:
    """PMD IoU of a prediction against ground truth around a fixed CM.

    ``sample`` may be a :class:`LossSample` or a bare predicted PMD (then
    pass ``gt`` as well).
    """
    s = _sample(sample, gt)
    return pmd_iou_ratio(s.pred_pmd, s.gt_pmd, ctx.n, ctx.s_cm)


def pmd_iou_loss(sample, gt=None) -> float:
    """``log(max(pred, gt) / min(pred, gt))`` (natural log)."""
    s = _sample(sample, gt)
    return math.log(max(s.pred_pmd, s.gt_pmd) / min(s.pred_pmd, s.gt_pmd))


def pmd_iou_loss_grad(sample, gt=None) -> float:
    # subgradient 0 at the kink pred == gt
    s = _sample(sample, gt)
    if s.pred_pmd < s.gt_pmd:
        return -1.0 / s.pred_pmd
    if s.pred_pmd > s.gt_pmd:
        return 1.0 / s.pred_pmd
    return 0.0


def _pair(sample, gt) -> tuple[float, float]:
    if isinstance(sample, LossSample):
        return sample.pred_pmd, sample.gt_pmd
    return float(sample), float(gt)


def smooth_l1_loss(sample, gt=None, beta: float = 1.0) -> float:
    if beta <= 0:
        raise ValueError("beta must be positive")
    pred, target = _pair(sample, gt)
    d = abs(pred - target)
    return 0.5 * d * d / beta if d < beta else d - 0.5 * beta


def smooth_l1_loss_grad(sample, gt=None, beta: float = 1.0) -> float:
    pred, target = _pair(sample, gt)
    d = pred - target
    if abs(d) < beta:
        return d / beta
    return math.copysign(1.0, d)


def total_loss(cls_loss: float, reg_loss: float, lam: float = 1.0) -> float:
    """Classification loss plus ``lam`` times regression loss."""
    return cls_loss + lam * reg_loss
