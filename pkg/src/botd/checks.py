"""Self-checks of the loss functions, run by ``botd loss-check``."""

from __future__ import annotations

import math

import numpy as np

from . import losses

FD_STEP = 1e-4
GRAD_RTOL = 1e-5


def central_difference(f, x: float, h: float = FD_STEP) -> float:
    return (f(x + h) - f(x - h)) / (2 * h)


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def exactness_suite(rng: np.random.Generator) -> dict:
    worst_dice = 0.0
    for _ in range(100):
        shape = tuple(rng.integers(1, 33, size=2))
        x = rng.random(shape) < rng.random()
        worst_dice = max(worst_dice, abs(losses.dice_loss(x, x)))
    values = {
        "dice_self_max": worst_dice,
        "pmd_iou_loss_1_1": losses.pmd_iou_loss(1.0, 1.0),
        "pmd_iou_loss_2_1": losses.pmd_iou_loss(2.0, 1.0),
        "pmd_iou_n8_s4_1_2": losses.pmd_iou(1.0, losses.PmdIoUContext(8, 4), gt=2.0),
    }
    ok = (values["dice_self_max"] == 0.0
          and abs(values["pmd_iou_loss_1_1"]) <= 1e-9
          and abs(values["pmd_iou_loss_2_1"] - math.log(2)) <= 1e-9
          and abs(values["pmd_iou_n8_s4_1_2"] - 2 / 3) <= 1e-12)
    return {"name": "exactness", "passed": bool(ok), "values": values}


def gradient_suite(rng: np.random.Generator, points: int = 20) -> dict:
    worst = 0.0
    # PMD IoU loss at the fixed grid plus random points, away from pred == gt
    gt = 2.0
    preds = [0.5, 1.0, 3.0, 10.0] + rng.uniform(0.3, 12.0, points - 4).tolist()
    for p in preds:
        if abs(p - gt) < 10 * FD_STEP:
            p += 0.5
        fd = central_difference(lambda v: losses.pmd_iou_loss(v, gt), p)
        worst = max(worst, _rel_err(losses.pmd_iou_loss_grad(p, gt), fd))
    pmd_worst = worst

    worst = 0.0
    for _ in range(points):
        shape = tuple(rng.integers(2, 9, size=2))
        pred = rng.uniform(0.05, 0.95, shape)
        gtm = rng.random(shape) < 0.5
        grad = losses.dice_loss_grad(pred, gtm)
        idx = tuple(int(rng.integers(0, s)) for s in shape)

        def f(v, idx=idx, pred=pred, gtm=gtm):
            q = pred.copy()
            q[idx] = v
            return losses.dice_loss(q, gtm)

        worst = max(worst, _rel_err(float(grad[idx]), central_difference(f, float(pred[idx]))))
    return {"name": "gradients", "passed": bool(pmd_worst <= GRAD_RTOL and worst <= GRAD_RTOL),
            "values": {"pmd_iou_loss_max_rel_err": pmd_worst, "dice_max_rel_err": worst,
                       "points": points, "step": FD_STEP, "tolerance": GRAD_RTOL}}


def scale_invariance_suite() -> dict:
    p, g = 3.0, 2.0
    base = losses.pmd_iou_loss(p, g)
    base_l1 = losses.smooth_l1_loss(p, g)
    diffs, ratios = {}, {}
    for k in (0.1, 1.0, 10.0, 100.0):
        diffs[str(k)] = losses.pmd_iou_loss(k * p, k * g) - base
        ratios[str(k)] = losses.smooth_l1_loss(k * p, k * g) / base_l1
    ok = all(abs(d) <= 1e-12 for d in diffs.values())
    return {"name": "scale_invariance", "passed": bool(ok),
            "values": {"pmd_iou_loss_delta": diffs, "smooth_l1_ratio": ratios}}


def log_iou_suite() -> dict:
    worst = 0.0
    for p, g in [(0.5, 2.0), (1.0, 2.0), (3.0, 2.0), (10.0, 2.0), (7.3, 0.4)]:
        ratio = losses.pmd_iou_ratio(p, g, n=2, s_cm=0.0)
        worst = max(worst, abs(losses.pmd_iou_loss(p, g) + math.log(ratio)))
    return {"name": "loss_is_neg_log_iou", "passed": bool(worst <= 1e-9), "values": {"max_abs_err": worst}}


def descent_trace(start: float = 10.0, gt: float = 2.0, step: float = 0.1, iterations: int = 500,
                  grad=losses.pmd_iou_loss_grad) -> list[float]:
    x = start
    out = [x]
    for _ in range(iterations):
        x = x - step * grad(x, gt)
        out.append(x)
    return out


def descent_report() -> dict:
    # informational: fixed-step subgradient descent ends in a band of
    # half-width about step / gt around the optimum, not at the optimum
    trace = np.asarray(descent_trace())
    err = np.abs(trace - 2.0)
    band = 0.1 / (2.0 - 0.1)
    inside = np.flatnonzero(err <= band)
    return {"name": "descent", "informational": True,
            "values": {"final": float(trace[-1]), "final_abs_err": float(err[-1]),
                       "band": band, "first_iteration_in_band": int(inside[0]) if inside.size else None}}


def run_loss_checks(seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    suites = [exactness_suite(rng), gradient_suite(rng), scale_invariance_suite(), log_iou_suite()]
    return {"passed": bool(all(s["passed"] for s in suites)), "suites": suites, "reports": [descent_report()]}
