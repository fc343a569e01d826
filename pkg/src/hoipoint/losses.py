"""
Training objectives for the interaction point and vector heads.

Values are reduced with :func:`math.fsum`, which is exactly rounded and hence
independent of the summation order; the reported value is the same for any
permutation of cells or points.
"""

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .geometry import Point, UnsignedVector

EPS = 1e-4


@dataclass(frozen=True)
class LossReport:
    l_point: float
    l_vector: float
    l_total: float
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def focal_loss(pred, target, alpha: float = 2.0, beta: float = 4.0, eps: float = EPS, return_grad: bool = False):
    """Penalty-reduced focal loss over interaction-point heatmaps.

    Cells where the target equals 1 are positives; every other cell is a
    negative down-weighted by ``(1 - target) ** beta``. The sum is normalised
    by the number of positives (at least 1). Predictions are clamped to
    ``[eps, 1 - eps]`` before the logarithms.

    Returns the loss, or ``(loss, grad)`` with the gradient w.r.t. ``pred``
    when ``return_grad`` is set. Clamped cells receive zero gradient.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    p = np.clip(pred, eps, 1 - eps)
    pos = target == 1
    n_pos = max(int(pos.sum()), 1)
    neg_w = (1 - target) ** beta
    pos_term = (1 - p) ** alpha * np.log(p)
    neg_term = neg_w * p**alpha * np.log1p(-p)
    cell = np.where(pos, pos_term, neg_term)
    loss = -math.fsum(cell.ravel().tolist()) / n_pos
    if not return_grad:
        return loss
    d_pos = -alpha * (1 - p) ** (alpha - 1) * np.log(p) + (1 - p) ** alpha / p
    d_neg = neg_w * (alpha * p ** (alpha - 1) * np.log1p(-p) - p**alpha / (1 - p))
    grad = -np.where(pos, d_pos, d_neg) / n_pos
    inside = (pred >= eps) & (pred <= 1 - eps)
    return loss, np.where(inside, grad, 0.0)


def vector_l1_loss(
    field,
    targets: Sequence[tuple[Point, UnsignedVector]],
    return_grad: bool = False,
):
    """Mean over supervised points of ``|Vx - tx| + |Vy - ty|``.

    ``field`` is a (2, H, W) prediction; each target is a cell ``(x, y)`` and
    its unsigned vector. An empty target list gives 0. The gradient uses the
    subgradient 0 at kinks.
    """
    field = np.asarray(field, dtype=np.float64)
    grad = np.zeros_like(field) if return_grad else None
    n = len(targets)
    if n == 0:
        return (0.0, grad) if return_grad else 0.0
    _, h, w = field.shape
    terms = []
    for pt, vec in targets:
        x, y = int(pt[0]), int(pt[1])
        if not (0 <= x < w and 0 <= y < h):
            raise ValueError(f"target point ({x}, {y}) outside {w}x{h} grid")
        dx = field[0, y, x] - vec[0]
        dy = field[1, y, x] - vec[1]
        terms.append(abs(dx))
        terms.append(abs(dy))
        if return_grad:
            grad[0, y, x] += np.sign(dx) / n
            grad[1, y, x] += np.sign(dy) / n
    loss = math.fsum(terms) / n
    return (loss, grad) if return_grad else loss


def masked_targets(target_field, mask) -> list[tuple[Point, UnsignedVector]]:
    """Supervised (cell, vector) pairs from an encoded vector field and mask, row-major."""
    target_field = np.asarray(target_field)
    ys, xs = np.nonzero(np.asarray(mask) > 0)
    return [
        (Point(float(x), float(y)), UnsignedVector(float(target_field[0, y, x]), float(target_field[1, y, x])))
        for y, x in zip(ys.tolist(), xs.tolist())
    ]


def total_loss(l_point: float, l_vector: float, lambda_v: float = 0.1) -> float:
    return l_point + lambda_v * l_vector


def loss_report(pred_points, pred_vectors, target_points, target_vectors, target_mask, lambda_v: float = 0.1) -> LossReport:
    """All three loss values for one image."""
    lp = focal_loss(pred_points, target_points)
    lv = vector_l1_loss(pred_vectors, masked_targets(target_vectors, target_mask))
    n = max(int((np.asarray(target_points) == 1).sum()), 1)
    return LossReport(lp, lv, total_loss(lp, lv, lambda_v), n)
