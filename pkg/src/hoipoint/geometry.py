"""
Coordinate-space primitives: points, boxes, IoU and the interaction/reference
box construction used by grouping.

Everything here lives in heatmap-grid units (image pixels divided by the
stride). Boxes are ``(x_min, y_min, x_max, y_max)``; ``x`` indexes columns and
``y`` indexes rows.
"""

import math
from typing import NamedTuple

import numpy as np


class Point(NamedTuple):
    x: float
    y: float


class UnsignedVector(NamedTuple):
    vx_abs: float
    vy_abs: float


class Box(NamedTuple):
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def center(self) -> Point:
        return Point((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def is_valid(self) -> bool:
        return (
            all(math.isfinite(c) for c in self)
            and self.x_min <= self.x_max
            and self.y_min <= self.y_max
        )

    def scaled(self, factor: float) -> "Box":
        return Box(*(c * factor for c in self))


class CornerSet(NamedTuple):
    """Corners of an axis-aligned rectangle in canonical order.

    ``tl`` is the (min x, min y) corner and ``br`` the (max x, max y) one.
    """

    tl: Point
    tr: Point
    bl: Point
    br: Point

    @classmethod
    def from_box(cls, box: Box) -> "CornerSet":
        x1, y1, x2, y2 = box
        return cls(Point(x1, y1), Point(x2, y1), Point(x1, y2), Point(x2, y2))

    def to_box(self) -> Box:
        return Box(self.tl.x, self.tl.y, self.br.x, self.br.y)


def midpoint(h: Point, o: Point) -> Point:
    """Interaction point of a human/object pair: the mean of the two centers."""
    return Point((h.x + o.x) / 2, (h.y + o.y) / 2)


def interaction_box(p: Point, v: UnsignedVector) -> CornerSet:
    """Rectangle of the four candidate human centers ``(p.x +- |vx|, p.y +- |vy|)``."""
    if v.vx_abs < 0 or v.vy_abs < 0:
        raise ValueError(f"unsigned vector must be non-negative, got {v}")
    return CornerSet.from_box(
        Box(p.x - v.vx_abs, p.y - v.vy_abs, p.x + v.vx_abs, p.y + v.vy_abs)
    )


def reference_box(h_center: Point, o_center: Point) -> CornerSet:
    """Rectangle spanned by the detected human and object centers."""
    return CornerSet.from_box(
        Box(
            min(h_center.x, o_center.x),
            min(h_center.y, o_center.y),
            max(h_center.x, o_center.x),
            max(h_center.y, o_center.y),
        )
    )


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes.

    Zero-area boxes give 0 unless they are identical, in which case the IoU is
    1 so that ``iou(a, a) == 1`` holds for every valid box.
    """
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = w * h if (w > 0 and h > 0) else 0.0
    union = a.area + b.area - inter
    if union <= 0:
        return 1.0 if tuple(a) == tuple(b) else 0.0
    return inter / union


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between box arrays of shape (N, 4) and (M, 4) -> (N, M)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    w = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    h = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.where((w > 0) & (h > 0), w * h, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    identical = np.all(a[:, None, :] == b[None, :, :], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return np.where(union > 0, out, identical.astype(np.float64))


def _axis_overlap(a1, a2, b1, b2):
    inner = (np.minimum(a2, b2) - np.maximum(a1, b1)) > 0
    a_point_in_b = (a1 == a2) & (b1 < a1) & (a1 < b2)
    b_point_in_a = (b1 == b2) & (a1 < b1) & (b1 < a2)
    same_point = (a1 == a2) & (b1 == b2) & (a1 == b1)
    return inner | a_point_in_b | b_point_in_a | same_point


def boxes_overlap(a: Box, b: Box) -> bool:
    """Whether two boxes share a region of positive extent.

    For boxes with positive area this is exactly ``iou(a, b) > 0``. A box that
    is flat along an axis (a segment or a point) overlaps along that axis when
    it lies strictly inside the other box's interval, so a zero-height
    interaction box through the middle of a detection still counts.
    """
    return bool(
        _axis_overlap(a.x_min, a.x_max, b.x_min, b.x_max) and _axis_overlap(a.y_min, a.y_max, b.y_min, b.y_max)
    )


def overlaps(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise :func:`boxes_overlap` for (N, 4) and (M, 4) arrays -> (N, M) bool."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    A = a[:, None, :]
    B = b[None, :, :]
    return _axis_overlap(A[..., 0], A[..., 2], B[..., 0], B[..., 2]) & _axis_overlap(
        A[..., 1], A[..., 3], B[..., 1], B[..., 3]
    )


def corner_distance(a: Point, b: Point) -> float:
    dx = a.x - b.x
    dy = a.y - b.y
    return math.sqrt(dx * dx + dy * dy)


def corner_distances(a: CornerSet, b: CornerSet) -> tuple[float, float, float, float]:
    """Euclidean distances between corresponding corners (tl, tr, bl, br)."""
    return (
        corner_distance(a.tl, b.tl),
        corner_distance(a.tr, b.tr),
        corner_distance(a.bl, b.bl),
        corner_distance(a.br, b.br),
    )
