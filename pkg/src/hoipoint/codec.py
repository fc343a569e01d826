"""
Ground-truth encoding of interaction points and vectors, and peak decoding.

Heatmaps are numpy arrays of shape (C, H, W) indexed ``[class, y, x]``.
Vector fields are (2, H, W) with channel 0 holding |v_x| and channel 1 |v_y|.
"""

import math
from typing import Sequence

import numpy as np

from .geometry import Point, UnsignedVector
from .structures import InteractionCandidate, InteractionTriplet

DEFAULT_SIGMA = 2.0
DEFAULT_TOPK = 100


class OutOfBoundsError(ValueError):
    pass


class PointCollisionError(ValueError):
    """Two triplets with different vectors share one interaction-point cell."""

    def __init__(self, cell, first: int, second: int):
        self.cell = cell
        self.first = first
        self.second = second
        super().__init__(
            f"triplets {first} and {second} share interaction cell {cell} "
            "with different vectors"
        )


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def point_cell(p: Point, height: int, width: int) -> tuple[int, int]:
    """Nearest integer cell ``(x, y)`` for a grid point; raises if off-grid."""
    x, y = round_half_up(p.x), round_half_up(p.y)
    if not (0 <= x < width and 0 <= y < height):
        raise OutOfBoundsError(f"point ({p.x}, {p.y}) -> cell ({x}, {y}) outside {width}x{height} grid")
    return x, y


def gaussian_splat(height: int, width: int, cx: int, cy: int, sigma: float) -> np.ndarray:
    ys = np.arange(height, dtype=np.float64)[:, None] - cy
    xs = np.arange(width, dtype=np.float64)[None, :] - cx
    return np.exp(-(xs * xs + ys * ys) / (2.0 * sigma * sigma))


def encode_points(
    triplets: Sequence[InteractionTriplet],
    num_classes: int,
    height: int,
    width: int,
    sigma: float = DEFAULT_SIGMA,
) -> np.ndarray:
    """Render one Gaussian per triplet on its action channel.

    Overlapping Gaussians are combined by element-wise maximum, so every
    encoded cell equals exactly 1.0 and the map stays in [0, 1].
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    hm = np.zeros((num_classes, height, width), dtype=np.float64)
    for t in triplets:
        if not 0 <= t.action_id < num_classes:
            raise ValueError(f"action id {t.action_id} outside [0, {num_classes})")
        x, y = point_cell(t.interaction_point(), height, width)
        np.maximum(hm[t.action_id], gaussian_splat(height, width, x, y, sigma), out=hm[t.action_id])
    return hm


def encode_vectors(
    triplets: Sequence[InteractionTriplet], height: int, width: int
) -> tuple[np.ndarray, np.ndarray]:
    """Unsigned vector targets at each triplet's interaction cell.

    Returns ``(field, mask)``; ``mask[y, x]`` is 1 on supervised cells. Several
    actions of the same human/object pair share a cell and a vector; two
    triplets landing on the same cell with different vectors raise
    :class:`PointCollisionError`.
    """
    field = np.zeros((2, height, width), dtype=np.float64)
    mask = np.zeros((height, width), dtype=np.float64)
    owner: dict[tuple[int, int], int] = {}
    for i, t in enumerate(triplets):
        x, y = point_cell(t.interaction_point(), height, width)
        v = t.interaction_vector()
        if (x, y) in owner:
            if (field[0, y, x], field[1, y, x]) != (v.vx_abs, v.vy_abs):
                raise PointCollisionError((x, y), owner[(x, y)], i)
            continue
        owner[(x, y)] = i
        field[0, y, x] = v.vx_abs
        field[1, y, x] = v.vy_abs
        mask[y, x] = 1.0
    return field, mask


def center_pool(fmap: np.ndarray) -> np.ndarray:
    """Each cell becomes its row maximum plus its column maximum."""
    fmap = np.asarray(fmap, dtype=np.float64)
    if fmap.ndim != 2:
        raise ValueError("center_pool expects a single-channel (H, W) map")
    return fmap.max(axis=1, keepdims=True) + fmap.max(axis=0, keepdims=True)


def local_maxima(hm: np.ndarray) -> np.ndarray:
    """Boolean mask of cells >= all 8 neighbours within their channel."""
    c, h, w = hm.shape
    padded = np.full((c, h + 2, w + 2), -np.inf)
    padded[:, 1:-1, 1:-1] = hm
    keep = np.ones(hm.shape, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            keep &= hm >= padded[:, 1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return keep


def decode_peaks(
    hm: np.ndarray,
    k: int = DEFAULT_TOPK,
    thresholds=0.0,
    vf: np.ndarray | None = None,
) -> list[InteractionCandidate]:
    """Extract the top-k interaction-point peaks.

    Args:
        hm: (C, H, W) heatmap with values in [0, 1].
        k: maximum number of candidates returned.
        thresholds: scalar or per-class score floors; a peak is kept when its
            score is >= its class floor.
        vf: optional (2, H, W) unsigned vector field read at every peak.

    Returns:
        Candidates ordered by score descending, then class, y, x ascending.
    """
    hm = np.asarray(hm, dtype=np.float64)
    if hm.ndim != 3:
        raise ValueError(f"heatmap must be (C, H, W), got shape {hm.shape}")
    if vf is not None and vf.shape != (2,) + hm.shape[1:]:
        raise ValueError(f"vector field shape {vf.shape} does not match heatmap {hm.shape}")
    if k <= 0:
        return []
    floors = np.broadcast_to(np.asarray(thresholds, dtype=np.float64), (hm.shape[0],))
    keep = local_maxima(hm) & (hm >= floors[:, None, None])
    cls, ys, xs = np.nonzero(keep)
    scores = hm[cls, ys, xs]
    order = np.lexsort((xs, ys, cls, -scores))[:k]
    out = []
    for i in order:
        x, y = int(xs[i]), int(ys[i])
        # predicted lengths can dip below zero; clamp to keep them unsigned
        vec = (
            UnsignedVector(max(0.0, float(vf[0, y, x])), max(0.0, float(vf[1, y, x])))
            if vf is not None
            else UnsignedVector(0.0, 0.0)
        )
        out.append(InteractionCandidate(int(cls[i]), Point(float(x), float(y)), float(scores[i]), vec))
    return out


def dynamic_thresholds(train_counts, t_low: float = 0.01, t_high: float = 0.05, cutoff: int = 10) -> list[float]:
    """Per-class score floors: ``t_low`` for classes with fewer than ``cutoff``
    training samples, ``t_high`` otherwise."""
    if t_low > t_high:
        raise ValueError("t_low must not exceed t_high")
    out = []
    for n in train_counts:
        if n < 0:
            raise ValueError("training counts must be non-negative")
        out.append(t_low if n < cutoff else t_high)
    return out
