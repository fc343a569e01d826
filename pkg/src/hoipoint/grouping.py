"""
Interaction grouping: pair decoded interaction points with detected human and
object boxes.

A (human, object, point) combination is accepted when the interaction box
built from the point and its unsigned vector overlaps both detection boxes and
its four corners lie within ``d_tau`` of the corners of the reference box
spanned by the two detection centers. The angle and distance-ratio filters are
the weaker geometric baselines used for ablations.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .geometry import (
    Point,
    boxes_overlap,
    corner_distances,
    interaction_box,
    overlaps,
    reference_box,
)
from .structures import InteractionCandidate, InteractionTriplet, ScoredDetection

MODES = ("full", "angle_only", "angle_plus_ratio", "box_only", "box_plus_corner")


@dataclass(frozen=True)
class GroupingConfig:
    h_tau: float = 0.4
    o_tau: float = 0.1
    a_tau: float = 0.0
    d_tau: float = 2.0
    angle_min: float = 5 * math.pi / 6
    ratio_max: float = 1.5
    mode: str = "full"
    no_object_classes: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "no_object_classes", frozenset(self.no_object_classes))
        if self.mode not in MODES:
            raise ValueError(f"unknown grouping mode {self.mode!r}; expected one of {MODES}")
        for name in ("h_tau", "o_tau", "a_tau", "d_tau"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 < self.angle_min <= math.pi:
            raise ValueError("angle_min must lie in (0, pi]")
        if not self.ratio_max >= 1:
            raise ValueError("ratio_max must be >= 1")

    @property
    def uses_boxes(self) -> bool:
        return self.mode in ("full", "box_only", "box_plus_corner")

    @property
    def uses_corners(self) -> bool:
        return self.mode in ("full", "box_plus_corner")

    @property
    def uses_ratio(self) -> bool:
        return self.mode == "angle_plus_ratio"


class ConditionReport(NamedTuple):
    passed: bool
    human_overlap: bool
    object_overlap: bool
    corners_ok: bool
    distances: tuple[float, float, float, float]


def check_conditions(
    h: ScoredDetection, o: ScoredDetection, cand: InteractionCandidate, cfg: GroupingConfig
) -> ConditionReport:
    """Evaluate the three box/corner conditions for one combination.

    The overlap conditions use :func:`boxes_overlap`, which equals ``IoU > 0``
    except that a flat interaction box (one vector component 0) still
    overlaps a detection it passes through.
    """
    ibox = interaction_box(cand.pos, cand.vector)
    rbox = reference_box(h.center, o.center)
    h_ok = boxes_overlap(h.bbox, ibox.to_box())
    o_ok = boxes_overlap(o.bbox, ibox.to_box())
    dists = corner_distances(ibox, rbox)
    c_ok = all(d < cfg.d_tau for d in dists)
    return ConditionReport(h_ok and o_ok and c_ok, h_ok, o_ok, c_ok, dists)


def angle_filter(h_center: Point, o_center: Point, p: Point, angle_min: float) -> bool:
    """Pass when the angle between PH and PO is at least ``angle_min``.

    A point coinciding with either center passes.
    """
    ax, ay = h_center.x - p.x, h_center.y - p.y
    bx, by = o_center.x - p.x, o_center.y - p.y
    na = math.sqrt(ax * ax + ay * ay)
    nb = math.sqrt(bx * bx + by * by)
    if na == 0 or nb == 0:
        return True
    return (ax * bx + ay * by) / (na * nb) <= math.cos(angle_min)


def dist_ratio_filter(h_center: Point, o_center: Point, p: Point, ratio_max: float) -> bool:
    """Pass when max(|PH|, |PO|) / min(|PH|, |PO|) <= ``ratio_max``."""
    ax, ay = h_center.x - p.x, h_center.y - p.y
    bx, by = o_center.x - p.x, o_center.y - p.y
    na = math.sqrt(ax * ax + ay * ay)
    nb = math.sqrt(bx * bx + by * by)
    lo, hi = min(na, nb), max(na, nb)
    if hi == 0:
        return True
    if lo == 0:
        return False
    return hi / lo <= ratio_max


def _boxes(dets: Sequence[ScoredDetection]) -> np.ndarray:
    return np.array([tuple(d.bbox) for d in dets], dtype=np.float64).reshape(-1, 4)


def _pair_mask(hb, ob, p, v, cfg: GroupingConfig) -> np.ndarray:
    """(Nh, No, Na) acceptance mask for object-bearing candidates."""
    hc = np.stack([(hb[:, 0] + hb[:, 2]) / 2, (hb[:, 1] + hb[:, 3]) / 2], axis=1)
    oc = np.stack([(ob[:, 0] + ob[:, 2]) / 2, (ob[:, 1] + ob[:, 3]) / 2], axis=1)
    nh, no, na = len(hb), len(ob), len(p)
    mask = np.ones((nh, no, na), dtype=bool)

    if cfg.uses_boxes:
        ib = np.concatenate([p - v, p + v], axis=1)
        mask &= overlaps(hb, ib)[:, None, :]
        mask &= overlaps(ob, ib)[None, :, :]
    if cfg.uses_corners:
        rx1 = np.minimum(hc[:, None, 0], oc[None, :, 0])[..., None]
        ry1 = np.minimum(hc[:, None, 1], oc[None, :, 1])[..., None]
        rx2 = np.maximum(hc[:, None, 0], oc[None, :, 0])[..., None]
        ry2 = np.maximum(hc[:, None, 1], oc[None, :, 1])[..., None]
        ix1, iy1 = p[:, 0] - v[:, 0], p[:, 1] - v[:, 1]
        ix2, iy2 = p[:, 0] + v[:, 0], p[:, 1] + v[:, 1]
        for cx, cy, rx, ry in ((ix1, iy1, rx1, ry1), (ix2, iy1, rx2, ry1), (ix1, iy2, rx1, ry2), (ix2, iy2, rx2, ry2)):
            dx = cx - rx
            dy = cy - ry
            mask &= np.sqrt(dx * dx + dy * dy) < cfg.d_tau
    if not cfg.uses_boxes:
        # PH is (Nh, Na), PO is (No, Na)
        ax = hc[:, None, 0] - p[None, :, 0]
        ay = hc[:, None, 1] - p[None, :, 1]
        bx = oc[:, None, 0] - p[None, :, 0]
        by = oc[:, None, 1] - p[None, :, 1]
        na_ = np.sqrt(ax * ax + ay * ay)[:, None, :]
        nb_ = np.sqrt(bx * bx + by * by)[None, :, :]
        dot = ax[:, None, :] * bx[None, :, :] + ay[:, None, :] * by[None, :, :]
        degenerate = (na_ == 0) | (nb_ == 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            cos = dot / (na_ * nb_)
            mask &= degenerate | (cos <= math.cos(cfg.angle_min))
            if cfg.uses_ratio:
                lo = np.minimum(na_, nb_)
                hi = np.maximum(na_, nb_)
                ratio_ok = np.where(lo == 0, hi == 0, hi / np.where(lo == 0, 1.0, lo) <= cfg.ratio_max)
                mask &= ratio_ok
    return mask


def group_rows(
    humans: Sequence[ScoredDetection],
    objects: Sequence[ScoredDetection],
    candidates: Sequence[InteractionCandidate],
    cfg: GroupingConfig = GroupingConfig(),
) -> list[tuple[float, int, int, int, int]]:
    """Accepted combinations as ``(score, action, human, object, candidate)``
    index rows in output order; ``object`` is -1 for no-object actions."""
    hi = [i for i, h in enumerate(humans) if h.score > cfg.h_tau]
    oi = [j for j, o in enumerate(objects) if o.score > cfg.o_tau]
    ai = [k for k, a in enumerate(candidates) if a.score > cfg.a_tau and a.class_id not in cfg.no_object_classes]
    ni = [k for k, a in enumerate(candidates) if a.score > cfg.a_tau and a.class_id in cfg.no_object_classes]

    rows = []
    if hi and oi and ai:
        hb = _boxes([humans[i] for i in hi])
        ob = _boxes([objects[j] for j in oi])
        p = np.array([tuple(candidates[k].pos) for k in ai], dtype=np.float64)
        v = np.array([tuple(candidates[k].vector) for k in ai], dtype=np.float64)
        hs, os_, as_ = np.nonzero(_pair_mask(hb, ob, p, v, cfg))
        for a, b, c in zip(hs.tolist(), os_.tolist(), as_.tolist()):
            h, o, k = hi[a], oi[b], ai[c]
            s = humans[h].score * objects[o].score * candidates[k].score
            rows.append((s, candidates[k].class_id, h, o, k))
    if hi and ni:
        hb = _boxes([humans[i] for i in hi])
        p = np.array([tuple(candidates[k].pos) for k in ni], dtype=np.float64)
        inside = (
            (hb[:, None, 0] <= p[None, :, 0]) & (p[None, :, 0] <= hb[:, None, 2])
            & (hb[:, None, 1] <= p[None, :, 1]) & (p[None, :, 1] <= hb[:, None, 3])
        )
        for a, c in zip(*(x.tolist() for x in np.nonzero(inside))):
            h, k = hi[a], ni[c]
            rows.append((humans[h].score * candidates[k].score, candidates[k].class_id, h, -1, k))

    rows.sort(key=lambda r: (-r[0], r[1], r[2], r[3], r[4]))
    return rows


def group(
    humans: Sequence[ScoredDetection],
    objects: Sequence[ScoredDetection],
    candidates: Sequence[InteractionCandidate],
    cfg: GroupingConfig = GroupingConfig(),
) -> list[InteractionTriplet]:
    """Group interaction candidates with detections into scored triplets.

    Every (human, object, candidate) combination whose scores exceed the
    floors and whose geometry satisfies the mode's conditions yields one
    triplet scored ``human.score * object.score * candidate.score``.
    Candidates of no-object classes pair with a human alone when the point
    lies inside the human box (score ``human.score * candidate.score``).
    Output is sorted by score descending, then action, human index, object
    index and candidate index.
    """
    out = []
    for s, action, h, o, k in group_rows(humans, objects, candidates, cfg):
        cand = candidates[k]
        out.append(
            InteractionTriplet(
                human=humans[h],
                object=objects[o] if o >= 0 else None,
                action_id=action,
                score=s,
                point=cand.pos,
                vector=cand.vector,
            )
        )
    return out
