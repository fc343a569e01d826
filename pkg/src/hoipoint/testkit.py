"""
Synthetic scenes and brute-force oracles.

The oracles re-derive grouping and AP from plain scalar arithmetic, without
the geometry helpers or vectorised code they are used to check.
"""

import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .codec import encode_points, encode_vectors
from .geometry import Box, Point, UnsignedVector
from .grouping import GroupingConfig
from .structures import InteractionCandidate, InteractionTriplet, ScoredDetection


class PackingError(RuntimeError):
    """No scene satisfying the separation constraints was found."""


@dataclass
class SceneBundle:
    seed: int
    height: int
    width: int
    num_classes: int
    triplets: list[InteractionTriplet]
    humans: list[ScoredDetection]
    objects: list[ScoredDetection]
    # (human index, object index or -1, action) for every ground-truth triplet
    gt_pairs: list[tuple[int, int, int]]
    heatmap: np.ndarray
    vectors: np.ndarray
    mask: np.ndarray
    no_object_classes: frozenset = field(default_factory=frozenset)
    n_distractors: int = 0

    def candidates(self) -> list[InteractionCandidate]:
        """Perfect candidates: one per triplet at its point with its true vector."""
        return [
            InteractionCandidate(t.action_id, t.interaction_point(), 1.0, t.interaction_vector())
            for t in self.triplets
        ]


def _half_size(rng: random.Random) -> float:
    return rng.choice((1.5, 2.0, 2.5, 3.0, 3.5, 4.0))


def _box_around(cx: float, cy: float, rng: random.Random) -> Box:
    hw, hh = _half_size(rng), _half_size(rng)
    return Box(cx - hw, cy - hh, cx + hw, cy + hh)


def _closed_overlap(a, b) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def _max_corner_gap(p, v, hc, oc) -> float:
    ix = (p[0] - v[0], p[0] + v[0])
    iy = (p[1] - v[1], p[1] + v[1])
    rx = (min(hc[0], oc[0]), max(hc[0], oc[0]))
    ry = (min(hc[1], oc[1]), max(hc[1], oc[1]))
    return max(math.sqrt((ix[a] - rx[a]) ** 2 + (iy[b] - ry[b]) ** 2) for a in (0, 1) for b in (0, 1))


def synth_scene(
    seed: int,
    n_humans: int = 2,
    n_objects: int = 2,
    n_actions: int = 2,
    distractors: int = 0,
    height: int = 48,
    width: int = 48,
    no_object_classes: Sequence[int] = (),
    sigma: float = 2.0,
    max_tries: int = 500,
) -> SceneBundle:
    """Random scene whose ground truth is recoverable by construction.

    Every human performs one action, with a random object unless the action
    is a no-object class. Box centers sit on even cells, so interaction points
    and vectors are integral. Rejection sampling enforces: interaction points
    more than 2 cells apart (Chebyshev), distinct human and object centers
    (axis-aligned pairs, whose interaction box is flat, are allowed), no
    non-ground-truth human/object pair
    whose reference box lies within 2 cells of a ground-truth interaction box,
    and no no-object point inside another human's box. Distractor detections
    (score in [0.5, 1)) never touch any interaction box.
    """
    if n_humans < 1 or n_actions < 1:
        raise ValueError("need at least one human and one action")
    no_obj = frozenset(no_object_classes)
    object_actions = [a for a in range(n_actions) if a not in no_obj]
    if n_objects == 0 and object_actions:
        object_actions = []
    rng = random.Random(seed)
    margin = 5
    if width - 2 * margin < 2 or height - 2 * margin < 2:
        raise PackingError(f"grid {width}x{height} too small")
    xs = list(range(margin + (margin % 2), width - margin, 2))
    ys = list(range(margin + (margin % 2), height - margin, 2))

    for _ in range(max_tries):
        hcs = [(float(rng.choice(xs)), float(rng.choice(ys))) for _ in range(n_humans)]
        ocs = [(float(rng.choice(xs)), float(rng.choice(ys))) for _ in range(n_objects)]
        humans = [ScoredDetection(_box_around(x, y, rng), 0, 1.0) for x, y in hcs]
        objects = [ScoredDetection(_box_around(x, y, rng), 1 + rng.randrange(8), 1.0) for x, y in ocs]
        pairs = []
        ok = True
        for i, hc in enumerate(hcs):
            choices = [a for a in range(n_actions) if a in no_obj or object_actions]
            if not choices:
                ok = False
                break
            a = rng.choice(choices)
            if a in no_obj:
                pairs.append((i, -1, a))
                continue
            partners = [j for j, oc in enumerate(ocs) if oc != hc]
            if not partners:
                ok = False
                break
            pairs.append((i, rng.choice(partners), a))
        if not ok:
            continue

        points, vecs = [], []
        for i, j, _a in pairs:
            hc = hcs[i]
            oc = ocs[j] if j >= 0 else hc
            p = ((hc[0] + oc[0]) / 2, (hc[1] + oc[1]) / 2)
            points.append(p)
            vecs.append((abs(hc[0] - p[0]), abs(hc[1] - p[1])))
        if any(
            max(abs(points[a][0] - points[b][0]), abs(points[a][1] - points[b][1])) <= 2
            for a in range(len(points))
            for b in range(a)
        ):
            continue
        gt_set = {(i, j) for i, j, _ in pairs}
        clash = False
        for (i, j, _a), p, v in zip(pairs, points, vecs):
            if j < 0:
                clash = any(k != i and _closed_overlap(humans[k].bbox, (p[0], p[1], p[0], p[1])) for k in range(n_humans))
            else:
                clash = any(
                    (hi, oj) not in gt_set and _max_corner_gap(p, v, hcs[hi], ocs[oj]) < 2.0
                    for hi in range(n_humans)
                    for oj in range(n_objects)
                )
            if clash:
                break
        if clash:
            continue

        iboxes = [(p[0] - v[0], p[1] - v[1], p[0] + v[0], p[1] + v[1]) for p, v in zip(points, vecs)]
        placed = 0
        for _d in range(distractors):
            for _t in range(200):
                cx, cy = rng.uniform(2, width - 2), rng.uniform(2, height - 2)
                box = _box_around(round(cx * 2) / 2, round(cy * 2) / 2, rng)
                if all(not _closed_overlap(box, ib) for ib in iboxes):
                    score = round(rng.uniform(0.5, 1.0), 6)
                    if rng.random() < 0.5:
                        humans.append(ScoredDetection(box, 0, score))
                    else:
                        objects.append(ScoredDetection(box, 1 + rng.randrange(8), score))
                    placed += 1
                    break
            else:
                break
        if placed < distractors:
            continue

        triplets = [
            InteractionTriplet(humans[i], objects[j] if j >= 0 else None, a, 1.0) for i, j, a in pairs
        ]
        heatmap = encode_points(triplets, n_actions, height, width, sigma)
        vectors, mask = encode_vectors(triplets, height, width)
        return SceneBundle(
            seed=seed,
            height=height,
            width=width,
            num_classes=n_actions,
            triplets=triplets,
            humans=humans,
            objects=objects,
            gt_pairs=pairs,
            heatmap=heatmap,
            vectors=vectors,
            mask=mask,
            no_object_classes=no_obj,
            n_distractors=distractors,
        )
    raise PackingError(
        f"no feasible scene for {n_humans} humans, {n_objects} objects on a {width}x{height} grid "
        f"after {max_tries} tries"
    )


def pack_points(n_points: int, height: int, width: int, seed: int = 0, max_tries: int = 1000) -> list[tuple[int, int]]:
    """Place ``n_points`` cells pairwise more than 2 cells apart (Chebyshev)."""
    # each point claims a 3x3 block, so a grid holds at most ceil(h/3)*ceil(w/3)
    if n_points > -(-height // 3) * -(-width // 3):
        raise PackingError(f"{n_points} separated points cannot fit on a {width}x{height} grid")
    rng = random.Random(seed)
    for _ in range(max_tries):
        pts: list[tuple[int, int]] = []
        for _i in range(n_points):
            free = [
                (x, y)
                for x in range(width)
                for y in range(height)
                if all(max(abs(x - a), abs(y - b)) > 2 for a, b in pts)
            ]
            if not free:
                break
            pts.append(rng.choice(free))
        if len(pts) == n_points:
            return pts
    raise PackingError(f"could not place {n_points} separated points on a {width}x{height} grid")


# -- oracles -------------------------------------------------------------------


def _center(b) -> tuple[float, float]:
    return ((b[0] + b[2]) / 2, (b[1] + b[3]) / 2)


def _scalar_iou(a, b) -> float:
    ix1, iy1 = max(a[0], b[0]), max(a[1], b[1])
    ix2, iy2 = min(a[2], b[2]), min(a[3], b[3])
    inter = 0.0
    if ix2 > ix1 and iy2 > iy1:
        inter = (ix2 - ix1) * (iy2 - iy1)
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    if union == 0:
        return 1.0 if list(a) == list(b) else 0.0
    return inter / union


def _spans_meet(a1, a2, b1, b2) -> bool:
    if a1 == a2 and b1 == b2:
        return a1 == b1
    if a1 == a2:
        return b1 < a1 < b2
    if b1 == b2:
        return a1 < b1 < a2
    return min(a2, b2) > max(a1, b1)


def _oracle_overlap(a, b) -> bool:
    if (a[2] - a[0]) * (a[3] - a[1]) > 0 and (b[2] - b[0]) * (b[3] - b[1]) > 0:
        return _scalar_iou(a, b) > 0
    return _spans_meet(a[0], a[2], b[0], b[2]) and _spans_meet(a[1], a[3], b[1], b[3])


def _oracle_accepts(hb, ob, cand: InteractionCandidate, cfg: GroupingConfig) -> bool:
    px, py = cand.pos[0], cand.pos[1]
    vx, vy = cand.vector[0], cand.vector[1]
    hx, hy = _center(hb)
    ox, oy = _center(ob)
    mode = cfg.mode
    if mode in ("angle_only", "angle_plus_ratio"):
        ax, ay, bx, by = hx - px, hy - py, ox - px, oy - py
        la = math.sqrt(ax * ax + ay * ay)
        lb = math.sqrt(bx * bx + by * by)
        if la > 0 and lb > 0 and not (ax * bx + ay * by) / (la * lb) <= math.cos(cfg.angle_min):
            return False
        if mode == "angle_plus_ratio":
            big, small = max(la, lb), min(la, lb)
            if big > 0 and (small == 0 or big / small > cfg.ratio_max):
                return False
        return True
    ibox = (px - vx, py - vy, px + vx, py + vy)
    if not _oracle_overlap(hb, ibox) or not _oracle_overlap(ob, ibox):
        return False
    if mode == "box_only":
        return True
    ref = (min(hx, ox), min(hy, oy), max(hx, ox), max(hy, oy))
    for xi, yi in ((0, 1), (2, 1), (0, 3), (2, 3)):
        dx = ibox[xi] - ref[xi]
        dy = ibox[yi] - ref[yi]
        if not math.sqrt(dx * dx + dy * dy) < cfg.d_tau:
            return False
    return True


def oracle_group_rows(humans, objects, candidates, cfg: GroupingConfig) -> list[tuple[float, int, int, int, int]]:
    rows = []
    for k, a in enumerate(candidates):
        if not a.score > cfg.a_tau:
            continue
        for i, h in enumerate(humans):
            if not h.score > cfg.h_tau:
                continue
            hb = tuple(h.bbox)
            if a.class_id in cfg.no_object_classes:
                if hb[0] <= a.pos[0] <= hb[2] and hb[1] <= a.pos[1] <= hb[3]:
                    rows.append((h.score * a.score, a.class_id, i, -1, k))
                continue
            for j, o in enumerate(objects):
                if not o.score > cfg.o_tau:
                    continue
                if _oracle_accepts(hb, tuple(o.bbox), a, cfg):
                    rows.append((h.score * o.score * a.score, a.class_id, i, j, k))
    # same documented order as grouping: score desc, action, human, object, candidate
    rows.sort(key=lambda r: (-r[0], r[1], r[2], r[3], r[4]))
    return rows


def oracle_group(humans, objects, candidates, cfg: GroupingConfig) -> list[InteractionTriplet]:
    """Exhaustive triple loop over every (human, object, candidate)."""
    return [
        InteractionTriplet(
            humans[i], objects[j] if j >= 0 else None, action, s, candidates[k].pos, candidates[k].vector
        )
        for s, action, i, j, k in oracle_group_rows(humans, objects, candidates, cfg)
    ]


def _oracle_labels(preds, gts, iou_min) -> list[bool]:
    """TP/FP labels chosen among all one-to-one matchings.

    Every assignment of predictions to distinct qualifying ground truths is
    enumerated. Each prediction's choice is ranked by (matched, overlap,
    lower ground-truth index) and the winner is the lexicographically largest
    sequence in prediction order, which is what a greedy matcher commits to.
    """
    quality = []
    for p in preds:
        row = {}
        for g_idx, g in enumerate(gts):
            if g.action_id != p.action_id:
                continue
            q = _scalar_iou(tuple(p.human.bbox), tuple(g.human.bbox))
            if g.object is not None:
                if p.object is None:
                    continue
                q = min(q, _scalar_iou(tuple(p.object.bbox), tuple(g.object.bbox)))
            if q > iou_min:
                row[g_idx] = q
        quality.append(row)

    best = None

    def walk(i, taken, seq, picks):
        nonlocal best
        if i == len(preds):
            if best is None or seq > best[0]:
                best = (seq, picks)
            return
        walk(i + 1, taken, seq + [(0, 0.0, 0)], picks + [False])
        for g_idx, q in quality[i].items():
            if g_idx not in taken:
                walk(i + 1, taken | {g_idx}, seq + [(1, q, -g_idx)], picks + [True])

    walk(0, frozenset(), [], [])
    return best[1]


def oracle_ap(
    preds: Mapping[str, Sequence[InteractionTriplet]],
    gts: Mapping[str, Sequence[InteractionTriplet]],
    iou_min: float = 0.5,
    images: Optional[Sequence[str]] = None,
) -> dict[int, float]:
    """Per-class AP from explicit precision/recall points.

    For every recall level j / n_gt that is reached, the interpolated precision
    is the best precision at any rank whose recall is at least that level.
    """
    imgs = sorted(set(gts) | set(preds)) if images is None else sorted(images)
    classes = sorted({t.action_id for img in imgs for t in gts.get(img, ())})
    out = {}
    for c in classes:
        n_gt = sum(1 for img in imgs for t in gts.get(img, ()) if t.action_id == c)
        if n_gt == 0:
            continue
        flat = [(img, t) for img in imgs for t in preds.get(img, ()) if t.action_id == c]
        flat.sort(
            key=lambda it: (
                -it[1].score,
                it[0],
                it[1].action_id,
                tuple(it[1].human.bbox) + (tuple(it[1].object.bbox) if it[1].object is not None else ()),
            )
        )
        label_of = {}
        for img in imgs:
            idx = [n for n, (im, _) in enumerate(flat) if im == img]
            g = [t for t in gts.get(img, ()) if t.action_id == c]
            for n, ok in zip(idx, _oracle_labels([flat[n][1] for n in idx], g, iou_min)):
                label_of[n] = ok
        tp_at = []
        tp = 0
        for n in range(len(flat)):
            tp += label_of[n]
            tp_at.append(tp)
        levels = []
        for j in range(1, n_gt + 1):
            reach = [tp_at[r] / (r + 1) for r in range(len(flat)) if tp_at[r] >= j]
            levels.append(max(reach) if reach else 0.0)
        out[c] = math.fsum(levels) / n_gt
    return out


def random_grouping_instance(rng: random.Random, max_each: int = 5, lattice: bool = False):
    """Small random grouping problem biased towards near-consistent geometry.

    Returns ``(humans, objects, candidates, cfg)``. With ``lattice`` all
    coordinates are multiples of 0.5, which exercises ties and touching edges.
    """

    def coord(lo, hi):
        v = rng.uniform(lo, hi)
        return round(v * 2) / 2 if lattice else v

    def det(cat):
        cx, cy = coord(0, 40), coord(0, 40)
        hw, hh = coord(0, 6), coord(0, 6)
        return ScoredDetection(Box(cx - hw, cy - hh, cx + hw, cy + hh), cat, round(rng.random(), 3))

    humans = [det(0) for _ in range(rng.randint(0, max_each))]
    objects = [det(1) for _ in range(rng.randint(0, max_each))]
    n_classes = 3
    no_obj = frozenset(c for c in range(n_classes) if rng.random() < 0.2)
    cands = []
    for _ in range(rng.randint(0, max_each)):
        if humans and objects and rng.random() < 0.7:
            hc = rng.choice(humans).center
            oc = rng.choice(objects).center
            p = Point((hc.x + oc.x) / 2 + coord(-1, 1), (hc.y + oc.y) / 2 + coord(-1, 1))
            v = UnsignedVector(abs(hc.x - oc.x) / 2 + abs(coord(0, 1.5)), abs(hc.y - oc.y) / 2 + abs(coord(0, 1.5)))
        else:
            p = Point(coord(0, 40), coord(0, 40))
            v = UnsignedVector(abs(coord(0, 10)), abs(coord(0, 10)))
        cands.append(InteractionCandidate(rng.randrange(n_classes), p, round(rng.random(), 3), v))
    cfg = GroupingConfig(
        h_tau=rng.choice((0.0, 0.2, 0.4)),
        o_tau=rng.choice((0.0, 0.1, 0.3)),
        a_tau=rng.choice((0.0, 0.1, 0.3)),
        d_tau=rng.choice((0.5, 1.0, 2.0, 4.0)),
        angle_min=rng.choice((math.pi / 2, 2 * math.pi / 3, 5 * math.pi / 6, math.pi)),
        ratio_max=rng.choice((1.0, 1.5, 2.0)),
        mode=rng.choice(("full", "angle_only", "angle_plus_ratio", "box_only", "box_plus_corner")),
        no_object_classes=no_obj,
    )
    return humans, objects, cands, cfg


def random_eval_instance(rng: random.Random, max_images: int = 3, max_preds: int = 6, n_classes: int = 3):
    """Small random evaluation problem: ``(preds, gts)`` keyed by image id.

    Predictions are jittered copies of ground truth or free boxes, with scores
    on a coarse grid so that ties occur. Class 2 carries no object.
    """

    def box(cx, cy, hw, hh):
        return Box(cx - hw, cy - hh, cx + hw, cy + hh)

    def det(b, cat=0):
        return ScoredDetection(b, cat, 1.0)

    def jitter(b):
        d = [rng.choice((0.0, 0.0, 0.5, 1.0)) * rng.choice((-1, 1)) for _ in range(4)]
        x1, y1, x2, y2 = (c + e for c, e in zip(b, d))
        return Box(min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2))

    images = [f"img{i}" for i in range(rng.randint(1, max_images))]
    gts, preds = {}, {}
    for img in images:
        ts = []
        for _ in range(rng.randint(0, 3)):
            a = rng.randrange(n_classes)
            hb = box(rng.randint(2, 20), rng.randint(2, 20), rng.randint(1, 4), rng.randint(1, 4))
            ob = None if a == 2 else det(box(rng.randint(2, 20), rng.randint(2, 20), rng.randint(1, 4), rng.randint(1, 4)), 1)
            ts.append(InteractionTriplet(det(hb), ob, a))
        gts[img] = ts
    n_preds = rng.randint(0, max_preds)
    for _ in range(n_preds):
        img = rng.choice(images)
        score = rng.choice((0.2, 0.4, 0.6, 0.8, 1.0))
        if gts[img] and rng.random() < 0.8:
            g = rng.choice(gts[img])
            a = g.action_id if rng.random() < 0.8 else rng.randrange(n_classes)
            ob = det(jitter(g.object.bbox), 1) if g.object is not None else det(jitter(g.human.bbox), 1)
            t = InteractionTriplet(det(jitter(g.human.bbox)), ob, a, score)
        else:
            hb = box(rng.randint(2, 20), rng.randint(2, 20), 2, 2)
            t = InteractionTriplet(det(hb), det(box(rng.randint(2, 20), rng.randint(2, 20), 2, 2), 1), rng.randrange(n_classes), score)
        preds.setdefault(img, []).append(t)
    return preds, gts

