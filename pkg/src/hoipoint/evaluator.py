"""
Role mean average precision over HOI triplets.

A prediction is a true positive when its action matches an unconsumed ground
truth triplet of the same image and both its human and object boxes overlap
the ground truth boxes with IoU strictly above ``iou_min`` (only the human box
for ground truth without an object). Matching is greedy in score order.
"""

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .geometry import iou
from .structures import InteractionTriplet

SETTINGS = ("default", "known_object")


@dataclass
class GroundTruthSet:
    """Ground truth triplets per image plus class metadata.

    Attributes:
        triplets: image id -> ground truth triplets (scores ignored).
        train_counts: action id -> number of training samples; drives the
            rare / non-rare split.
        rare_cutoff: classes with fewer training samples than this are rare.
        class_objects: action id -> object category (Known-Object setting).
        known_object_images: object category -> image ids known to contain it.
    """

    triplets: Mapping[str, Sequence[InteractionTriplet]]
    train_counts: Mapping[int, int] = field(default_factory=dict)
    rare_cutoff: int = 10
    class_objects: Optional[Mapping[int, int]] = None
    known_object_images: Optional[Mapping[int, Sequence[str]]] = None

    def split_of(self, action_id: int) -> Optional[str]:
        if action_id not in self.train_counts:
            return None
        return "rare" if self.train_counts[action_id] < self.rare_cutoff else "non_rare"


@dataclass
class EvalReport:
    setting: str
    per_class_ap: dict[int, float]
    map_role: float
    map_rare: Optional[float]
    map_non_rare: Optional[float]
    n_gt: dict[int, int]
    rare_classes: list[int]
    non_rare_classes: list[int]

    def to_dict(self) -> dict:
        return {
            "setting": self.setting,
            "map_role": self.map_role,
            "map_rare": self.map_rare,
            "map_non_rare": self.map_non_rare,
            "per_class_ap": {str(k): v for k, v in sorted(self.per_class_ap.items())},
            "n_gt": {str(k): v for k, v in sorted(self.n_gt.items())},
            "rare_classes": self.rare_classes,
            "non_rare_classes": self.non_rare_classes,
        }


def _box_key(t: InteractionTriplet) -> tuple:
    obj = tuple(t.object.bbox) if t.object is not None else ()
    return tuple(t.human.bbox) + obj


def prediction_order(preds: Sequence[InteractionTriplet], image_ids: Optional[Sequence[str]] = None) -> list[int]:
    """Indices of ``preds`` sorted by score descending with a content tie key."""
    ids = image_ids if image_ids is not None else [""] * len(preds)
    return sorted(
        range(len(preds)),
        key=lambda i: (-preds[i].score, ids[i], preds[i].action_id, _box_key(preds[i]), i),
    )


def match_triplets(
    preds: Sequence[InteractionTriplet],
    gts: Sequence[InteractionTriplet],
    iou_min: float = 0.5,
) -> list[bool]:
    """TP/FP label per prediction of one image, in the given (score) order.

    Each prediction takes the unconsumed ground truth with the largest
    qualifying overlap (min of human and object IoU); ties go to the lower
    ground-truth index.
    """
    used = [False] * len(gts)
    labels = []
    for p in preds:
        best, best_ov = -1, -1.0
        for j, g in enumerate(gts):
            if used[j] or g.action_id != p.action_id:
                continue
            ov = iou(p.human.bbox, g.human.bbox)
            if g.object is not None:
                if p.object is None:
                    continue
                ov = min(ov, iou(p.object.bbox, g.object.bbox))
            if ov > iou_min and ov > best_ov:
                best, best_ov = j, ov
        if best >= 0:
            used[best] = True
        labels.append(best >= 0)
    return labels


def average_precision(labels: Sequence[bool], n_gt: int) -> float:
    """Area under the interpolated precision/recall curve.

    Precision is replaced by its running maximum from the right; each true
    positive then contributes ``1 / n_gt`` of recall at that precision.
    """
    if n_gt <= 0:
        return 0.0
    precision = []
    tp = 0
    for rank, is_tp in enumerate(labels, start=1):
        tp += bool(is_tp)
        precision.append(tp / rank)
    envelope = 0.0
    contrib = []
    for i in range(len(labels) - 1, -1, -1):
        envelope = max(envelope, precision[i])
        if labels[i]:
            contrib.append(envelope)
    return math.fsum(contrib) / n_gt


def evaluate(
    preds: Mapping[str, Sequence[InteractionTriplet]],
    gt: GroundTruthSet,
    setting: str = "default",
    iou_min: float = 0.5,
) -> EvalReport:
    """Per-class AP and role mAP over all, rare and non-rare classes.

    In the Known-Object setting each class only sees images listed for its
    object category. Classes without ground truth in their image set are left
    out of every mean.
    """
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}")
    if setting == "known_object" and (gt.class_objects is None or gt.known_object_images is None):
        raise ValueError("known_object setting needs class_objects and known_object_images")

    classes = sorted({t.action_id for ts in gt.triplets.values() for t in ts})
    image_ids = sorted(set(gt.triplets) | set(preds))
    per_class, n_gt_per = {}, {}
    for c in classes:
        if setting == "known_object":
            allowed = set(gt.known_object_images.get(gt.class_objects.get(c), ()))
            imgs = [i for i in image_ids if i in allowed]
        else:
            imgs = image_ids
        flat, flat_ids = [], []
        n_gt = 0
        for img in imgs:
            n_gt += sum(1 for t in gt.triplets.get(img, ()) if t.action_id == c)
            for t in preds.get(img, ()):
                if t.action_id == c:
                    flat.append(t)
                    flat_ids.append(img)
        if n_gt == 0:
            continue
        order = prediction_order(flat, flat_ids)
        by_image: dict[str, list[int]] = {}
        for i in order:
            by_image.setdefault(flat_ids[i], []).append(i)
        label = {}
        for img, idx in by_image.items():
            g = [t for t in gt.triplets.get(img, ()) if t.action_id == c]
            for i, ok in zip(idx, match_triplets([flat[i] for i in idx], g, iou_min)):
                label[i] = ok
        per_class[c] = average_precision([label[i] for i in order], n_gt)
        n_gt_per[c] = n_gt

    def mean(cs):
        vals = [per_class[c] for c in cs]
        return math.fsum(vals) / len(vals) if vals else None

    rare = [c for c in per_class if gt.split_of(c) == "rare"]
    non_rare = [c for c in per_class if gt.split_of(c) == "non_rare"]
    return EvalReport(
        setting=setting,
        per_class_ap=per_class,
        map_role=mean(list(per_class)) or 0.0,
        map_rare=mean(rare),
        map_non_rare=mean(non_rare),
        n_gt=n_gt_per,
        rare_classes=rare,
        non_rare_classes=non_rare,
    )
