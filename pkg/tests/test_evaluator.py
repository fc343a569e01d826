import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hoipoint.evaluator import (
    GroundTruthSet,
    average_precision,
    evaluate,
    match_triplets,
    prediction_order,
)
from hoipoint.geometry import Box
from hoipoint.structures import InteractionTriplet, ScoredDetection
from hoipoint.testkit import oracle_ap, random_eval_instance

GT_H = Box(0, 0, 10, 10)
GT_O = Box(20, 0, 30, 10)


def det(b, cat=0):
    return ScoredDetection(Box(*b), cat, 1.0)


def trip(h, o, action=0, score=1.0):
    return InteractionTriplet(det(h), det(o, 1) if o is not None else None, action, score)


def test_match_above_both_thresholds():
    # human IoU 0.6, object IoU 0.7
    p = trip((0, 0, 6, 10), (20, 0, 27, 10))
    assert match_triplets([p], [trip(GT_H, GT_O)]) == [True]


def test_match_wrong_action():
    assert match_triplets([trip(GT_H, GT_O, action=1)], [trip(GT_H, GT_O)]) == [False]


def test_match_one_gt_two_predictions():
    preds = [trip(GT_H, GT_O, score=0.9), trip(GT_H, GT_O, score=0.8)]
    assert match_triplets(preds, [trip(GT_H, GT_O)]) == [True, False]


def test_match_is_strict_at_half():
    # human IoU exactly 0.5
    assert match_triplets([trip((0, 0, 5, 10), GT_O)], [trip(GT_H, GT_O)]) == [False]


def test_match_no_object_uses_human_only():
    assert match_triplets([trip(GT_H, None)], [trip(GT_H, None)]) == [True]
    assert match_triplets([trip(GT_H, (50, 50, 60, 60))], [trip(GT_H, None)]) == [True]
    assert match_triplets([trip(GT_H, None)], [trip(GT_H, GT_O)]) == [False]


def test_match_prefers_better_overlap():
    gts = [trip((0, 0, 10, 10), GT_O), trip((1, 0, 11, 10), GT_O)]
    assert match_triplets([trip((1, 0, 11, 10), GT_O), trip((0, 0, 10, 10), GT_O)], gts) == [True, True]


@pytest.mark.parametrize(
    "labels, n_gt, ap",
    [([True], 1, 1.0), ([False, True], 1, 0.5), ([True, True], 4, 0.5), ([], 3, 0.0), ([True], 0, 0.0)],
)
def test_average_precision_fixtures(labels, n_gt, ap):
    assert average_precision(labels, n_gt) == ap


def test_average_precision_uses_envelope():
    # precisions 1, 1/2, 2/3: the second TP lifts the envelope at rank 2
    assert average_precision([True, False, True], 2) == pytest.approx((1 + 2 / 3) / 2, abs=1e-15)


def perfect_gt():
    return {"a": [trip(GT_H, GT_O, 0), trip((40, 40, 50, 50), (60, 40, 70, 50), 1), trip((0, 40, 10, 50), None, 2)]}


def test_evaluate_perfect_both_settings():
    g = perfect_gt()
    gt = GroundTruthSet(g, class_objects={0: 1, 1: 1, 2: 1}, known_object_images={1: ["a"]})
    for setting in ("default", "known_object"):
        rep = evaluate(g, gt, setting)
        assert rep.map_role == 1.0 and rep.per_class_ap == {0: 1.0, 1: 1.0, 2: 1.0}


def test_evaluate_rare_split():
    g = {"a": [trip(GT_H, GT_O, 0), trip(GT_H, GT_O, 1)]}
    preds = {"a": [trip(GT_H, GT_O, 0)]}
    rep = evaluate(preds, GroundTruthSet(g, train_counts={0: 3, 1: 500}))
    assert rep.rare_classes == [0] and rep.non_rare_classes == [1]
    assert rep.map_rare == 1.0 and rep.map_non_rare == 0.0 and rep.map_role == 0.5


def test_known_object_raises_ap():
    g = {"a": [trip(GT_H, GT_O, 0)], "b": []}
    preds = {"a": [trip(GT_H, GT_O, 0, 0.5)], "b": [trip(GT_H, GT_O, 0, 0.9)]}
    gt = GroundTruthSet(g, class_objects={0: 7}, known_object_images={7: ["a"]})
    default = evaluate(preds, gt, "default").per_class_ap[0]
    known = evaluate(preds, gt, "known_object").per_class_ap[0]
    assert (default, known) == (0.5, 1.0)
    assert oracle_ap(preds, g)[0] == default
    assert oracle_ap(preds, g, images=["a"])[0] == known


def test_evaluate_errors():
    with pytest.raises(ValueError):
        evaluate({}, GroundTruthSet({}), "nope")
    with pytest.raises(ValueError):
        evaluate({}, GroundTruthSet({}), "known_object")


def test_oracle_trivial_cases():
    g = perfect_gt()
    assert oracle_ap(g, g) == {0: 1.0, 1: 1.0, 2: 1.0}
    assert oracle_ap({}, g) == {0: 0.0, 1: 0.0, 2: 0.0}


@given(st.integers(0, 10**6))
def test_evaluate_matches_oracle(seed):
    preds, gts = random_eval_instance(random.Random(seed))
    assert evaluate(preds, GroundTruthSet(gts)).per_class_ap == oracle_ap(preds, gts)


@given(st.integers(0, 10**6))
def test_prefix_stability(seed):
    preds, gts = random_eval_instance(random.Random(seed), max_images=1)
    img = next(iter(gts))
    ps = preds.get(img, [])
    order = prediction_order(ps)
    ranked = [ps[i] for i in order]
    base = match_triplets(ranked, gts[img])
    tail = trip((100, 100, 101, 101), (0, 0, 1, 1), 0, score=0.0)
    assert match_triplets(ranked + [tail], gts[img])[: len(base)] == base


@given(st.integers(0, 10**6), st.randoms(use_true_random=False))
def test_order_invariance(seed, shuffler):
    preds, gts = random_eval_instance(random.Random(seed))
    base = evaluate(preds, GroundTruthSet(gts))
    shuffled_preds = {}
    for img in shuffler.sample(sorted(preds), len(preds)):
        ps = list(preds[img])
        shuffler.shuffle(ps)
        shuffled_preds[img] = ps
    shuffled_gts = {img: gts[img] for img in shuffler.sample(sorted(gts), len(gts))}
    assert evaluate(shuffled_preds, GroundTruthSet(shuffled_gts)).to_dict() == base.to_dict()
