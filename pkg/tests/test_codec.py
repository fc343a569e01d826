import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hoipoint.codec import (
    OutOfBoundsError,
    PointCollisionError,
    center_pool,
    decode_peaks,
    dynamic_thresholds,
    encode_points,
    encode_vectors,
)
from hoipoint.geometry import Box
from hoipoint.structures import InteractionTriplet, ScoredDetection
from hoipoint.testkit import PackingError, pack_points


def det(cx, cy, half=1.0):
    return ScoredDetection(Box(cx - half, cy - half, cx + half, cy + half), 0, 1.0)


def trip(h, o, action=0):
    return InteractionTriplet(det(*h), det(*o) if o is not None else None, action)


def brute_local_max(grid, y, x):
    h, w = grid.shape
    return all(
        grid[y, x] >= grid[y + dy, x + dx]
        for dy in (-1, 0, 1)
        for dx in (-1, 0, 1)
        if (dy or dx) and 0 <= y + dy < h and 0 <= x + dx < w
    )


def test_encode_single_point_values():
    hm = encode_points([trip((2, 2), (2, 2))], 1, 5, 5, sigma=1.0)
    assert hm[0, 2, 2] == 1.0
    # direct evaluation of exp(-d^2 / 2) for d^2 = 1 and 2
    assert hm[0, 3, 2] == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert hm[0, 2, 3] == pytest.approx(0.606531, abs=1e-6)
    assert hm[0, 3, 3] == pytest.approx(0.367879, abs=1e-6)


def test_encode_empty_is_zero():
    hm = encode_points([], 2, 4, 6)
    assert hm.shape == (2, 4, 6) and not hm.any()


def test_encode_overlap_is_max():
    hm = encode_points([trip((1, 1), (1, 1)), trip((3, 3), (3, 3))], 1, 5, 5, sigma=1.0)
    # both Gaussians contribute exp(-1) at (2, 2); max, not sum
    assert hm[0, 2, 2] == pytest.approx(math.exp(-1), abs=1e-12)
    assert hm[0, 1, 1] == hm[0, 3, 3] == 1.0


def test_encode_uses_midpoint_and_no_object_center():
    hm = encode_points([trip((8, 2), (0, 2), 0), trip((5, 6), None, 1)], 2, 10, 10)
    assert hm[0, 2, 4] == 1.0
    assert hm[1, 6, 5] == 1.0


def test_encode_out_of_bounds():
    with pytest.raises(OutOfBoundsError):
        encode_points([trip((12, 2), (12, 2))], 1, 5, 5)
    with pytest.raises(OutOfBoundsError):
        encode_vectors([trip((-2, 2), (0, 2))], 5, 5)


def test_encode_vectors_examples():
    vf, mask = encode_vectors([trip((8, 2), (0, 2))], 6, 10)
    assert tuple(vf[:, 2, 4]) == (4.0, 0.0)
    assert mask.sum() == 1 and mask[2, 4] == 1
    vf, mask = encode_vectors([trip((3, 3), (3, 3))], 6, 6)
    assert tuple(vf[:, 3, 3]) == (0.0, 0.0) and mask[3, 3] == 1


def test_encode_vectors_collision():
    a = trip((8, 2), (0, 2))
    b = trip((4, 6), (4, -2))
    with pytest.raises(PointCollisionError) as exc:
        encode_vectors([a, b], 10, 10)
    assert (exc.value.first, exc.value.second) == (0, 1)
    assert exc.value.cell == (4, 2)


def test_encode_vectors_same_pair_two_actions_share_cell():
    vf, mask = encode_vectors([trip((8, 2), (0, 2), 0), trip((8, 2), (0, 2), 1)], 6, 10)
    assert mask.sum() == 1


def test_center_pool_examples():
    m = np.array([[1, 0, 0], [0, 2, 0], [0, 0, 3]], dtype=float)
    out = center_pool(m)
    assert out[1, 1] == 4.0
    for y in range(3):
        for x in range(3):
            assert out[y, x] == max(m[y, :]) + max(m[:, x])
    assert not center_pool(np.zeros((4, 5))).any()
    assert np.all(center_pool(np.full((3, 4), 0.7)) == 1.4)


@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_center_pool_transpose(h, w, data):
    m = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=h * w, max_size=h * w))).reshape(h, w)
    assert np.array_equal(center_pool(m.T), center_pool(m).T)


def test_decode_suppresses_lower_neighbour():
    hm = np.zeros((1, 5, 5))
    hm[0, 2, 2] = 0.9
    hm[0, 3, 2] = 0.8
    peaks = decode_peaks(hm, 10, 0.0)
    positive = [c for c in peaks if c.score > 0]
    assert [(c.pos.x, c.pos.y, c.score) for c in positive] == [(2, 2, 0.9)]
    # brute-force scan agrees on which non-zero cells are local maxima
    assert [(x, y) for y in range(5) for x in range(5) if hm[0, y, x] > 0 and brute_local_max(hm[0], y, x)] == [(2, 2)]


def test_decode_threshold_and_k():
    assert decode_peaks(np.zeros((1, 4, 4)), 10, 0.1) == []
    hm = np.zeros((2, 5, 5))
    hm[0, 1, 1] = 1.0
    hm[1, 3, 3] = 1.0
    out = decode_peaks(hm, 1, 0.5)
    assert len(out) == 1 and out[0].class_id == 0
    assert decode_peaks(hm, 0, 0.0) == []


def test_decode_plateau_keeps_ties_in_order():
    hm = np.zeros((1, 4, 4))
    hm[0, 1, 1] = hm[0, 1, 2] = 0.5
    out = decode_peaks(hm, 10, 0.1)
    assert [(c.pos.x, c.pos.y) for c in out] == [(1, 1), (2, 1)]


def test_decode_attaches_vectors_and_per_class_floors():
    hm = np.zeros((2, 6, 6))
    hm[0, 1, 1] = 0.3
    hm[1, 4, 4] = 0.3
    vf = np.zeros((2, 6, 6))
    vf[:, 4, 4] = (2.5, 1.0)
    vf[:, 1, 1] = (-0.5, 3.0)
    out = decode_peaks(hm, 10, [0.5, 0.2], vf)
    assert len(out) == 1 and out[0].class_id == 1
    assert tuple(out[0].vector) == (2.5, 1.0)
    out = decode_peaks(hm, 10, 0.2, vf)
    assert tuple(out[0].vector) == (0.0, 3.0)


@given(st.integers(0, 10_000))
def test_decode_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    hm = np.round(rng.random((2, 5, 6)), 1)
    k = int(rng.integers(0, 12))
    out = decode_peaks(hm, k, 0.3)
    expected = sorted(
        (
            (-hm[c, y, x], c, y, x)
            for c in range(2)
            for y in range(5)
            for x in range(6)
            if hm[c, y, x] >= 0.3 and brute_local_max(hm[c], y, x)
        )
    )[:k]
    assert [(-c.score, c.class_id, c.pos.y, c.pos.x) for c in out] == expected
    scores = [c.score for c in out]
    assert scores == sorted(scores, reverse=True)


@given(st.integers(0, 100_000), st.integers(1, 6), st.integers(1, 3))
def test_round_trip_recovers_points(seed, n, n_classes):
    rng = random.Random(seed)
    h, w = 16, 20
    pts = pack_points(n, h, w, seed)
    triplets = []
    for x, y in pts:
        vx, vy = rng.randint(0, 5), rng.randint(0, 5)
        # human at p + v, object at p - v
        triplets.append(trip((x + vx, y + vy), (x - vx, y - vy), rng.randrange(n_classes)))
    hm = encode_points(triplets, n_classes, h, w, sigma=rng.choice((1.0, 2.0, 3.0)))
    vf, _ = encode_vectors(triplets, h, w)
    assert hm.min() >= 0 and hm.max() <= 1
    for t in triplets:
        p = t.interaction_point()
        assert hm[t.action_id, int(p.y), int(p.x)] == 1.0
    out = [c for c in decode_peaks(hm, len(triplets) + 50, 0.0, vf) if c.score > 0]
    got = sorted((c.class_id, c.pos.x, c.pos.y, tuple(c.vector)) for c in out)
    want = sorted(
        (t.action_id, t.interaction_point().x, t.interaction_point().y, tuple(t.interaction_vector())) for t in triplets
    )
    assert got == want


def test_pack_points_infeasible():
    with pytest.raises(PackingError):
        pack_points(100, 8, 8)


def test_dynamic_thresholds():
    assert dynamic_thresholds([3, 500], 0.01, 0.05, 10) == [0.01, 0.05]
    assert dynamic_thresholds([7, 7, 7]) == [0.01, 0.01, 0.01]
    assert dynamic_thresholds([0, 3, 500], cutoff=0) == [0.05, 0.05, 0.05]


@given(st.lists(st.integers(0, 1000), min_size=1, max_size=20), st.integers(0, 50))
def test_dynamic_thresholds_monotone(counts, cutoff):
    th = dynamic_thresholds(counts, 0.01, 0.05, cutoff)
    for a in range(len(counts)):
        for b in range(len(counts)):
            if counts[a] <= counts[b]:
                assert th[a] <= th[b]
