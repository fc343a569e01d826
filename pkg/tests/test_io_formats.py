import json
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hoipoint.geometry import Box, Point, UnsignedVector
from hoipoint.io_formats import (
    BadMagicError,
    FormatError,
    SchemaError,
    TripletRecord,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
    decode_tensor,
    detection_record,
    encode_tensor,
    format_score,
    group_by_image,
    ingest_detections,
    parse_triplet_record,
    read_candidates,
    read_tensor,
    read_triplets,
    write_candidates,
    write_tensor,
    write_triplets,
)
from hoipoint.structures import InteractionCandidate


def test_worked_example_is_92_bytes(tmp_path):
    path = tmp_path / "zeros.ipnt"
    write_tensor(np.zeros((2, 3, 3), dtype=np.float32), path)
    data = path.read_bytes()
    assert len(data) == 4 + 2 + 1 + 1 + 12 + 72 == 92
    assert data[:8] == b"IPNT\x01\x00\x00\x03"
    assert struct.unpack("<3I", data[8:20]) == (2, 3, 3)
    assert data[20:] == bytes(72)
    assert np.array_equal(read_tensor(path), np.zeros((2, 3, 3)))


def test_payload_is_little_endian_row_major():
    data = encode_tensor(np.array([[1.0, 2.0], [3.0, -0.5]]))
    assert struct.unpack("<4f", data[16:]) == (1.0, 2.0, 3.0, -0.5)


def test_tensor_errors_are_distinct():
    good = encode_tensor(np.ones((2, 2)))
    with pytest.raises(BadMagicError):
        decode_tensor(b"XPNT" + good[4:])
    with pytest.raises(UnsupportedVersionError):
        decode_tensor(good[:4] + b"\x02\x00" + good[6:])
    with pytest.raises(UnsupportedDtypeError):
        decode_tensor(good[:6] + b"\x01" + good[7:])
    with pytest.raises(TruncatedPayloadError):
        decode_tensor(good[:-1])
    with pytest.raises(TruncatedPayloadError):
        decode_tensor(good[:10])
    with pytest.raises(FormatError):
        decode_tensor(good + b"\x00")
    kinds = {BadMagicError, UnsupportedVersionError, UnsupportedDtypeError, TruncatedPayloadError}
    assert len(kinds) == 4 and all(issubclass(k, FormatError) for k in kinds)


def test_scalar_and_empty_tensors():
    assert decode_tensor(encode_tensor(np.float32(3.5))) == np.float32(3.5)
    assert decode_tensor(encode_tensor(np.zeros((0, 4)))).shape == (0, 4)


@given(st.integers(0, 10**6))
def test_tensor_round_trip_byte_identical(seed):
    rng = np.random.default_rng(seed)
    shape = tuple(int(d) for d in rng.integers(0, 5, rng.integers(0, 4)))
    arr = rng.standard_normal(shape).astype(np.float32)
    data = encode_tensor(arr)
    back = decode_tensor(data)
    assert back.shape == arr.shape and np.array_equal(back, arr)
    assert encode_tensor(back) == data


def test_triplet_round_trip(tmp_path):
    recs = [
        TripletRecord("img1", 0, Box(0, 0, 10, 10), Box(20, 0, 30, 10), 0.123456789123, 0.9, 0.8),
        TripletRecord("img1", 2, Box(1, 1, 5, 5), None, 0.5),
    ]
    path = tmp_path / "t.jsonl"
    write_triplets(path, recs)
    back = read_triplets(path, no_object_classes={2})
    assert back[1] == recs[1]
    assert back[0].score == format_score(0.123456789123) == 0.123456789
    first = path.read_bytes()
    write_triplets(path, back)
    assert path.read_bytes() == first


def test_triplet_field_order_is_stable():
    line = TripletRecord("a", 1, Box(0, 0, 1, 1), Box(2, 2, 3, 3), 0.5, 1.0, 1.0).to_json()
    assert list(json.loads(line)) == ["image_id", "action_id", "human", "object", "score", "human_score", "object_score"]


def test_schema_branches():
    base = {"image_id": "a", "action_id": 3, "human": [0, 0, 1, 1]}
    assert parse_triplet_record(base, 1, {3}).object is None
    with pytest.raises(SchemaError) as exc:
        parse_triplet_record(base, 1, set())
    assert exc.value.field == "object" and exc.value.line == 1
    for field, bad in [("human", [0, 0, 1]), ("action_id", -1), ("image_id", ""), ("score", 1.5), ("human", [2, 0, 1, 1])]:
        with pytest.raises(SchemaError) as exc:
            parse_triplet_record({**base, "object": [0, 0, 1, 1], field: bad})
        assert exc.value.field == field


def test_group_by_image_applies_stride():
    rec = TripletRecord("a", 0, Box(8, 8, 16, 16), Box(0, 0, 4, 4))
    t = group_by_image([rec], stride=4)["a"][0]
    assert t.human.bbox == Box(2, 2, 4, 4) and t.object.bbox == Box(0, 0, 1, 1)
    assert TripletRecord.from_triplet("a", t, stride=4).human == rec.human


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines))


def test_ingest_stride_and_split(tmp_path):
    path = tmp_path / "d.jsonl"
    write_lines(
        path,
        [
            detection_record("a", Box(8, 8, 16, 16), 0, 0.9),
            detection_record("a", Box(0, 0, 4, 8), 3, 0.5),
            detection_record("b", Box(4, 4, 8, 8), 0, 1.0),
        ],
    )
    res = ingest_detections(path, stride=4, person_category=0, num_categories=5)
    assert list(res.images) == ["a", "b"] and res.rejected == 0
    assert res.images["a"].humans[0].bbox == Box(2, 2, 4, 4)
    assert res.images["a"].objects[0].bbox == Box(0, 0, 1, 2)
    assert res.images["a"].objects[0].class_id == 3


def test_ingest_rejects_bad_records(tmp_path):
    path = tmp_path / "d.jsonl"
    write_lines(
        path,
        [
            json.dumps({"image_id": "a", "bbox": [0, 0, 4, 4], "category": 0, "score": 1.5}),
            json.dumps({"image_id": "a", "bbox": [0, 0, 4], "category": 0, "score": 0.5}),
            json.dumps({"image_id": "a", "category": 0, "score": 0.5}),
            detection_record("a", Box(0, 0, 4, 4), 0, 0.5),
        ],
    )
    res = ingest_detections(path, stride=4)
    assert res.rejected == 3 and len(res.images["a"].humans) == 1


def test_ingest_unknown_category_and_empty(tmp_path):
    path = tmp_path / "d.jsonl"
    write_lines(path, [detection_record("a", Box(0, 0, 4, 4), 9, 0.5)])
    with pytest.raises(SchemaError):
        ingest_detections(path, num_categories=5)
    empty = tmp_path / "e.jsonl"
    empty.write_text("")
    res = ingest_detections(empty)
    assert res.images == {} and res.rejected == 0
    with pytest.raises(OSError):
        ingest_detections(tmp_path / "missing.jsonl")


def test_candidates_round_trip(tmp_path):
    cands = {"a": [InteractionCandidate(1, Point(3, 4), 0.25, UnsignedVector(2, 0.5))], "b": []}
    path = tmp_path / "c.jsonl"
    write_candidates(path, cands)
    assert read_candidates(path) == {"a": cands["a"]}


@given(st.integers(0, 10**6))
def test_record_round_trip_byte_identical(seed):
    rng = np.random.default_rng(seed)
    recs = []
    for i in range(int(rng.integers(1, 5))):
        x, y = rng.uniform(0, 500, 2)
        human = Box(float(x), float(y), float(x + rng.uniform(0, 50)), float(y + rng.uniform(0, 50)))
        obj = None if rng.random() < 0.3 else Box(float(y), float(x), float(y + 3.25), float(x + 1))
        recs.append(TripletRecord(f"img{i}", int(rng.integers(0, 5)), human, obj, float(rng.random()), float(rng.random())))
    lines = [r.to_json() for r in recs]
    again = [parse_triplet_record(json.loads(line), no_object_classes=range(5)).to_json() for line in lines]
    assert again == lines
