"""
File formats.

Tensor container (``.ipnt``), all integers little-endian::

    magic   4 bytes  b"IPNT"
    version u16      1
    dtype   u8       0 = float32 (IEEE-754)
    rank    u8
    dims    rank x u32, slowest-varying first
    payload prod(dims) x 4 bytes, float32 little-endian, row-major

Records (detections, triplets, ground truth, candidates) are UTF-8 JSON
lines. Box geometry in files is image space ``[x1, y1, x2, y2]``; it is
divided by the stride exactly once on ingestion.
"""

import json
import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .geometry import Box, Point, UnsignedVector
from .structures import InteractionCandidate, InteractionTriplet, ScoredDetection

log = logging.getLogger(__name__)

MAGIC = b"IPNT"
VERSION = 1
DTYPE_F32 = 0
_HEADER = struct.Struct("<4sHBB")


class FormatError(ValueError):
    pass


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class UnsupportedDtypeError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class SchemaError(ValueError):
    """A record violates the schema; ``field`` names the offending field."""

    def __init__(self, field_name: str, message: str, line: Optional[int] = None):
        self.field = field_name
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{field_name}: {message}")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_grid(box: Box, stride: float) -> Box:
    return Box(*(c / stride for c in box))


# -- tensors ---------------------------------------------------------------


def encode_tensor(arr) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim > 255:
        raise FormatError("rank exceeds 255")
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_F32, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return header + dims + payload


def decode_tensor(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(f"header needs {_HEADER.size} bytes, got {len(data)}")
    magic, version, dtype, rank = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise UnsupportedDtypeError(f"unsupported dtype code {dtype}")
    off = _HEADER.size
    if len(data) < off + 4 * rank:
        raise TruncatedPayloadError("file ends inside the dimension list")
    dims = struct.unpack_from(f"<{rank}I", data, off)
    off += 4 * rank
    n = 1
    for d in dims:
        n *= d
    expected = off + 4 * n
    if len(data) < expected:
        raise TruncatedPayloadError(f"payload needs {4 * n} bytes, got {len(data) - off}")
    if len(data) > expected:
        raise FormatError(f"{len(data) - expected} trailing bytes after payload")
    return np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(dims).astype(np.float32)


def write_tensor(arr, path) -> None:
    atomic_write_bytes(path, encode_tensor(arr))


def read_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())


# -- record helpers ----------------------------------------------------------


def format_score(score: float) -> float:
    """Score rounded to 9 significant digits, as stored in record files."""
    return float(f"{score:.9g}")


def _coords(box) -> list[float]:
    # always floats, so a re-read record serialises to the same bytes
    return [float(c) for c in box]


def _dumps(rec: dict) -> str:
    return json.dumps(rec, ensure_ascii=False, allow_nan=False)


def _write_lines(path, lines: Iterable[str]) -> None:
    text = "".join(line + "\n" for line in lines)
    atomic_write_bytes(path, text.encode("utf-8"))


def _read_lines(path) -> list[tuple[int, dict]]:
    out = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError("<record>", f"invalid JSON ({e.msg})", n) from None
            if not isinstance(rec, dict):
                raise SchemaError("<record>", "expected an object", n)
            out.append((n, rec))
    return out


def _box_field(rec: dict, name: str, line: int) -> Box:
    val = rec.get(name)
    if not isinstance(val, list) or len(val) != 4 or not all(
        isinstance(c, (int, float)) and not isinstance(c, bool) for c in val
    ):
        raise SchemaError(name, "expected [x1, y1, x2, y2]", line)
    box = Box(*(float(c) for c in val))
    if not box.is_valid():
        raise SchemaError(name, f"invalid box {val}", line)
    return box


def _int_field(rec: dict, name: str, line: int) -> int:
    val = rec.get(name)
    if not isinstance(val, int) or isinstance(val, bool) or val < 0:
        raise SchemaError(name, "expected a non-negative integer", line)
    return val


def _score_field(rec: dict, name: str, line: int) -> float:
    val = rec.get(name)
    if not isinstance(val, (int, float)) or isinstance(val, bool) or not 0.0 <= val <= 1.0:
        raise SchemaError(name, "expected a number in [0, 1]", line)
    return float(val)


# -- triplets / ground truth -------------------------------------------------


@dataclass(frozen=True)
class TripletRecord:
    """One line of a triplets or ground-truth file (image-space boxes)."""

    image_id: str
    action_id: int
    human: Box
    object: Optional[Box]
    score: float = 1.0
    human_score: float = 1.0
    object_score: Optional[float] = None

    def to_json(self) -> str:
        rec = {"image_id": self.image_id, "action_id": self.action_id, "human": _coords(self.human)}
        if self.object is not None:
            rec["object"] = _coords(self.object)
        rec["score"] = format_score(self.score)
        rec["human_score"] = format_score(self.human_score)
        if self.object is not None and self.object_score is not None:
            rec["object_score"] = format_score(self.object_score)
        return _dumps(rec)

    def to_triplet(self, stride: float = 1.0) -> InteractionTriplet:
        human = ScoredDetection(to_grid(self.human, stride), 0, self.human_score)
        obj = None
        if self.object is not None:
            obj = ScoredDetection(
                to_grid(self.object, stride), -1, self.object_score if self.object_score is not None else 1.0
            )
        return InteractionTriplet(human, obj, self.action_id, self.score)

    @classmethod
    def from_triplet(cls, image_id: str, t: InteractionTriplet, stride: float = 1.0) -> "TripletRecord":
        return cls(
            image_id=image_id,
            action_id=t.action_id,
            human=t.human.bbox.scaled(stride),
            object=t.object.bbox.scaled(stride) if t.object is not None else None,
            score=t.score,
            human_score=t.human.score,
            object_score=t.object.score if t.object is not None else None,
        )


def parse_triplet_record(rec: dict, line: int = 0, no_object_classes=frozenset()) -> TripletRecord:
    image_id = rec.get("image_id")
    if not isinstance(image_id, str) or not image_id:
        raise SchemaError("image_id", "expected a non-empty string", line)
    action = _int_field(rec, "action_id", line)
    human = _box_field(rec, "human", line)
    if rec.get("object") is None:
        if action not in no_object_classes:
            raise SchemaError("object", f"required for action {action}", line)
        obj = None
    else:
        obj = _box_field(rec, "object", line)
    score = _score_field(rec, "score", line) if "score" in rec else 1.0
    hs = _score_field(rec, "human_score", line) if "human_score" in rec else 1.0
    os_ = _score_field(rec, "object_score", line) if "object_score" in rec else None
    return TripletRecord(image_id, action, human, obj, score, hs, os_)


def write_triplets(path, records: Sequence[TripletRecord]) -> None:
    _write_lines(path, (r.to_json() for r in records))


def read_triplets(path, no_object_classes=frozenset()) -> list[TripletRecord]:
    return [parse_triplet_record(rec, n, frozenset(no_object_classes)) for n, rec in _read_lines(path)]


def group_by_image(records: Sequence[TripletRecord], stride: float = 1.0) -> dict[str, list[InteractionTriplet]]:
    out: dict[str, list[InteractionTriplet]] = {}
    for r in records:
        out.setdefault(r.image_id, []).append(r.to_triplet(stride))
    return out


# -- detections --------------------------------------------------------------


@dataclass
class DetectionSplit:
    humans: list[ScoredDetection] = field(default_factory=list)
    objects: list[ScoredDetection] = field(default_factory=list)


@dataclass
class IngestResult:
    images: dict[str, DetectionSplit]
    rejected: int = 0


def detection_record(image_id: str, bbox: Box, category: int, score: float) -> str:
    return _dumps({"image_id": image_id, "bbox": _coords(bbox), "category": category, "score": format_score(score)})


def ingest_detections(path, stride: float = 4.0, person_category: int = 0, num_categories: Optional[int] = None) -> IngestResult:
    """Read detector output and convert boxes to grid units.

    Malformed records (bad box, score outside [0, 1], missing fields) are
    dropped and counted; a category id outside the vocabulary is an error.
    Image ids keep first-appearance order.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    res = IngestResult(images={})
    for n, rec in _read_lines(path):
        try:
            image_id = rec.get("image_id")
            if not isinstance(image_id, str) or not image_id:
                raise SchemaError("image_id", "expected a non-empty string", n)
            cat = _int_field(rec, "category", n)
            box = _box_field(rec, "bbox", n)
            score = _score_field(rec, "score", n)
        except SchemaError as e:
            log.warning("dropping detection record: %s", e)
            res.rejected += 1
            continue
        if num_categories is not None and cat >= num_categories:
            raise SchemaError("category", f"unknown category id {cat}", n)
        det = ScoredDetection(to_grid(box, stride), cat, score)
        split = res.images.setdefault(image_id, DetectionSplit())
        (split.humans if cat == person_category else split.objects).append(det)
    return res


# -- candidates ----------------------------------------------------------------


def candidate_record(image_id: str, c: InteractionCandidate) -> str:
    # candidates live on the heatmap lattice: positions and vectors stay in cells
    return _dumps(
        {
            "image_id": image_id,
            "class_id": c.class_id,
            "x": float(c.pos.x),
            "y": float(c.pos.y),
            "score": format_score(c.score),
            "vx": float(c.vector.vx_abs),
            "vy": float(c.vector.vy_abs),
        }
    )


def write_candidates(path, by_image: Mapping[str, Sequence[InteractionCandidate]]) -> None:
    _write_lines(path, (candidate_record(img, c) for img, cs in by_image.items() for c in cs))


def read_candidates(path) -> dict[str, list[InteractionCandidate]]:
    out: dict[str, list[InteractionCandidate]] = {}
    for n, rec in _read_lines(path):
        image_id = rec.get("image_id")
        if not isinstance(image_id, str) or not image_id:
            raise SchemaError("image_id", "expected a non-empty string", n)
        cls = _int_field(rec, "class_id", n)
        score = _score_field(rec, "score", n)
        vals = []
        for name in ("x", "y", "vx", "vy"):
            v = rec.get(name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise SchemaError(name, "expected a number", n)
            vals.append(float(v))
        if vals[2] < 0 or vals[3] < 0:
            raise SchemaError("vx" if vals[2] < 0 else "vy", "must be non-negative", n)
        out.setdefault(image_id, []).append(
            InteractionCandidate(cls, Point(vals[0], vals[1]), score, UnsignedVector(vals[2], vals[3]))
        )
    return out
