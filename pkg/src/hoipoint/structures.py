"""Record types shared across the codec, grouping, evaluator and file formats."""

from dataclasses import dataclass, field
from typing import Optional

from .geometry import Box, Point, UnsignedVector, midpoint


@dataclass(frozen=True)
class ScoredDetection:
    """One human or object box from an upstream detector (grid units)."""

    bbox: Box
    class_id: int
    score: float

    def __post_init__(self):
        if not isinstance(self.bbox, Box):
            object.__setattr__(self, "bbox", Box(*self.bbox))
        if not self.bbox.is_valid():
            raise ValueError(f"invalid box {tuple(self.bbox)}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score {self.score} outside [0, 1]")

    @property
    def center(self) -> Point:
        return self.bbox.center


@dataclass(frozen=True)
class InteractionCandidate:
    """A decoded interaction-point peak with the unsigned vector read at its cell."""

    class_id: int
    pos: Point
    score: float
    vector: UnsignedVector = UnsignedVector(0.0, 0.0)


@dataclass(frozen=True)
class InteractionTriplet:
    """A <human, action, object> instance.

    ``object`` is None for actions without an interaction object. ``point`` and
    ``vector`` are the grid-space interaction point and unsigned vector; they
    are filled in by grouping and left unset on ground truth.
    """

    human: ScoredDetection
    object: Optional[ScoredDetection]
    action_id: int
    score: float = 1.0
    point: Optional[Point] = field(default=None, compare=False)
    vector: Optional[UnsignedVector] = field(default=None, compare=False)

    def interaction_point(self) -> Point:
        """Midpoint of the box centers, or the human center without an object."""
        if self.object is None:
            return self.human.center
        return midpoint(self.human.center, self.object.center)

    def interaction_vector(self) -> UnsignedVector:
        h = self.human.center
        p = self.interaction_point()
        return UnsignedVector(abs(h.x - p.x), abs(h.y - p.y))
