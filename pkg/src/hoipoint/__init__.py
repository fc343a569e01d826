"""Interaction-point representation for human-object interaction detection."""

from .codec import center_pool, decode_peaks, dynamic_thresholds, encode_points, encode_vectors
from .evaluator import EvalReport, GroundTruthSet, average_precision, evaluate, match_triplets
from .geometry import (
    Box,
    CornerSet,
    Point,
    UnsignedVector,
    boxes_overlap,
    corner_distances,
    interaction_box,
    iou,
    midpoint,
    reference_box,
)
from .grouping import GroupingConfig, angle_filter, check_conditions, dist_ratio_filter, group
from .losses import LossReport, focal_loss, total_loss, vector_l1_loss
from .structures import InteractionCandidate, InteractionTriplet, ScoredDetection

__version__ = "0.1.0"
