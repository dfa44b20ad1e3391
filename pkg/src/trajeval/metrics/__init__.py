"""Motion forecasting metrics: minADE, minFDE, miss rate, overlap rate, mAP."""

from trajeval.metrics.config import AP_FIRST_MATCH, AP_TOP_ONLY, MetricsConfig, ShapeBucket
from trajeval.metrics.displacement import (
    GroundTruthInvalidAtHorizonError,
    NoValidGroundTruthError,
    effective_thresholds,
    is_match,
    is_miss,
    match_table,
    min_ade,
    min_fde,
    miss_rate,
    speed_scale,
)
from trajeval.metrics.evaluate import JOINT, MARGINAL, MetricsReport, evaluate
from trajeval.metrics.overlap import overlap_joint, overlap_marginal
from trajeval.metrics.precision import (
    APRecord,
    EmptyEvaluationError,
    ZeroGroundTruthError,
    assign_matches,
    average_precision,
    mean_ap,
    pr_curve,
)
from trajeval.metrics.shapes import TooFewValidStepsError, classify_shape

__all__ = [
    "AP_FIRST_MATCH",
    "AP_TOP_ONLY",
    "APRecord",
    "EmptyEvaluationError",
    "GroundTruthInvalidAtHorizonError",
    "JOINT",
    "MARGINAL",
    "MetricsConfig",
    "MetricsReport",
    "NoValidGroundTruthError",
    "ShapeBucket",
    "TooFewValidStepsError",
    "ZeroGroundTruthError",
    "assign_matches",
    "average_precision",
    "classify_shape",
    "effective_thresholds",
    "evaluate",
    "is_match",
    "is_miss",
    "match_table",
    "mean_ap",
    "min_ade",
    "min_fde",
    "miss_rate",
    "overlap_joint",
    "overlap_marginal",
    "pr_curve",
    "speed_scale",
]
