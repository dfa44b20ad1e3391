"""Ground-truth trajectory shape buckets used to balance mAP."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from trajeval.geometry import infer_headings, normalize_angle
from trajeval.metrics.config import MetricsConfig, ShapeBucket


class TooFewValidStepsError(ValueError):
    pass


def classify_shape(
    positions,
    valid=None,
    headings: Optional[np.ndarray] = None,
    cfg: MetricsConfig = MetricsConfig(),
) -> ShapeBucket:
    """Bucket a ground-truth trajectory by displacement, turn angle and lateral drift.

    Args:
        positions: (T, 2) positions, first entry at prediction time.
        valid: (T,) flags; defaults to all valid.
        headings: (T,) stored headings. When omitted they are inferred from
            the positions.
        cfg: supplies the bucket thresholds.
    """
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    mask = np.ones(len(pts), dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    idx = np.flatnonzero(mask)
    if len(idx) < 2:
        raise TooFewValidStepsError("shape classification needs two valid steps")
    pts_valid = pts[idx]
    rel = pts_valid - pts_valid[0]
    if float(np.max(np.hypot(rel[:, 0], rel[:, 1]))) < cfg.stationary_displacement:
        return ShapeBucket.STATIONARY

    if headings is None:
        inferred = infer_headings(pts_valid, fallback=0.0)
        start_heading, end_heading = float(inferred[0]), float(inferred[-1])
    else:
        hv = np.asarray(headings, dtype=float)[idx]
        start_heading, end_heading = float(hv[0]), float(hv[-1])
    turn = normalize_angle(end_heading - start_heading)

    if abs(turn) >= cfg.u_turn_angle:
        return ShapeBucket.LEFT_U_TURN if turn > 0 else ShapeBucket.RIGHT_U_TURN
    if abs(turn) >= cfg.turn_angle:
        return ShapeBucket.LEFT if turn > 0 else ShapeBucket.RIGHT

    c, s = math.cos(start_heading), math.sin(start_heading)
    lateral = -s * rel[:, 0] + c * rel[:, 1]
    if float(np.max(np.abs(lateral))) >= cfg.lateral_offset:
        return ShapeBucket.STRAIGHT_LEFT if float(lateral.mean()) > 0 else ShapeBucket.STRAIGHT_RIGHT
    return ShapeBucket.STRAIGHT
