"""Displacement metrics (minADE, minFDE) and the speed-scaled miss criterion."""

from __future__ import annotations

import math
from typing import Iterable, Optional, Tuple

import numpy as np

from trajeval.geometry import Pose2
from trajeval.metrics.config import MetricsConfig
from trajeval.scenario import GroundTruthSlice, JointPredictionSet


class NoValidGroundTruthError(ValueError):
    pass


class GroundTruthInvalidAtHorizonError(ValueError):
    pass


def aligned(gt: GroundTruthSlice, p: JointPredictionSet, horizon_steps: int) -> JointPredictionSet:
    """Return ``p`` with agents ordered like ``gt`` and check step counts."""
    if p.agent_ids != gt.agent_ids:
        if set(p.agent_ids) != set(gt.agent_ids):
            raise ValueError(f"prediction agents {p.agent_ids} do not match ground truth {gt.agent_ids}")
        p = p.reordered(gt.agent_ids)
    if not 1 <= horizon_steps <= min(gt.num_steps, p.num_steps):
        raise ValueError(
            f"horizon of {horizon_steps} steps exceeds ground truth ({gt.num_steps}) "
            f"or prediction ({p.num_steps}) length"
        )
    return p


def displacement_errors(gt: GroundTruthSlice, p: JointPredictionSet, horizon_steps: int) -> np.ndarray:
    """(K, A, horizon_steps) Euclidean errors; invalid ground-truth steps are NaN."""
    p = aligned(gt, p, horizon_steps)
    diff = p.waypoints[:, :, :horizon_steps] - gt.positions[None, :, :horizon_steps]
    err = np.hypot(diff[..., 0], diff[..., 1])
    return np.where(gt.valid[None, :, :horizon_steps], err, np.nan)


def min_ade(gt: GroundTruthSlice, p: JointPredictionSet, horizon_steps: int) -> float:
    """Joint minimum average displacement error over valid ground-truth steps.

    The minimum is taken over whole joint hypotheses, never per agent.
    """
    err = displacement_errors(gt, p, horizon_steps)
    n_valid = int(gt.valid[:, :horizon_steps].sum())
    if n_valid == 0:
        raise NoValidGroundTruthError("no valid ground-truth step inside the horizon")
    totals = np.nansum(err, axis=(1, 2))
    return float(totals.min() / n_valid)


def min_fde(gt: GroundTruthSlice, p: JointPredictionSet, horizon_steps: int) -> float:
    """Joint minimum final displacement error at ``horizon_steps``."""
    p = aligned(gt, p, horizon_steps)
    t = horizon_steps - 1
    if not bool(gt.valid[:, t].all()):
        raise GroundTruthInvalidAtHorizonError(f"ground truth invalid at step {horizon_steps}")
    diff = p.waypoints[:, :, t] - gt.positions[None, :, t]
    totals = np.hypot(diff[..., 0], diff[..., 1]).sum(axis=1)
    return float(totals.min() / gt.num_agents)


def speed_scale(speed: float, cfg: MetricsConfig = MetricsConfig()) -> float:
    """Clamped linear threshold scale in [0.5, 1]."""
    ratio = (speed - cfg.speed_lower) / (cfg.speed_upper - cfg.speed_lower)
    return max(0.0, min(1.0, ratio)) / 2.0 + 0.5


def effective_thresholds(
    vx: float, vy: float, horizon_s: int, cfg: MetricsConfig = MetricsConfig()
) -> Tuple[float, float]:
    """(lateral, longitudinal) thresholds after speed scaling."""
    lat0, lon0 = cfg.lateral_longitudinal(horizon_s)
    return lat0 * speed_scale(abs(vy), cfg), lon0 * speed_scale(abs(vx), cfg)


def is_match(
    gt_point,
    pred_point,
    ref: Pose2,
    vx: float,
    vy: float,
    horizon_s: int,
    cfg: MetricsConfig = MetricsConfig(),
) -> bool:
    """Whether a predicted point matches ground truth at a horizon.

    ``vx``/``vy`` are the agent-frame velocity components at prediction time.
    """
    lat_thr, lon_thr = effective_thresholds(vx, vy, horizon_s, cfg)
    dx = float(gt_point[0]) - float(pred_point[0])
    dy = float(gt_point[1]) - float(pred_point[1])
    c, s = math.cos(ref.heading), math.sin(ref.heading)
    lon = c * dx + s * dy
    lat = -s * dx + c * dy
    return abs(lon) <= lon_thr and abs(lat) <= lat_thr


def match_table(
    gt: GroundTruthSlice, p: JointPredictionSet, horizon_s: int, cfg: MetricsConfig = MetricsConfig()
) -> np.ndarray:
    """(K, A) match flags at the horizon step (ground-truth validity not checked)."""
    steps = cfg.horizon_steps(horizon_s)
    p = aligned(gt, p, steps)
    t = steps - 1
    lat0, lon0 = cfg.lateral_longitudinal(horizon_s)
    headings = np.array([pose.heading for pose in gt.ref_poses])
    c, s = np.cos(headings), np.sin(headings)
    diff = gt.positions[None, :, t] - p.waypoints[:, :, t]  # (K, A, 2)
    lon = c * diff[..., 0] + s * diff[..., 1]
    lat = -s * diff[..., 0] + c * diff[..., 1]
    lon_thr = np.array([lon0 * speed_scale(abs(v[0]), cfg) for v in gt.speeds])
    lat_thr = np.array([lat0 * speed_scale(abs(v[1]), cfg) for v in gt.speeds])
    return (np.abs(lon) <= lon_thr) & (np.abs(lat) <= lat_thr)


def horizon_valid(gt: GroundTruthSlice, horizon_s: int, cfg: MetricsConfig = MetricsConfig()) -> bool:
    steps = cfg.horizon_steps(horizon_s)
    return steps <= gt.num_steps and bool(gt.valid[:, steps - 1].all())


def is_miss(
    gt: GroundTruthSlice, p: JointPredictionSet, horizon_s: int, cfg: MetricsConfig = MetricsConfig()
) -> Optional[bool]:
    """Sample-level miss: every hypothesis has at least one unmatched agent.

    Returns ``None`` when the ground truth is invalid at the horizon step; such
    samples do not count toward the miss rate.
    """
    if not horizon_valid(gt, horizon_s, cfg):
        return None
    table = match_table(gt, p, horizon_s, cfg)
    return bool((~table).any(axis=1).all())


def miss_rate(
    samples: Iterable[Tuple[GroundTruthSlice, JointPredictionSet]],
    horizon_s: int,
    cfg: MetricsConfig = MetricsConfig(),
) -> float:
    """Mean miss indicator over samples that are valid at the horizon."""
    flags = [m for m in (is_miss(gt, p, horizon_s, cfg) for gt, p in samples) if m is not None]
    if not flags:
        return float("nan")
    return sum(flags) / len(flags)
