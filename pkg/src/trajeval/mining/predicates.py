"""Atomic interaction predicates over agent tracks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from trajeval.geometry import normalize_angle, points_to_polyline_distance
from trajeval.scenario import STEP_SECONDS, MapFeature, Track

LANE_GATE = 3.0  # meters
SUCCESSOR_GAP = 1.0  # meters between one lane's end and the next lane's start


class NoLanesError(ValueError):
    pass


@dataclass(frozen=True)
class LaneChange:
    agent: int
    step: int
    time: float
    from_lane: int
    to_lane: int


@dataclass(frozen=True)
class Crossing:
    time_gap: float
    heading_diff: float
    point: Tuple[float, float]
    time_a: float
    time_b: float


def _connected(a: MapFeature, b: MapFeature, gap: float) -> bool:
    ax, bx = a.xy, b.xy
    return bool(np.hypot(*(ax[-1] - bx[0])) <= gap or np.hypot(*(bx[-1] - ax[0])) <= gap)


def lane_assignments(track: Track, lanes: Sequence[MapFeature], gate: float = LANE_GATE) -> List[Optional[int]]:
    """Nearest lane id per step (``None`` when invalid or farther than ``gate``)."""
    ordered = sorted(lanes, key=lambda f: f.feature_id)
    out: List[Optional[int]] = [None] * len(track.states)
    idx = np.flatnonzero(track.valid)
    if len(idx) == 0 or not ordered:
        return out
    dists = np.stack([points_to_polyline_distance(track.xy[idx], lane.xy) for lane in ordered])
    best = np.argmin(dists, axis=0)  # first lane wins ties, i.e. the lowest id
    for col, (i, b) in enumerate(zip(idx, best)):
        if dists[b, col] <= gate:
            out[int(i)] = ordered[int(b)].feature_id
    return out


def detect_lane_change(
    track: Track,
    lanes: Sequence[MapFeature],
    gate: float = LANE_GATE,
    successor_gap: float = SUCCESSOR_GAP,
    step_seconds: float = STEP_SECONDS,
) -> List[LaneChange]:
    """Steps where the nearest-lane assignment switches between two gated lanes.

    Switching onto a lane that continues the current one (end of one within
    ``successor_gap`` of the start of the other) is lane following, not a
    lane change.
    """
    if not lanes:
        raise NoLanesError("lane change detection needs lane_center features")
    by_id = {f.feature_id: f for f in lanes}
    assigned = lane_assignments(track, lanes, gate)
    events = []
    prev_step = None
    for step, st in enumerate(track.states):
        if not st.valid:
            continue
        if prev_step is not None:
            a, b = assigned[prev_step], assigned[step]
            if a is not None and b is not None and a != b and not _connected(by_id[a], by_id[b], successor_gap):
                events.append(LaneChange(track.object_id, step, step * step_seconds, a, b))
        prev_step = step
    return events


def _segments(track: Track, step_seconds: float):
    idx = np.flatnonzero(track.valid)
    if len(idx) < 2:
        return None
    pts = track.xy[idx]
    times = idx * step_seconds
    starts, ends = pts[:-1], pts[1:]
    keep = np.hypot(*(ends - starts).T) > 0.0
    return starts[keep], (ends - starts)[keep], times[:-1][keep], times[1:][keep]


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def crossed_paths(a: Track, b: Track, step_seconds: float = STEP_SECONDS, tol: float = 1e-9) -> Optional[Crossing]:
    """Earliest point where the two piecewise-linear paths meet.

    Times at the crossing are interpolated along each agent's segment; the
    earliest crossing minimizes the earlier of the two arrival times. Result
    is symmetric in ``a`` and ``b``. ``None`` when the paths never meet.
    """
    sa, sb = _segments(a, step_seconds), _segments(b, step_seconds)
    if sa is None or sb is None or len(sa[0]) == 0 or len(sb[0]) == 0:
        return None
    P, R, ta0, ta1 = sa
    Q, S, tb0, tb1 = sb
    QP = Q[None, :, :] - P[:, None, :]  # (n, m, 2)
    denom = _cross(R[:, None, :], S[None, :, :])
    scale = np.hypot(*R.T)[:, None] * np.hypot(*S.T)[None, :]
    candidates = []

    proper = np.abs(denom) > tol * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        u = _cross(QP, S[None, :, :]) / denom
        v = _cross(QP, R[:, None, :]) / denom
    hit = proper & (u >= -tol) & (u <= 1 + tol) & (v >= -tol) & (v <= 1 + tol)
    for i, j in zip(*np.nonzero(hit)):
        candidates.append((i, j, float(np.clip(u[i, j], 0, 1)), float(np.clip(v[i, j], 0, 1))))

    # collinear overlaps: both ends of the shared interval are candidates
    collinear = ~proper & (np.abs(_cross(QP, R[:, None, :])) <= tol * np.hypot(*R.T)[:, None] * (1 + np.hypot(*QP.T).T))
    for i, j in zip(*np.nonzero(collinear)):
        rr = float(R[i] @ R[i])
        ss = float(S[j] @ S[j])
        u0 = float((Q[j] - P[i]) @ R[i]) / rr
        u1 = float((Q[j] + S[j] - P[i]) @ R[i]) / rr
        lo, hi = max(0.0, min(u0, u1)), min(1.0, max(u0, u1))
        if lo > hi + tol:
            continue
        for uu in (lo, min(hi, 1.0)):
            pt = P[i] + uu * R[i]
            vv = float(np.clip((pt - Q[j]) @ S[j] / ss, 0.0, 1.0))
            candidates.append((i, j, uu, vv))

    if not candidates:
        return None
    best = None
    for i, j, uu, vv in candidates:
        t_a = float(ta0[i] + uu * (ta1[i] - ta0[i]))
        t_b = float(tb0[j] + vv * (tb1[j] - tb0[j]))
        pa = P[i] + uu * R[i]
        pb = Q[j] + vv * S[j]
        point = (float(pa[0] + pb[0]) / 2.0, float(pa[1] + pb[1]) / 2.0)
        key = (min(t_a, t_b), max(t_a, t_b), point)
        if best is None or key < best[0]:
            diff = abs(normalize_angle(math.atan2(R[i][1], R[i][0]) - math.atan2(S[j][1], S[j][0])))
            best = (key, Crossing(abs(t_a - t_b), diff, point, t_a, t_b))
    return best[1]


def close_proximity(a: Track, b: Track, max_dist: float) -> List[int]:
    """Steps where both agents are valid and their centers are within ``max_dist``."""
    both = a.valid & b.valid
    d = np.hypot(*(a.xy - b.xy).T)
    return [int(i) for i in np.flatnonzero(both & (d <= max_dist))]


def accelerations(track: Track, step_seconds: float = STEP_SECONDS) -> np.ndarray:
    """Central-difference acceleration magnitudes from the velocity channel (NaN where undefined)."""
    n = len(track.states)
    out = np.full(n, np.nan)
    if n < 3:
        return out
    v, ok = track.velocity, track.valid
    usable = ok[:-2] & ok[1:-1] & ok[2:]
    dv = (v[2:] - v[:-2]) / (2.0 * step_seconds)
    out[1:-1] = np.where(usable, np.hypot(dv[:, 0], dv[:, 1]), np.nan)
    return out


def high_acceleration(track: Track, min_accel: float, step_seconds: float = STEP_SECONDS) -> List[int]:
    """Steps whose acceleration magnitude is at least ``min_accel``."""
    acc = accelerations(track, step_seconds)
    with np.errstate(invalid="ignore"):
        return [int(i) for i in np.flatnonzero(acc >= min_accel)]
