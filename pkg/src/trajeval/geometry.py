"""Planar geometry helpers: agent frames, heading inference, oriented boxes, polylines."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

MOTION_EPS = 1e-3  # meters per step below which a waypoint is treated as stationary
AREA_EPS = 1e-12  # square meters

Point = Tuple[float, float]


class DegenerateBoxError(ValueError):
    """Raised when a box has (numerically) zero area."""


def normalize_angle(angle: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.fmod(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    elif wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped


def normalize_angles(angles: np.ndarray) -> np.ndarray:
    """Vectorized :func:`normalize_angle`."""
    wrapped = np.fmod(np.asarray(angles, dtype=float), 2.0 * np.pi)
    wrapped = np.where(wrapped <= -np.pi, wrapped + 2.0 * np.pi, wrapped)
    return np.where(wrapped > np.pi, wrapped - 2.0 * np.pi, wrapped)


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    heading: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", normalize_angle(float(self.heading)))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Box5:
    """Oriented rectangle. ``length`` runs along ``heading``, ``width`` across it."""

    x: float
    y: float
    length: float
    width: float
    heading: float

    def __post_init__(self) -> None:
        if not (self.length > 0.0 and self.width > 0.0):
            raise DegenerateBoxError(f"box extents must be positive, got {self.length}x{self.width}")
        object.__setattr__(self, "heading", normalize_angle(float(self.heading)))

    @property
    def area(self) -> float:
        return self.length * self.width

    def corners(self) -> List[Point]:
        """Corners in counter-clockwise order."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        hl, hw = 0.5 * self.length, 0.5 * self.width
        out = []
        for lx, ly in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
            out.append((self.x + c * lx - s * ly, self.y + s * lx + c * ly))
        return out


def to_agent_frame(points: np.ndarray, ref: Pose2) -> np.ndarray:
    """Rotate world-frame vectors (..., 2) by ``-ref.heading``.

    The result has x along the reference heading (longitudinal) and y to its
    left (lateral). Translation is the caller's business: pass displacements.
    """
    pts = np.asarray(points, dtype=float)
    c, s = math.cos(ref.heading), math.sin(ref.heading)
    x, y = pts[..., 0], pts[..., 1]
    return np.stack([c * x + s * y, -s * x + c * y], axis=-1)


def from_agent_frame(points: np.ndarray, ref: Pose2) -> np.ndarray:
    """Inverse of :func:`to_agent_frame`."""
    pts = np.asarray(points, dtype=float)
    c, s = math.cos(ref.heading), math.sin(ref.heading)
    x, y = pts[..., 0], pts[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


def infer_headings(waypoints: Sequence[Sequence[float]], fallback: float, eps: float = MOTION_EPS) -> np.ndarray:
    """Headings from consecutive waypoint differences.

    A step whose displacement is at most ``eps`` inherits the previous
    heading. The first waypoint looks forward to the second one and falls
    back to ``fallback`` when that displacement is too small.
    """
    pts = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        raise ValueError("infer_headings needs at least one waypoint")
    headings = np.empty(n)
    if n == 1:
        headings[0] = fallback
        return headings
    deltas = np.diff(pts, axis=0)
    norms = np.hypot(deltas[:, 0], deltas[:, 1])
    angles = np.arctan2(deltas[:, 1], deltas[:, 0])
    headings[0] = angles[0] if norms[0] > eps else fallback
    for t in range(1, n):
        headings[t] = angles[t - 1] if norms[t - 1] > eps else headings[t - 1]
    return headings


def polygon_area(poly: Sequence[Point]) -> float:
    """Signed shoelace area (positive for counter-clockwise)."""
    if len(poly) < 3:
        return 0.0
    area = 0.0
    for i in range(len(poly)):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % len(poly)]
        area += x1 * y2 - x2 * y1
    return 0.5 * area


def clip_convex(subject: Sequence[Point], clip: Sequence[Point]) -> List[Point]:
    """Sutherland-Hodgman clipping of ``subject`` by a convex CCW polygon ``clip``."""
    output = list(subject)
    for i in range(len(clip)):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % len(clip)]
        ex, ey = bx - ax, by - ay
        inputs, output = output, []
        prev = inputs[-1]
        prev_side = ex * (prev[1] - ay) - ey * (prev[0] - ax)
        for cur in inputs:
            cur_side = ex * (cur[1] - ay) - ey * (cur[0] - ax)
            if cur_side >= 0.0:
                if prev_side < 0.0:
                    output.append(_edge_cross(prev, cur, prev_side, cur_side))
                output.append(cur)
            elif prev_side >= 0.0:
                output.append(_edge_cross(prev, cur, prev_side, cur_side))
            prev, prev_side = cur, cur_side
    return output


def _edge_cross(p: Point, q: Point, sp: float, sq: float) -> Point:
    u = sp / (sp - sq)
    return (p[0] + u * (q[0] - p[0]), p[1] + u * (q[1] - p[1]))


def box_iou(a: Box5, b: Box5) -> float:
    """Intersection-over-union of two oriented rectangles."""
    if a.area < AREA_EPS or b.area < AREA_EPS:
        raise DegenerateBoxError("box area below tolerance")
    reach = 0.5 * (math.hypot(a.length, a.width) + math.hypot(b.length, b.width))
    if math.hypot(a.x - b.x, a.y - b.y) > reach:
        return 0.0
    inter = abs(polygon_area(clip_convex(a.corners(), b.corners())))
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def resample_polyline(points: Sequence[Sequence[float]], spacing: float) -> np.ndarray:
    """Resample a polyline at uniform arc length, keeping endpoints and corners.

    Samples sit every ``total_length / ceil(total_length / spacing)`` meters,
    so no gap exceeds ``spacing``. Original vertices are merged in as well;
    without them a chord would cut each corner and shorten the path. Extra
    coordinates (z) are interpolated too.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise ValueError("resample_polyline needs at least two points")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    seg = np.linalg.norm(np.diff(pts[:, :2], axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total == 0.0:
        return pts[[0, -1]].copy()
    n = max(1, int(math.ceil(total / spacing - 1e-9)))
    targets = np.union1d(np.linspace(0.0, total, n + 1), cum)
    keep = np.append(True, np.diff(targets) > 1e-9 * max(1.0, total))
    keep[-1] = True
    targets = targets[keep]
    if len(targets) > 2 and targets[-1] - targets[-2] <= 1e-9 * max(1.0, total):
        targets = np.delete(targets, -2)
    out = np.empty((len(targets), pts.shape[1]))
    for dim in range(pts.shape[1]):
        out[:, dim] = np.interp(targets, cum, pts[:, dim])
    # exact vertices, including at knots where zero-length segments repeat an arc position
    for i, c in enumerate(cum):
        j = int(np.argmin(np.abs(targets - c)))
        if abs(targets[j] - c) <= 1e-9 * max(1.0, total) and (i == len(cum) - 1 or seg[i] > 0):
            out[j] = pts[i]
    out[0], out[-1] = pts[0], pts[-1]
    return out


def polyline_length(points: Sequence[Sequence[float]]) -> float:
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts[:, :2], axis=0), axis=1).sum())


def point_to_polyline_distance(point: Sequence[float], polyline: Sequence[Sequence[float]]) -> float:
    """Planar distance from a point to a polyline (a single vertex counts as a point)."""
    return float(points_to_polyline_distance(np.asarray(point, dtype=float)[None, :2], polyline)[0])


def points_to_polyline_distance(points: np.ndarray, polyline: Sequence[Sequence[float]]) -> np.ndarray:
    """Distances from each of N points to a polyline, shape (N,)."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    pts = np.asarray(polyline, dtype=float)[:, :2]
    if len(pts) == 1:
        return np.hypot(*(p - pts[0]).T)
    a, ab = pts[:-1], np.diff(pts, axis=0)
    denom = np.einsum("ij,ij->i", ab, ab)
    rel = p[:, None, :] - a[None, :, :]  # (N, S, 2)
    u = np.einsum("nsj,sj->ns", rel, ab) / np.where(denom > 0, denom, 1.0)
    u = np.clip(np.where(denom > 0, u, 0.0), 0.0, 1.0)
    gap = rel - u[..., None] * ab[None]
    return np.hypot(gap[..., 0], gap[..., 1]).min(axis=1)


def count_unique_voxels(poses: Iterable[Sequence[float]], voxel: float = 25.0) -> int:
    """Number of distinct ``voxel``-sized planar grid cells touched by ``poses``."""
    if voxel <= 0:
        raise ValueError("voxel size must be positive")
    arr = np.asarray(list(poses), dtype=float)
    if arr.size == 0:
        return 0
    cells = np.floor(arr[:, :2] / voxel).astype(np.int64)
    return int(len(np.unique(cells, axis=0)))
