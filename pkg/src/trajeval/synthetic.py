"""Deterministic synthetic scenarios with closed-form ground truth.

Every template places its main actors near the origin and a few
constant-velocity background agents far away (around (300, 300)), so that
each scene contains vehicles, pedestrians and cyclists. Positions are
analytic functions of time; constant-velocity agents are written as
``p_now + v * (k * dt)`` so the constant-velocity baseline reproduces them
bit for bit.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from trajeval.geometry import normalize_angles, resample_polyline
from trajeval.mining.interactions import annotate_interactive_pair
from trajeval.pipeline import select_predict_objects
from trajeval.scenario import (
    HISTORY_STEPS,
    STEP_SECONDS,
    WINDOW_STEPS,
    MapFeature,
    MapFeatureKind,
    ObjectState,
    ObjectType,
    Scenario,
    SignalState,
    Track,
    TrafficSignalFrame,
    validate_scenario,
)


class Template(str, Enum):
    STRAIGHT_CV = "straight_cv"
    TURNING = "turning"
    CROSSING_PAIR = "crossing_pair"
    YIELD_PEDESTRIAN = "yield_pedestrian"
    BRAKING = "braking"


TEMPLATES = tuple(t.value for t in Template)

DIMS = {
    ObjectType.VEHICLE: (4.5, 2.0, 1.6),
    ObjectType.PEDESTRIAN: (0.8, 0.8, 1.8),
    ObjectType.CYCLIST: (1.8, 0.7, 1.7),
}
SPEEDS = {
    ObjectType.VEHICLE: (5.0, 15.0),
    ObjectType.PEDESTRIAN: (1.0, 2.0),
    ObjectType.CYCLIST: (3.0, 7.0),
}
LANE_SPACING = 0.5  # meters between lane-center vertices
LANE_GAP = 5.0  # meters between parallel lanes
BACKGROUND_GAP = 25.0  # wider than any interaction radius, so background agents never interact
BACKGROUND_ORIGIN = (300.0, 300.0)


@dataclass(frozen=True)
class CrossingLayout:
    """Closed-form parameters of the crossing_pair template.

    Agent ``first`` drives east along y=0, agent ``second`` north along x=0;
    both pass the origin, at ``time_first`` and ``time_second`` seconds from
    scenario start.
    """

    first: int
    second: int
    speed_first: float
    speed_second: float
    time_first: float
    time_second: float

    @property
    def gap(self) -> float:
        return abs(self.time_second - self.time_first)


class _Path:
    """Piecewise straight/circular path parameterized by arc length.

    Arc length below zero or beyond the end extends the path straight along
    the start or end heading.
    """

    def __init__(self, start: Tuple[float, float], heading: float):
        self.start = start
        self.heading0 = heading
        self.pieces: List[tuple] = []  # (s0, length, x0, y0, h0, curvature)
        self.length = 0.0
        self._end = (start[0], start[1], heading)

    def straight(self, length: float) -> "_Path":
        return self._add(length, 0.0)

    def arc(self, radius: float, angle: float) -> "_Path":
        """Circular arc turning by ``angle`` radians (positive = left)."""
        return self._add(radius * abs(angle), math.copysign(1.0 / radius, angle))

    def _add(self, length: float, curvature: float) -> "_Path":
        x0, y0, h0 = self._end
        self.pieces.append((self.length, length, x0, y0, h0, curvature))
        self.length += length
        (x1, y1), h1 = self._eval_piece(self.pieces[-1], np.array([length]))
        self._end = (float(x1[0]), float(y1[0]), float(h1[0]))
        return self

    @staticmethod
    def _eval_piece(piece, ds: np.ndarray):
        _, _, x0, y0, h0, k = piece
        if k == 0.0:
            return (x0 + ds * math.cos(h0), y0 + ds * math.sin(h0)), np.full_like(ds, h0)
        h = h0 + k * ds
        return (x0 + (np.sin(h) - math.sin(h0)) / k, y0 - (np.cos(h) - math.cos(h0)) / k), h

    def at(self, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=float)
        xy = np.empty(s.shape + (2,))
        heading = np.empty(s.shape)
        before = s < 0
        x0, y0 = self.start
        xy[before, 0] = x0 + s[before] * math.cos(self.heading0)
        xy[before, 1] = y0 + s[before] * math.sin(self.heading0)
        heading[before] = self.heading0
        for piece in self.pieces:
            s0, length = piece[0], piece[1]
            mask = (s >= s0) & (s < s0 + length)
            (px, py), ph = self._eval_piece(piece, s[mask] - s0)
            xy[mask, 0], xy[mask, 1], heading[mask] = px, py, ph
        after = s >= self.length
        x1, y1, h1 = self._end
        ds = s[after] - self.length
        xy[after, 0] = x1 + ds * math.cos(h1)
        xy[after, 1] = y1 + ds * math.sin(h1)
        heading[after] = h1
        return xy, heading

    def polyline(self, s_min: float, s_max: float) -> Tuple[Tuple[float, float, float], ...]:
        # the path is parameterized by arc length, so uniform s is uniform spacing along the curve
        s = np.linspace(s_min, s_max, max(2, int(math.ceil((s_max - s_min) / LANE_SPACING - 1e-9)) + 1))
        xy, _ = self.at(s)
        return tuple((float(x), float(y), 0.0) for x, y in xy)


def _times(n_steps: int) -> np.ndarray:
    return np.arange(n_steps) * STEP_SECONDS


def _make_track(
    object_id: int,
    otype: ObjectType,
    xy: np.ndarray,
    velocity: np.ndarray,
    heading: np.ndarray,
    dims: Tuple[float, float, float],
    is_sdc: bool = False,
) -> Track:
    heading = normalize_angles(heading)
    states = tuple(
        ObjectState(
            float(xy[i, 0]), float(xy[i, 1]), 0.0, float(heading[i]),
            float(velocity[i, 0]), float(velocity[i, 1]), *dims, True,
        )
        for i in range(len(xy))
    )
    return Track(object_id, otype, states, is_sdc)


def _cv_track(object_id, otype, position, velocity, dims, n_steps, current_index, is_sdc=False) -> Track:
    """Constant-velocity track anchored at ``position`` at ``current_index``."""
    k = np.arange(n_steps) - current_index
    t = k * STEP_SECONDS
    xy = np.stack([position[0] + velocity[0] * t, position[1] + velocity[1] * t], axis=1)
    vel = np.tile(np.asarray(velocity, dtype=float), (n_steps, 1))
    heading = np.full(n_steps, math.atan2(velocity[1], velocity[0]))
    return _make_track(object_id, otype, xy, vel, heading, dims, is_sdc)


def _path_track(object_id, otype, path: _Path, s: np.ndarray, speed: np.ndarray, dims, is_sdc=False) -> Track:
    xy, heading = path.at(s)
    vel = np.stack([speed * np.cos(heading), speed * np.sin(heading)], axis=1)
    return _make_track(object_id, otype, xy, vel, heading, dims, is_sdc)


def _dims(rng: np.random.Generator, otype: ObjectType) -> Tuple[float, float, float]:
    length, width, height = DIMS[otype]
    scale = float(rng.uniform(0.9, 1.1))
    return (round(length * scale, 3), round(width * scale, 3), height)


def _lane(feature_id: int, geometry) -> MapFeature:
    return MapFeature(feature_id, MapFeatureKind.LANE_CENTER, geometry, (("speed_limit_mps", "15"),))


class _Builder:
    def __init__(self, rng: np.random.Generator, n_steps: int):
        self.rng = rng
        self.n = n_steps
        self.cur = HISTORY_STEPS
        self.tracks: List[Track] = []
        self.features: List[MapFeature] = []
        self.frames: List[TrafficSignalFrame] = []

    def next_id(self) -> int:
        return len(self.tracks) + 1

    def next_feature(self) -> int:
        return 1000 + len(self.features)

    def cv_lanes(
        self, types: Sequence[ObjectType], origin, theta0: float, first_sdc: bool = False, gap: float = LANE_GAP
    ) -> None:
        """Constant-velocity agents on parallel lanes, one lane per agent."""
        ox, oy = origin
        along = np.array([math.cos(theta0), math.sin(theta0)])
        lateral = np.array([-math.sin(theta0), math.cos(theta0)])
        for i, otype in enumerate(types):
            sign = 1.0 if self.rng.random() < 0.5 else -1.0
            speed = float(self.rng.uniform(*SPEEDS[otype]))
            start = float(self.rng.uniform(-20.0, 20.0))
            pos = np.array([ox, oy]) + start * along + (gap * i) * lateral
            heading = math.atan2(sign * along[1], sign * along[0])
            vel = (speed * math.cos(heading), speed * math.sin(heading))
            is_sdc = first_sdc and i == 0
            self.tracks.append(
                _cv_track(self.next_id(), otype, (float(pos[0]), float(pos[1])), vel, _dims(self.rng, otype),
                          self.n, self.cur, is_sdc)
            )
            base = np.array([ox, oy]) + (gap * i) * lateral
            ends = [base - 200.0 * sign * along, base + 200.0 * sign * along]
            pts = resample_polyline(np.array(ends), LANE_SPACING)
            self.features.append(_lane(self.next_feature(), tuple((float(x), float(y), 0.0) for x, y in pts)))

    def background(self) -> None:
        self.cv_lanes([ObjectType.VEHICLE, ObjectType.PEDESTRIAN, ObjectType.CYCLIST], BACKGROUND_ORIGIN, 0.0, gap=BACKGROUND_GAP)

    def path_agent(self, otype, path: _Path, s, speed, is_sdc=False, lane=True) -> int:
        oid = self.next_id()
        self.tracks.append(_path_track(oid, otype, path, s, speed, _dims(self.rng, otype), is_sdc))
        if lane:
            self.features.append(_lane(self.next_feature(), path.polyline(float(s.min()) - 5.0, float(s.max()) + 5.0)))
        return oid


def _braking_profile(t: np.ndarray, v0: float, t_brake: float, decel: float) -> Tuple[np.ndarray, np.ndarray]:
    """Arc length and speed for cruise at ``v0`` then constant deceleration to rest."""
    t_stop = t_brake + v0 / decel
    tb = np.clip(t, t_brake, t_stop) - t_brake
    s = v0 * np.minimum(t, t_brake) + v0 * tb - 0.5 * decel * tb**2
    speed = np.where(t < t_brake, v0, np.where(t < t_stop, v0 - decel * (t - t_brake), 0.0))
    return s, speed


def _straight_cv(b: _Builder) -> None:
    theta0 = float(b.rng.uniform(-math.pi, math.pi))
    types = [ObjectType.VEHICLE] * 3 + [ObjectType.PEDESTRIAN] * 2 + [ObjectType.CYCLIST] * 2
    b.cv_lanes(types, (0.0, 0.0), theta0, first_sdc=True)


def _turning(b: _Builder) -> None:
    rng = b.rng
    t = _times(b.n)
    speed = float(rng.uniform(6.0, 10.0))
    radius = float(rng.uniform(10.0, 15.0))
    t_turn = float(rng.uniform(2.0, 3.0))  # seconds from start when the arc begins
    left = bool(rng.random() < 0.5)
    path = _Path((0.0, 0.0), 0.0).arc(radius, math.pi / 2 if left else -math.pi / 2)
    b.path_agent(ObjectType.VEHICLE, path, speed * (t - t_turn), np.full(b.n, speed), is_sdc=True)
    if left:
        # oncoming traffic crossing the turn
        phi = math.acos(1.0 - LANE_GAP * 0.7 / radius)
        t_cross = t_turn + radius * phi / speed
        x_cross = radius * math.sin(phi)
        v_on = float(rng.uniform(8.0, 12.0))
        t_on = t_cross + float(rng.uniform(1.5, 2.5))
        on_path = _Path((x_cross, LANE_GAP * 0.7), math.pi)
        b.path_agent(ObjectType.VEHICLE, on_path, v_on * (t - t_on), np.full(b.n, v_on))
    b.background()


def crossing_layout(seed: int) -> CrossingLayout:
    """Closed-form parameters the crossing_pair template uses for ``seed``."""
    rng = _rng(seed, Template.CROSSING_PAIR)
    t_first = float(rng.uniform(2.5, 3.5))
    gap = float(rng.uniform(1.0, 2.5))
    v_first = float(rng.uniform(6.0, 10.0))
    v_second = float(rng.uniform(6.0, 10.0))
    return CrossingLayout(1, 2, v_first, v_second, t_first, t_first + gap)


def _crossing_pair(b: _Builder, layout: CrossingLayout) -> None:
    t = _times(b.n)
    east = _Path((0.0, 0.0), 0.0)
    b.path_agent(ObjectType.VEHICLE, east, layout.speed_first * (t - layout.time_first),
                 np.full(b.n, layout.speed_first), is_sdc=True)
    # north through the origin, then a right turn well past the crossing
    north = _Path((0.0, 0.0), math.pi / 2).straight(8.0).arc(8.0, -math.pi / 2)
    b.path_agent(ObjectType.VEHICLE, north, layout.speed_second * (t - layout.time_second),
                 np.full(b.n, layout.speed_second))
    lane_a, lane_b = b.features[0].feature_id, b.features[1].feature_id
    for step in range(b.n):
        t_s = step * STEP_SECONDS
        state_b = SignalState.GO if t_s >= layout.time_first else SignalState.STOP
        b.frames.append(TrafficSignalFrame(step, ((lane_a, SignalState.GO), (lane_b, state_b))))
    b.background()


def _yield_pedestrian(b: _Builder) -> None:
    rng = b.rng
    t = _times(b.n)
    v0 = float(rng.uniform(8.0, 12.0))
    decel = float(rng.uniform(2.0, 4.0))
    t_stop = float(rng.uniform(4.0, 6.0))
    x_stop = -5.0
    t_brake = t_stop - v0 / decel
    s, speed = _braking_profile(t, v0, t_brake, decel)
    start = x_stop - (v0 * t_brake + 0.5 * v0**2 / decel)
    b.path_agent(ObjectType.VEHICLE, _Path((start, 0.0), 0.0), s, speed, is_sdc=True)
    v_ped = float(rng.uniform(1.0, 1.6))
    t_cross = t_stop + float(rng.uniform(0.5, 2.0))
    b.path_agent(ObjectType.PEDESTRIAN, _Path((0.0, 0.0), math.pi / 2), v_ped * (t - t_cross),
                 np.full(b.n, v_ped), lane=False)
    b.features.append(
        MapFeature(b.next_feature(), MapFeatureKind.CROSSWALK,
                   ((-2.0, -6.0, 0.0), (2.0, -6.0, 0.0), (2.0, 6.0, 0.0), (-2.0, 6.0, 0.0)))
    )
    b.background()


def _braking(b: _Builder) -> None:
    rng = b.rng
    t = _times(b.n)
    v0 = float(rng.uniform(12.0, 16.0))
    t_lead = float(rng.uniform(2.5, 3.5))
    a_lead = float(rng.uniform(4.5, 5.5))
    a_follow = a_lead - 0.5
    s_lead, v_lead = _braking_profile(t, v0, t_lead, a_lead)
    s_follow, v_follow = _braking_profile(t, v0, t_lead + 0.5, a_follow)
    road = _Path((0.0, 0.0), 0.0)
    b.path_agent(ObjectType.VEHICLE, road, s_follow, v_follow, is_sdc=True)
    b.path_agent(ObjectType.VEHICLE, road, s_lead + 25.0, v_lead, lane=False)
    b.background()


def _rng(seed: int, template: Template) -> np.random.Generator:
    return np.random.default_rng([seed, TEMPLATES.index(template.value)])


def generate_synthetic_scenario(seed: int, template: str, num_steps: int = WINDOW_STEPS) -> Scenario:
    """Build the scenario for ``(seed, template)``; identical inputs give identical output.

    The predict list comes from the regular selection rule and the
    interactive pair from the built-in interaction rules (left unset when no
    rule fires).
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if num_steps < WINDOW_STEPS:
        raise ValueError(f"num_steps must be at least {WINDOW_STEPS}")
    tmpl = Template(template)
    rng = _rng(seed, tmpl)
    b = _Builder(rng, num_steps)
    if tmpl is Template.CROSSING_PAIR:
        _crossing_pair(b, crossing_layout(seed))
    else:
        {
            Template.STRAIGHT_CV: _straight_cv,
            Template.TURNING: _turning,
            Template.YIELD_PEDESTRIAN: _yield_pedestrian,
            Template.BRAKING: _braking,
        }[tmpl](b)
    meta = _rng(seed, tmpl).integers(0, 10**6, size=3)
    scenario = Scenario(
        scenario_id=f"{tmpl.value}-{seed:06d}",
        capture_date=f"2019-{1 + int(meta[0]) % 12:02d}-{1 + int(meta[1]) % 28:02d}",
        vehicle_id=f"veh{int(meta[2]) % 64:03d}",
        current_index=b.cur,
        tracks=tuple(b.tracks),
        map_features=tuple(b.features),
        signal_frames=tuple(b.frames),
    )
    scenario = dataclasses.replace(scenario, predict_list=select_predict_objects(scenario))
    scenario = annotate_interactive_pair(scenario)
    return validate_scenario(scenario)


def generate_corpus(templates: Sequence[str], seeds: Sequence[int], num_steps: int = WINDOW_STEPS) -> List[Scenario]:
    """One scenario per (seed, template), seeds outermost."""
    return [generate_synthetic_scenario(s, t, num_steps) for s in seeds for t in templates]
