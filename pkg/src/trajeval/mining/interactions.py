"""Built-in interaction rules and interactive-pair annotation.

Scenario kinds are heuristic compositions of the atomic predicates; every
gate constant lives in :class:`RulesConfig`.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np

from trajeval.geometry import normalize_angle
from trajeval.mining.predicates import accelerations, close_proximity, crossed_paths, detect_lane_change
from trajeval.scenario import INTERACTION_KINDS, STEP_SECONDS, InteractivePair, ObjectType, Scenario, Track


@dataclass(frozen=True)
class InteractionLabel:
    first: int
    second: int
    kind: str
    time: float

    def __post_init__(self) -> None:
        if self.first == self.second:
            raise ValueError("an interaction needs two distinct objects")
        if self.kind not in INTERACTION_KINDS:
            raise ValueError(f"unknown interaction kind {self.kind!r}")


@dataclass(frozen=True)
class RulesConfig:
    target_time: float = 10.0  # seconds from scenario start
    max_gap: float = 3.0  # seconds between arrivals at a crossing
    merge_min_heading: float = math.radians(5.0)
    merge_max_heading: float = math.radians(35.0)
    turn_angle: float = math.radians(45.0)  # net heading change of a turning agent
    oncoming_angle: float = math.radians(135.0)  # initial heading difference of oncoming traffic
    crossing_min_heading: float = math.radians(30.0)
    vru_distance: float = 6.0  # meters, pedestrian/cyclist to vehicle
    close_distance: float = 3.0  # meters, center to center
    partner_distance: float = 20.0  # meters, for single-agent events
    min_accel: float = 3.0  # m/s^2
    step_seconds: float = STEP_SECONDS


Candidate = Tuple[int, int, float]


def _net_turn(track: Track) -> float:
    idx = np.flatnonzero(track.valid)
    if len(idx) < 2:
        return 0.0
    return normalize_angle(float(track.heading[idx[-1]] - track.heading[idx[0]]))


def _initial_heading(track: Track) -> float:
    return float(track.heading[np.flatnonzero(track.valid)[0]])


def _nearest_time(times, target: float) -> float:
    return min(times, key=lambda t: (abs(t - target), t))


def _crossing_time(c) -> float:
    return 0.5 * (c.time_a + c.time_b)


def _ordered(a: Track, b: Track, c) -> Tuple[int, int]:
    """Order a crossing pair by arrival at the crossing point."""
    return (a.object_id, b.object_id) if (c.time_a, a.object_id) <= (c.time_b, b.object_id) else (b.object_id, a.object_id)


def _partner(scenario: Scenario, agent: Track, step: int, radius: float) -> Optional[int]:
    best = None
    for other in scenario.tracks:
        if other.object_id == agent.object_id or not other.valid[step]:
            continue
        d = float(np.hypot(*(other.xy[step] - agent.xy[step])))
        if d <= radius and (best is None or (d, other.object_id) < best):
            best = (d, other.object_id)
    return None if best is None else best[1]


class _Rules:
    def __init__(self, scenario: Scenario, cfg: RulesConfig):
        self.s = scenario
        self.cfg = cfg
        self.vehicles = [t for t in scenario.tracks if t.object_type is ObjectType.VEHICLE]
        self._crossings = {}

    def crossing(self, a: Track, b: Track):
        key = (a.object_id, b.object_id)
        if key not in self._crossings:
            c = crossed_paths(a, b, self.cfg.step_seconds)
            self._crossings[key] = c
            self._crossings[key[::-1]] = c
        return self._crossings[key]

    def merge(self) -> Iterator[Candidate]:
        for a, b in itertools.combinations(self.vehicles, 2):
            c = self.crossing(a, b)
            if c and c.time_gap <= self.cfg.max_gap and self.cfg.merge_min_heading <= c.heading_diff <= self.cfg.merge_max_heading:
                yield (*_ordered(a, b, c), _crossing_time(c))

    def lane_change(self) -> Iterator[Candidate]:
        lanes = self.s.lane_centers()
        if not lanes:
            return
        for a in self.vehicles:
            for ev in detect_lane_change(a, lanes, step_seconds=self.cfg.step_seconds):
                partner = _partner(self.s, a, ev.step, self.cfg.partner_distance)
                if partner is not None:
                    yield (a.object_id, partner, ev.time)

    def _turns(self, sign: int, oncoming_only: bool) -> Iterator[Candidate]:
        for a in self.vehicles:
            if sign * _net_turn(a) < self.cfg.turn_angle:
                continue
            for b in self.vehicles:
                if b is a:
                    continue
                if oncoming_only:
                    gap = abs(normalize_angle(_initial_heading(a) - _initial_heading(b)))
                    if gap < self.cfg.oncoming_angle:
                        continue
                c = self.crossing(a, b)
                if c and c.time_gap <= self.cfg.max_gap and c.heading_diff >= self.cfg.crossing_min_heading:
                    yield (a.object_id, b.object_id, _crossing_time(c))

    def unprotected_turn(self) -> Iterator[Candidate]:
        return self._turns(+1, oncoming_only=True)

    def intersection_left_turn(self) -> Iterator[Candidate]:
        return self._turns(+1, oncoming_only=False)

    def intersection_right_turn(self) -> Iterator[Candidate]:
        return self._turns(-1, oncoming_only=False)

    def _vru(self, vru_type: ObjectType) -> Iterator[Candidate]:
        dt = self.cfg.step_seconds
        for v in self.vehicles:
            for p in self.s.tracks:
                if p.object_type is not vru_type:
                    continue
                steps = close_proximity(v, p, self.cfg.vru_distance)
                if steps:
                    yield (v.object_id, p.object_id, _nearest_time([s * dt for s in steps], self.cfg.target_time))

    def pedestrian_vehicle(self) -> Iterator[Candidate]:
        return self._vru(ObjectType.PEDESTRIAN)

    def cyclist_vehicle(self) -> Iterator[Candidate]:
        return self._vru(ObjectType.CYCLIST)

    def close_proximity(self) -> Iterator[Candidate]:
        dt = self.cfg.step_seconds
        for a, b in itertools.combinations(self.s.tracks, 2):
            steps = close_proximity(a, b, self.cfg.close_distance)
            if steps:
                yield (a.object_id, b.object_id, _nearest_time([s * dt for s in steps], self.cfg.target_time))

    def high_acceleration(self) -> Iterator[Candidate]:
        dt = self.cfg.step_seconds
        for a in self.s.tracks:
            acc = accelerations(a, dt)
            with np.errstate(invalid="ignore"):
                steps = np.flatnonzero(acc >= self.cfg.min_accel)
            ranked = sorted(steps, key=lambda s: (abs(s * dt - self.cfg.target_time), s))
            for s in ranked:
                partner = _partner(self.s, a, int(s), self.cfg.partner_distance)
                if partner is not None:
                    yield (a.object_id, partner, float(s * dt))
                    break


def mine_interactive_pairs(scenario: Scenario, cfg: RulesConfig = RulesConfig()) -> List[InteractionLabel]:
    """Run every built-in rule; keep, per kind, the pair whose event is nearest ``cfg.target_time``.

    Labels come back ordered by distance from the target time, then by kind.
    """
    rules = _Rules(scenario, cfg)
    labels = []
    for kind in INTERACTION_KINDS:
        candidates = list(getattr(rules, kind)())
        if not candidates:
            continue
        a, b, t = min(candidates, key=lambda c: (abs(c[2] - cfg.target_time), c[2], c[0], c[1]))
        labels.append(InteractionLabel(a, b, kind, t))
    order = {k: i for i, k in enumerate(INTERACTION_KINDS)}
    return sorted(labels, key=lambda l: (abs(l.time - cfg.target_time), order[l.kind]))


def annotate_interactive_pair(scenario: Scenario, cfg: RulesConfig = RulesConfig()) -> Scenario:
    """Copy of ``scenario`` with its interactive pair set to the best mined label (if any)."""
    labels = mine_interactive_pairs(scenario, cfg)
    if not labels:
        return scenario
    best = labels[0]
    return dataclasses.replace(scenario, interactive_pair=InteractivePair(best.first, best.second, best.kind))
