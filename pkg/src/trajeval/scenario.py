"""Scenario and prediction records, their JSON-lines format, and ground-truth slicing."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from trajeval.geometry import Pose2, to_agent_frame

STEP_SECONDS = 0.1
HISTORY_STEPS = 10
FUTURE_STEPS = 80
WINDOW_STEPS = HISTORY_STEPS + 1 + FUTURE_STEPS


class ScenarioError(ValueError):
    """Base class for scenario and prediction format errors.

    ``path`` is a dotted/indexed location of the offending field, e.g.
    ``tracks[2].states[14].heading``.
    """

    kind = "error"

    def __init__(self, message: str, path: str = ""):
        self.path = path
        self.message = message
        super().__init__(f"{self.kind} at {path or '<record>'}: {message}")


class MalformedRecordError(ScenarioError):
    kind = "malformed-syntax"


class SchemaError(ScenarioError):
    kind = "schema-violation"


class InvariantError(ScenarioError):
    kind = "invariant-violation"


class AgentInvalidError(ValueError):
    """An agent has no valid state at the prediction time."""


class ObjectType(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    CYCLIST = "cyclist"


class MapFeatureKind(str, Enum):
    LANE_CENTER = "lane_center"
    LANE_BOUNDARY = "lane_boundary"
    ROAD_EDGE = "road_edge"
    STOP_SIGN = "stop_sign"
    CROSSWALK = "crosswalk"
    SPEED_BUMP = "speed_bump"


class SignalState(str, Enum):
    UNKNOWN = "unknown"
    STOP = "stop"
    CAUTION = "caution"
    GO = "go"
    ARROW_STOP = "arrow_stop"
    ARROW_GO = "arrow_go"
    FLASHING_STOP = "flashing_stop"
    FLASHING_CAUTION = "flashing_caution"

    @classmethod
    def lenient(cls, value: str) -> "SignalState":
        try:
            return cls(value)
        except ValueError:
            return cls.UNKNOWN


class Difficulty(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


# Lane boundary styles; map attributes are free-form strings, these are the
# values the synthetic generator and docs use.
BOUNDARY_STYLES = (
    "unknown",
    "broken_single_white",
    "solid_single_white",
    "solid_double_white",
    "broken_single_yellow",
    "broken_double_yellow",
    "solid_single_yellow",
    "solid_double_yellow",
    "passing_double_yellow",
)

INTERACTION_KINDS = (
    "merge",
    "lane_change",
    "unprotected_turn",
    "intersection_left_turn",
    "intersection_right_turn",
    "pedestrian_vehicle",
    "cyclist_vehicle",
    "close_proximity",
    "high_acceleration",
)


@dataclass(frozen=True)
class ObjectState:
    x: float
    y: float
    z: float
    heading: float
    vx: float
    vy: float
    length: float
    width: float
    height: float
    valid: bool

    @property
    def position(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @property
    def velocity(self) -> Tuple[float, float]:
        return (self.vx, self.vy)

    @property
    def box_dims(self) -> Tuple[float, float, float]:
        return (self.length, self.width, self.height)

    @classmethod
    def invalid(cls) -> "ObjectState":
        return cls(-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -1.0, -1.0, -1.0, False)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Track:
    object_id: int
    object_type: ObjectType
    states: Tuple[ObjectState, ...]
    is_sdc: bool = False

    def __len__(self) -> int:
        return len(self.states)

    @cached_property
    def xy(self) -> np.ndarray:
        """(T, 2) planar positions."""
        return _readonly(np.array([(s.x, s.y) for s in self.states], dtype=float).reshape(-1, 2))

    @cached_property
    def velocity(self) -> np.ndarray:
        return _readonly(np.array([(s.vx, s.vy) for s in self.states], dtype=float).reshape(-1, 2))

    @cached_property
    def heading(self) -> np.ndarray:
        return _readonly(np.array([s.heading for s in self.states], dtype=float))

    @cached_property
    def valid(self) -> np.ndarray:
        return _readonly(np.array([s.valid for s in self.states], dtype=bool))


@dataclass(frozen=True)
class MapFeature:
    feature_id: int
    kind: MapFeatureKind
    geometry: Tuple[Tuple[float, float, float], ...]
    attributes: Tuple[Tuple[str, str], ...] = ()

    @cached_property
    def xy(self) -> np.ndarray:
        return _readonly(np.array([(p[0], p[1]) for p in self.geometry], dtype=float).reshape(-1, 2))


@dataclass(frozen=True)
class TrafficSignalFrame:
    timestep: int
    lane_states: Tuple[Tuple[int, SignalState], ...]


@dataclass(frozen=True)
class PredictEntry:
    object_id: int
    difficulty: Difficulty


@dataclass(frozen=True)
class InteractivePair:
    first: int
    second: int
    kind: str

    @property
    def ids(self) -> Tuple[int, int]:
        return (self.first, self.second)


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    capture_date: str
    vehicle_id: str
    current_index: int
    tracks: Tuple[Track, ...]
    map_features: Tuple[MapFeature, ...] = ()
    signal_frames: Tuple[TrafficSignalFrame, ...] = ()
    predict_list: Tuple[PredictEntry, ...] = ()
    interactive_pair: Optional[InteractivePair] = None

    @property
    def num_steps(self) -> int:
        return len(self.tracks[0].states) if self.tracks else 0

    @cached_property
    def track_by_id(self) -> Dict[int, Track]:
        return {t.object_id: t for t in self.tracks}

    def track(self, object_id: int) -> Track:
        try:
            return self.track_by_id[object_id]
        except KeyError:
            raise KeyError(f"scenario {self.scenario_id} has no track {object_id}") from None

    def lane_centers(self) -> List[MapFeature]:
        return [f for f in self.map_features if f.kind is MapFeatureKind.LANE_CENTER]

    def sdc_track(self) -> Optional[Track]:
        for t in self.tracks:
            if t.is_sdc:
                return t
        return None


class JointPredictionSet:
    """K scored joint hypotheses over A agents and T future steps.

    ``waypoints`` has shape (K, A, T, 2); ``confidences`` has shape (K,).
    A single-agent set (A == 1) is a marginal prediction.
    """

    __slots__ = ("agent_ids", "confidences", "waypoints", "scenario_id")

    def __init__(self, agent_ids: Sequence[int], confidences, waypoints, scenario_id: str = ""):
        ids = tuple(int(a) for a in agent_ids)
        conf = np.array(confidences, dtype=float).reshape(-1)
        wp = np.array(waypoints, dtype=float)
        if len(ids) == 0:
            raise InvariantError("at least one agent required", "agent_ids")
        if len(set(ids)) != len(ids):
            raise InvariantError("agent ids must be distinct", "agent_ids")
        if conf.size == 0:
            raise InvariantError("at least one hypothesis required", "hypotheses")
        if wp.ndim != 4 or wp.shape[0] != conf.size or wp.shape[1] != len(ids) or wp.shape[3] != 2:
            raise InvariantError(
                f"waypoints shape {wp.shape} does not match K={conf.size}, A={len(ids)}", "hypotheses"
            )
        if not np.all(np.isfinite(conf)) or np.any(conf < 0):
            raise InvariantError("confidences must be finite and non-negative", "hypotheses")
        if not np.all(np.isfinite(wp)):
            raise InvariantError("waypoints must be finite", "hypotheses")
        object.__setattr__(self, "agent_ids", ids)
        object.__setattr__(self, "confidences", _readonly(conf))
        object.__setattr__(self, "waypoints", _readonly(wp))
        object.__setattr__(self, "scenario_id", scenario_id)

    def __setattr__(self, name, value):
        raise AttributeError("JointPredictionSet is immutable")

    @property
    def num_hypotheses(self) -> int:
        return int(self.confidences.size)

    @property
    def num_agents(self) -> int:
        return len(self.agent_ids)

    @property
    def num_steps(self) -> int:
        return int(self.waypoints.shape[2])

    def top_index(self) -> int:
        """Index of the most confident hypothesis (lowest index on ties)."""
        return int(np.argmax(self.confidences))

    def head(self, k: int) -> "JointPredictionSet":
        """The first ``k`` hypotheses."""
        return JointPredictionSet(self.agent_ids, self.confidences[:k], self.waypoints[:k], self.scenario_id)

    def for_agent(self, agent_id: int) -> "JointPredictionSet":
        """Marginal view of one member agent, keeping every hypothesis."""
        a = self.agent_ids.index(agent_id)
        return JointPredictionSet((agent_id,), self.confidences, self.waypoints[:, a : a + 1], self.scenario_id)

    def reordered(self, agent_ids: Sequence[int]) -> "JointPredictionSet":
        idx = [self.agent_ids.index(a) for a in agent_ids]
        return JointPredictionSet(agent_ids, self.confidences, self.waypoints[:, idx], self.scenario_id)

    def __eq__(self, other) -> bool:
        if not isinstance(other, JointPredictionSet):
            return NotImplemented
        return (
            self.agent_ids == other.agent_ids
            and self.scenario_id == other.scenario_id
            and np.array_equal(self.confidences, other.confidences)
            and np.array_equal(self.waypoints, other.waypoints)
        )

    def __repr__(self) -> str:
        return (
            f"JointPredictionSet(scenario_id={self.scenario_id!r}, agent_ids={self.agent_ids}, "
            f"K={self.num_hypotheses}, T={self.num_steps})"
        )


@dataclass(frozen=True)
class GroundTruthSlice:
    """Future ground truth for A agents, plus their state at prediction time.

    ``positions`` is (A, T, 2) and ``valid`` is (A, T); index 0 is the first
    future step. ``speeds`` holds agent-frame (v_x, v_y) at prediction time.
    """

    agent_ids: Tuple[int, ...]
    positions: np.ndarray
    valid: np.ndarray
    ref_poses: Tuple[Pose2, ...]
    speeds: np.ndarray
    box_dims: np.ndarray
    object_types: Tuple[ObjectType, ...] = ()

    @property
    def num_agents(self) -> int:
        return len(self.agent_ids)

    @property
    def num_steps(self) -> int:
        return int(self.positions.shape[1])


def extract_ground_truth(scenario: Scenario, agent_ids: Sequence[int], horizon_steps: int) -> GroundTruthSlice:
    """Slice the future of ``agent_ids`` after ``scenario.current_index``."""
    cur = scenario.current_index
    if horizon_steps < 1 or cur + horizon_steps > scenario.num_steps - 1:
        raise ValueError(
            f"horizon {horizon_steps} exceeds the {scenario.num_steps - 1 - cur} steps after index {cur}"
        )
    positions, valid, poses, speeds, dims, types = [], [], [], [], [], []
    for agent_id in agent_ids:
        track = scenario.track(agent_id)
        state = track.states[cur]
        if not state.valid:
            raise AgentInvalidError(f"agent {agent_id} is not valid at index {cur} of {scenario.scenario_id}")
        pose = Pose2(state.x, state.y, state.heading)
        positions.append(track.xy[cur + 1 : cur + 1 + horizon_steps])
        valid.append(track.valid[cur + 1 : cur + 1 + horizon_steps])
        poses.append(pose)
        speeds.append(to_agent_frame(np.array([state.vx, state.vy]), pose))
        dims.append((state.length, state.width, state.height))
        types.append(track.object_type)
    return GroundTruthSlice(
        agent_ids=tuple(int(a) for a in agent_ids),
        positions=_readonly(np.array(positions, dtype=float).reshape(len(agent_ids), horizon_steps, 2)),
        valid=_readonly(np.array(valid, dtype=bool).reshape(len(agent_ids), horizon_steps)),
        ref_poses=tuple(poses),
        speeds=_readonly(np.array(speeds, dtype=float).reshape(len(agent_ids), 2)),
        box_dims=_readonly(np.array(dims, dtype=float).reshape(len(agent_ids), 3)),
        object_types=tuple(types),
    )


# --------------------------------------------------------------------------
# Validation


def validate_scenario(s: Scenario) -> Scenario:
    """Check every structural invariant, raising :class:`InvariantError`."""
    if not isinstance(s.current_index, int) or s.current_index < 0:
        raise InvariantError("must be a non-negative integer", "current_index")
    ids = set()
    n = None
    for i, track in enumerate(s.tracks):
        path = f"tracks[{i}]"
        if track.object_id in ids:
            raise InvariantError(f"duplicate object id {track.object_id}", f"{path}.id")
        ids.add(track.object_id)
        if n is None:
            n = len(track.states)
        elif len(track.states) != n:
            raise InvariantError(f"track has {len(track.states)} states, expected {n}", f"{path}.states")
        if not any(st.valid for st in track.states):
            raise InvariantError("track has no valid state", f"{path}.states")
        for j, st in enumerate(track.states):
            spath = f"{path}.states[{j}]"
            values = (st.x, st.y, st.z, st.heading, st.vx, st.vy, st.length, st.width, st.height)
            if not all(math.isfinite(v) for v in values):
                raise InvariantError("non-finite value", spath)
            if st.valid:
                if not (st.length > 0 and st.width > 0 and st.height > 0):
                    raise InvariantError("box dimensions must be positive on a valid state", spath)
                if not (-math.pi < st.heading <= math.pi):
                    raise InvariantError(f"heading {st.heading} outside (-pi, pi]", f"{spath}.heading")
    if s.tracks and not s.current_index < n:
        raise InvariantError(f"index {s.current_index} outside track length {n}", "current_index")
    lane_ids = set()
    feature_ids = set()
    for i, feat in enumerate(s.map_features):
        if feat.feature_id in feature_ids:
            raise InvariantError(f"duplicate feature id {feat.feature_id}", f"map_features[{i}].id")
        feature_ids.add(feat.feature_id)
        if not feat.geometry:
            raise InvariantError("empty geometry", f"map_features[{i}].geometry")
        for j, p in enumerate(feat.geometry):
            if not all(math.isfinite(v) for v in p):
                raise InvariantError("non-finite vertex", f"map_features[{i}].geometry[{j}]")
        if feat.kind is MapFeatureKind.LANE_CENTER:
            lane_ids.add(feat.feature_id)
    for i, frame in enumerate(s.signal_frames):
        for j, (lane, _) in enumerate(frame.lane_states):
            if lane not in lane_ids:
                raise InvariantError(f"unknown lane {lane}", f"signal_frames[{i}].states[{j}]")
    seen = set()
    for i, entry in enumerate(s.predict_list):
        if entry.object_id not in ids:
            raise InvariantError(f"object {entry.object_id} has no track", f"predict_list[{i}]")
        if entry.object_id in seen:
            raise InvariantError(f"object {entry.object_id} listed twice", f"predict_list[{i}]")
        seen.add(entry.object_id)
    pair = s.interactive_pair
    if pair is not None:
        if pair.first == pair.second:
            raise InvariantError("interactive pair ids must differ", "interactive_pair")
        for obj in pair.ids:
            if obj not in ids:
                raise InvariantError(f"object {obj} has no track", "interactive_pair")
        if pair.kind not in INTERACTION_KINDS:
            raise InvariantError(f"unknown interaction kind {pair.kind!r}", "interactive_pair.kind")
    return s


# --------------------------------------------------------------------------
# Parsing


def _reject_constant(name: str):
    raise MalformedRecordError(f"non-finite literal {name}")


def _load(line: str) -> Any:
    try:
        return json.loads(line, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(exc.msg + f" (char {exc.pos})") from None


def _get(obj: Any, key: str, path: str) -> Any:
    if not isinstance(obj, dict):
        raise SchemaError("expected an object", path)
    if key not in obj:
        raise SchemaError(f"missing field {key!r}", path)
    return obj[key]


def _num(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {type(value).__name__}", path)
    return float(value)


def _int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"expected an integer, got {type(value).__name__}", path)
    return value


def _str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"expected a string, got {type(value).__name__}", path)
    return value


def _list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaError(f"expected a list, got {type(value).__name__}", path)
    return value


def _enum(cls, value: Any, path: str):
    try:
        return cls(_str(value, path))
    except ValueError:
        raise SchemaError(f"unknown value {value!r}", path) from None


_STATE_KEYS = ("x", "y", "z", "heading", "vx", "vy", "length", "width", "height")


def _parse_state(obj: Any, path: str) -> ObjectState:
    values = [_num(_get(obj, k, path), f"{path}.{k}") for k in _STATE_KEYS]
    valid = _get(obj, "valid", path)
    if not isinstance(valid, bool):
        raise SchemaError("expected a boolean", f"{path}.valid")
    return ObjectState(*values, valid=valid)


def _parse_point(value: Any, path: str) -> Tuple[float, float, float]:
    coords = _list(value, path)
    if len(coords) not in (2, 3):
        raise SchemaError(f"expected 2 or 3 coordinates, got {len(coords)}", path)
    pts = [_num(c, f"{path}[{i}]") for i, c in enumerate(coords)]
    if len(pts) == 2:
        pts.append(0.0)
    return (pts[0], pts[1], pts[2])


def _parse_track(obj: Any, path: str) -> Track:
    states = _list(_get(obj, "states", path), f"{path}.states")
    sdc = obj.get("sdc", False)
    if not isinstance(sdc, bool):
        raise SchemaError("expected a boolean", f"{path}.sdc")
    return Track(
        object_id=_int(_get(obj, "id", path), f"{path}.id"),
        object_type=_enum(ObjectType, _get(obj, "type", path), f"{path}.type"),
        states=tuple(_parse_state(st, f"{path}.states[{j}]") for j, st in enumerate(states)),
        is_sdc=sdc,
    )


def _parse_feature(obj: Any, path: str) -> MapFeature:
    geometry = _list(_get(obj, "geometry", path), f"{path}.geometry")
    attrs = obj.get("attributes", {})
    if not isinstance(attrs, dict):
        raise SchemaError("expected an object", f"{path}.attributes")
    return MapFeature(
        feature_id=_int(_get(obj, "id", path), f"{path}.id"),
        kind=_enum(MapFeatureKind, _get(obj, "kind", path), f"{path}.kind"),
        geometry=tuple(_parse_point(p, f"{path}.geometry[{j}]") for j, p in enumerate(geometry)),
        attributes=tuple(sorted((str(k), _str(v, f"{path}.attributes.{k}")) for k, v in attrs.items())),
    )


def _parse_signal_frame(obj: Any, path: str) -> TrafficSignalFrame:
    pairs = []
    for j, item in enumerate(_list(_get(obj, "states", path), f"{path}.states")):
        item = _list(item, f"{path}.states[{j}]")
        if len(item) != 2:
            raise SchemaError("expected [lane_id, state]", f"{path}.states[{j}]")
        lane = _int(item[0], f"{path}.states[{j}][0]")
        pairs.append((lane, SignalState.lenient(_str(item[1], f"{path}.states[{j}][1]"))))
    return TrafficSignalFrame(
        timestep=_int(_get(obj, "timestep", path), f"{path}.timestep"),
        lane_states=tuple(sorted(pairs)),
    )


def scenario_from_dict(obj: Any) -> Scenario:
    """Build and validate a :class:`Scenario` from a decoded record."""
    if not isinstance(obj, dict):
        raise SchemaError("record must be an object")
    predict = []
    for i, item in enumerate(_list(_get(obj, "predict_list", ""), "predict_list")):
        predict.append(
            PredictEntry(
                _int(_get(item, "id", f"predict_list[{i}]"), f"predict_list[{i}].id"),
                _enum(Difficulty, _get(item, "difficulty", f"predict_list[{i}]"), f"predict_list[{i}].difficulty"),
            )
        )
    pair = None
    raw_pair = obj.get("interactive_pair")
    if raw_pair is not None:
        ids = _list(_get(raw_pair, "ids", "interactive_pair"), "interactive_pair.ids")
        if len(ids) != 2:
            raise SchemaError(f"expected 2 ids, got {len(ids)}", "interactive_pair.ids")
        pair = InteractivePair(
            _int(ids[0], "interactive_pair.ids[0]"),
            _int(ids[1], "interactive_pair.ids[1]"),
            _str(_get(raw_pair, "kind", "interactive_pair"), "interactive_pair.kind"),
        )
    scenario = Scenario(
        scenario_id=_str(_get(obj, "scenario_id", ""), "scenario_id"),
        capture_date=_str(_get(obj, "capture_date", ""), "capture_date"),
        vehicle_id=_str(_get(obj, "vehicle_id", ""), "vehicle_id"),
        current_index=_int(_get(obj, "current_index", ""), "current_index"),
        tracks=tuple(
            _parse_track(t, f"tracks[{i}]") for i, t in enumerate(_list(_get(obj, "tracks", ""), "tracks"))
        ),
        map_features=tuple(
            _parse_feature(f, f"map_features[{i}]")
            for i, f in enumerate(_list(_get(obj, "map_features", ""), "map_features"))
        ),
        signal_frames=tuple(
            _parse_signal_frame(f, f"signal_frames[{i}]")
            for i, f in enumerate(_list(_get(obj, "signal_frames", ""), "signal_frames"))
        ),
        predict_list=tuple(predict),
        interactive_pair=pair,
    )
    return validate_scenario(scenario)


def parse_scenario(line: str) -> Scenario:
    """Parse one line of a scenario file."""
    return scenario_from_dict(_load(line))


# --------------------------------------------------------------------------
# Serialization


def _state_dict(st: ObjectState) -> Dict[str, Any]:
    return {
        "x": float(st.x),
        "y": float(st.y),
        "z": float(st.z),
        "heading": float(st.heading),
        "vx": float(st.vx),
        "vy": float(st.vy),
        "length": float(st.length),
        "width": float(st.width),
        "height": float(st.height),
        "valid": bool(st.valid),
    }


def scenario_to_dict(s: Scenario) -> Dict[str, Any]:
    tracks = []
    for t in s.tracks:
        rec: Dict[str, Any] = {"id": t.object_id, "type": t.object_type.value}
        if t.is_sdc:
            rec["sdc"] = True
        rec["states"] = [_state_dict(st) for st in t.states]
        tracks.append(rec)
    out: Dict[str, Any] = {
        "scenario_id": s.scenario_id,
        "capture_date": s.capture_date,
        "vehicle_id": s.vehicle_id,
        "current_index": s.current_index,
        "tracks": tracks,
        "map_features": [
            {
                "id": f.feature_id,
                "kind": f.kind.value,
                "geometry": [[float(v) for v in p] for p in f.geometry],
                "attributes": dict(f.attributes),
            }
            for f in s.map_features
        ],
        "signal_frames": [
            {"timestep": fr.timestep, "states": [[lane, st.value] for lane, st in fr.lane_states]}
            for fr in s.signal_frames
        ],
        "predict_list": [{"id": e.object_id, "difficulty": e.difficulty.value} for e in s.predict_list],
    }
    if s.interactive_pair is not None:
        out["interactive_pair"] = {"ids": list(s.interactive_pair.ids), "kind": s.interactive_pair.kind}
    return out


def _dumps(obj: Any) -> str:
    # float repr is the shortest string that round-trips, so output is canonical
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def serialize_scenario(s: Scenario) -> str:
    """Canonical single-line text for a valid scenario (no trailing newline)."""
    validate_scenario(s)
    return _dumps(scenario_to_dict(s))


def read_scenarios(path: str) -> Iterator[Scenario]:
    """Yield scenarios from a file, skipping blank lines.

    Errors carry the 1-based line number in their path.
    """
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield parse_scenario(line)
            except ScenarioError as exc:
                raise type(exc)(exc.message, f"line {lineno}: {exc.path}") from None


def write_scenarios(path: str, scenarios: Iterable[Scenario]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in scenarios:
            fh.write(serialize_scenario(s) + "\n")


# --------------------------------------------------------------------------
# Prediction records


def parse_prediction(line: str) -> JointPredictionSet:
    """Parse one prediction record into a :class:`JointPredictionSet`."""
    obj = _load(line)
    scenario_id = _str(_get(obj, "scenario_id", ""), "scenario_id")
    agent_ids = [_int(a, f"agent_ids[{i}]") for i, a in enumerate(_list(_get(obj, "agent_ids", ""), "agent_ids"))]
    confidences, waypoints = [], []
    for k, hyp in enumerate(_list(_get(obj, "hypotheses", ""), "hypotheses")):
        path = f"hypotheses[{k}]"
        confidences.append(_num(_get(hyp, "confidence", path), f"{path}.confidence"))
        per_agent = _list(_get(hyp, "waypoints", path), f"{path}.waypoints")
        if len(per_agent) != len(agent_ids):
            raise SchemaError(f"expected {len(agent_ids)} agents, got {len(per_agent)}", f"{path}.waypoints")
        rows = []
        for a, traj in enumerate(per_agent):
            pts = []
            for t, p in enumerate(_list(traj, f"{path}.waypoints[{a}]")):
                p = _list(p, f"{path}.waypoints[{a}][{t}]")
                if len(p) != 2:
                    raise SchemaError("expected [x, y]", f"{path}.waypoints[{a}][{t}]")
                pts.append((_num(p[0], f"{path}.waypoints[{a}][{t}][0]"), _num(p[1], f"{path}.waypoints[{a}][{t}][1]")))
            rows.append(pts)
        if len({len(r) for r in rows}) > 1:
            raise InvariantError("agents have different step counts", f"{path}.waypoints")
        waypoints.append(rows)
    if not confidences:
        raise InvariantError("at least one hypothesis required", "hypotheses")
    if len({len(w[0]) if w else 0 for w in waypoints}) > 1:
        raise InvariantError("hypotheses have different step counts", "hypotheses")
    if waypoints[0] and not waypoints[0][0]:
        raise InvariantError("hypotheses need at least one waypoint", "hypotheses")
    return JointPredictionSet(agent_ids, confidences, np.array(waypoints, dtype=float), scenario_id)


def serialize_prediction(p: JointPredictionSet) -> str:
    return _dumps(
        {
            "scenario_id": p.scenario_id,
            "agent_ids": list(p.agent_ids),
            "hypotheses": [
                {"confidence": float(c), "waypoints": p.waypoints[k].tolist()}
                for k, c in enumerate(p.confidences)
            ],
        }
    )


def read_predictions(path: str) -> List[JointPredictionSet]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(parse_prediction(line))
            except ScenarioError as exc:
                raise type(exc)(exc.message, f"line {lineno}: {exc.path}") from None
    return out


def write_predictions(path: str, predictions: Iterable[JointPredictionSet]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(serialize_prediction(p) + "\n")
