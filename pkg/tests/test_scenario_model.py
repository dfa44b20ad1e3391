import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import line_track, make_scenario, minimal_record, state_dict
from trajeval.geometry import Pose2
from trajeval.scenario import (
    AgentInvalidError,
    InvariantError,
    JointPredictionSet,
    MalformedRecordError,
    ObjectState,
    SchemaError,
    SignalState,
    extract_ground_truth,
    parse_prediction,
    parse_scenario,
    read_scenarios,
    serialize_prediction,
    serialize_scenario,
    write_scenarios,
)
from trajeval.synthetic import TEMPLATES, generate_synthetic_scenario


def test_minimal_record_parses():
    s = parse_scenario(json.dumps(minimal_record()))
    assert len(s.tracks) == 1
    assert s.current_index == 10
    assert s.num_steps == 91
    assert s.map_features == ()
    assert s.interactive_pair is None


def test_unequal_track_lengths_is_invariant_error():
    rec = minimal_record()
    rec["tracks"].append({"id": 2, "type": "pedestrian", "states": [state_dict()] * 90})
    with pytest.raises(InvariantError) as exc:
        parse_scenario(json.dumps(rec))
    assert exc.value.path == "tracks[1].states"


@pytest.mark.parametrize(
    "text, error",
    [
        ("{not json", MalformedRecordError),
        ('{"x": NaN}', MalformedRecordError),
        ("[]", SchemaError),
    ],
)
def test_malformed_and_schema_errors(text, error):
    with pytest.raises(error):
        parse_scenario(text)


def test_missing_field_names_path():
    rec = minimal_record()
    del rec["tracks"][0]["states"][3]["heading"]
    with pytest.raises(SchemaError) as exc:
        parse_scenario(json.dumps(rec))
    assert exc.value.path == "tracks[0].states[3]"
    assert "heading" in str(exc.value)


def test_wrong_type_names_path():
    rec = minimal_record()
    rec["tracks"][0]["states"][5]["vx"] = "fast"
    with pytest.raises(SchemaError) as exc:
        parse_scenario(json.dumps(rec))
    assert exc.value.path == "tracks[0].states[5].vx"


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda r: r["tracks"][0]["states"][0].update(heading=4.0), "tracks[0].states[0].heading"),
        (lambda r: r["tracks"][0]["states"][0].update(length=0.0), "tracks[0].states[0]"),
        (lambda r: r.update(current_index=91), "current_index"),
        (lambda r: r.update(predict_list=[{"id": 9, "difficulty": "easy"}]), "predict_list[0]"),
        (lambda r: r.update(interactive_pair={"ids": [1, 1], "kind": "merge"}), "interactive_pair"),
        (lambda r: r["tracks"][0].update(states=[state_dict(valid=False)] * 91), "tracks[0].states"),
    ],
)
def test_invariant_errors_name_the_path(mutate, path):
    rec = minimal_record()
    mutate(rec)
    with pytest.raises(InvariantError) as exc:
        parse_scenario(json.dumps(rec))
    assert exc.value.path == path


def test_invalid_state_may_carry_placeholder_values():
    rec = minimal_record()
    rec["tracks"][0]["states"][0] = dict(state_dict(heading=99.0, valid=False), length=-1.0)
    s = parse_scenario(json.dumps(rec))
    assert not s.tracks[0].states[0].valid


def test_unknown_signal_state_parses_as_unknown():
    rec = minimal_record()
    rec["map_features"] = [{"id": 7, "kind": "lane_center", "geometry": [[0, 0], [1, 0]]}]
    rec["signal_frames"] = [{"timestep": 3, "states": [[7, "purple"]]}]
    s = parse_scenario(json.dumps(rec))
    assert s.signal_frames[0].lane_states == ((7, SignalState.UNKNOWN),)
    assert s.map_features[0].geometry[0] == (0.0, 0.0, 0.0)


def test_signal_on_unknown_lane_rejected():
    rec = minimal_record(signal_frames=[{"timestep": 3, "states": [[7, "go"]]}])
    with pytest.raises(InvariantError):
        parse_scenario(json.dumps(rec))


def test_signal_enum_has_eight_values():
    assert len(SignalState) == 8


@pytest.mark.parametrize("template", TEMPLATES)
def test_round_trip_on_generated_scenarios(template):
    s = generate_synthetic_scenario(5, template)
    text = serialize_scenario(s)
    assert parse_scenario(text) == s
    assert serialize_scenario(parse_scenario(text)) == text


def test_serialize_is_deterministic():
    s = generate_synthetic_scenario(2, "crossing_pair")
    assert serialize_scenario(s) == serialize_scenario(s)


def test_flipped_coordinate_differs_in_that_field_only():
    s = generate_synthetic_scenario(3, "straight_cv")
    rec = json.loads(serialize_scenario(s))
    rec["tracks"][1]["states"][40]["x"] += 1.0
    changed = parse_scenario(json.dumps(rec))
    assert changed.tracks[1].states[40].x == s.tracks[1].states[40].x + 1.0
    assert changed.tracks[1].states[40].y == s.tracks[1].states[40].y
    assert changed.tracks[0] == s.tracks[0]
    assert changed.tracks[1].states[:40] == s.tracks[1].states[:40]
    assert changed.tracks[1].states[41:] == s.tracks[1].states[41:]


def test_serialize_nan_on_valid_state_raises():
    s = generate_synthetic_scenario(1, "straight_cv")
    bad = dataclasses.replace(s.tracks[0].states[12], x=math.nan)
    states = s.tracks[0].states[:12] + (bad,) + s.tracks[0].states[13:]
    broken = dataclasses.replace(s, tracks=(dataclasses.replace(s.tracks[0], states=states),) + s.tracks[1:])
    with pytest.raises(InvariantError):
        serialize_scenario(broken)


def test_read_scenarios_reports_line_number(tmp_path):
    path = tmp_path / "s.jsonl"
    good = json.dumps(minimal_record())
    path.write_text(good + "\n\n" + "{oops\n", encoding="utf-8")
    it = read_scenarios(str(path))
    assert next(it).scenario_id == "min"
    with pytest.raises(MalformedRecordError) as exc:
        next(it)
    assert exc.value.path.startswith("line 3")


def test_write_then_read(tmp_path):
    corpus = [generate_synthetic_scenario(i, "braking") for i in range(3)]
    path = str(tmp_path / "c.jsonl")
    write_scenarios(path, corpus)
    assert list(read_scenarios(path)) == corpus


# ---------------------------------------------------------------------------
# Ground truth


def _one_agent(heading, velocity):
    track = line_track(1, (5.0, -2.0), velocity, heading=heading)
    return make_scenario([track])


def test_ground_truth_identity_rotation():
    gt = extract_ground_truth(_one_agent(0.0, (3.0, 0.0)), [1], 80)
    np.testing.assert_allclose(gt.speeds[0], [3.0, 0.0])


def test_ground_truth_quarter_turn_rotation():
    gt = extract_ground_truth(_one_agent(math.pi / 2, (3.0, 0.0)), [1], 80)
    # hand rotation by -pi/2: [[0, 1], [-1, 0]] @ (3, 0)
    np.testing.assert_allclose(gt.speeds[0], [0.0, -3.0], atol=1e-12)


def test_ground_truth_takes_80_future_states():
    s = _one_agent(0.0, (3.0, 0.0))
    gt = extract_ground_truth(s, [1], 80)
    assert gt.positions.shape == (1, 80, 2)
    np.testing.assert_array_equal(gt.positions[0], s.tracks[0].xy[11:91])
    assert gt.ref_poses[0] == Pose2(s.tracks[0].states[10].x, s.tracks[0].states[10].y, 0.0)


def test_ground_truth_errors():
    s = _one_agent(0.0, (3.0, 0.0))
    with pytest.raises(ValueError):
        extract_ground_truth(s, [1], 81)
    states = list(s.tracks[0].states)
    states[10] = ObjectState.invalid()
    hidden = dataclasses.replace(s, tracks=(dataclasses.replace(s.tracks[0], states=tuple(states)),))
    with pytest.raises(AgentInvalidError):
        extract_ground_truth(hidden, [1], 80)


@settings(max_examples=40, deadline=None)
@given(
    theta=st.floats(-math.pi, math.pi),
    shift=st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)),
    heading=st.floats(-3.0, 3.0),
    vel=st.tuples(st.floats(-20, 20), st.floats(-20, 20)),
)
def test_agent_frame_speed_invariant_under_rigid_transform(theta, shift, heading, vel):
    base = extract_ground_truth(_one_agent(heading, vel), [1], 10).speeds[0]
    c, s = math.cos(theta), math.sin(theta)
    moved_vel = (c * vel[0] - s * vel[1], s * vel[0] + c * vel[1])
    start = (c * 5.0 + s * 2.0 + shift[0], s * 5.0 - c * 2.0 + shift[1])
    moved_heading = math.atan2(math.sin(heading + theta), math.cos(heading + theta))
    track = line_track(1, start, moved_vel, heading=moved_heading)
    moved = extract_ground_truth(make_scenario([track]), [1], 10).speeds[0]
    np.testing.assert_allclose(moved, base, atol=1e-9)


# ---------------------------------------------------------------------------
# Predictions


def test_prediction_round_trip():
    wp = np.arange(2 * 2 * 3 * 2, dtype=float).reshape(2, 2, 3, 2) / 7.0
    p = JointPredictionSet((4, 9), [0.25, 0.75], wp, "abc")
    assert parse_prediction(serialize_prediction(p)) == p


@pytest.mark.parametrize(
    "record, error",
    [
        ({"scenario_id": "a", "agent_ids": [1], "hypotheses": []}, InvariantError),
        ({"scenario_id": "a", "agent_ids": [1, 1], "hypotheses": [{"confidence": 1, "waypoints": [[[0, 0]], [[0, 0]]]}]}, InvariantError),
        ({"scenario_id": "a", "agent_ids": [1], "hypotheses": [{"confidence": 1, "waypoints": [[[0, 0]], [[0, 0]]]}]}, SchemaError),
        ({"scenario_id": "a", "agent_ids": [1], "hypotheses": [{"confidence": -1, "waypoints": [[[0, 0]]]}]}, InvariantError),
        ({"scenario_id": "a", "agent_ids": [1], "hypotheses": [{"confidence": 1, "waypoints": [[[0, 0, 0]]]}]}, SchemaError),
        ({"agent_ids": [1], "hypotheses": []}, SchemaError),
    ],
)
def test_prediction_errors(record, error):
    with pytest.raises(error):
        parse_prediction(json.dumps(record))


def test_prediction_set_is_immutable():
    p = JointPredictionSet((1,), [1.0], np.zeros((1, 1, 2, 2)))
    with pytest.raises(AttributeError):
        p.confidences = None
    with pytest.raises(ValueError):
        p.waypoints[0, 0, 0, 0] = 3.0


def test_top_index_prefers_lowest_index_on_ties():
    p = JointPredictionSet((1,), [0.5, 0.9, 0.9], np.zeros((3, 1, 2, 2)))
    assert p.top_index() == 1
