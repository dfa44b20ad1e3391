import dataclasses
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import DT, lane, line_track, make_scenario, make_track, stop_track
from trajeval.pipeline import (
    AGENT_BUCKETS,
    ParentTooShortError,
    Split,
    agent_bucket,
    assign_split,
    build_windowed_set,
    corpus_stats,
    cv_endpoint_error,
    extract_windows,
    fnv1a_64,
    score_difficulty,
    select_predict_objects,
    speed_bin,
)
from trajeval.scenario import (
    Difficulty,
    InteractivePair,
    ObjectType,
    PredictEntry,
    SignalState,
    TrafficSignalFrame,
)
from trajeval.synthetic import generate_corpus, generate_synthetic_scenario


# ---------------------------------------------------------------------------
# Splits


def test_fnv1a_reference_values():
    # published FNV-1a 64-bit test vectors
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_split_rule():
    h = fnv1a_64("2019-05-01|veh-1".encode("utf-8")) % 100
    expected = Split.TRAINING if h < 70 else Split.VALIDATION if h < 85 else Split.TEST
    assert assign_split("2019-05-01", "veh-1") is expected


@given(st.text(min_size=1), st.text(min_size=1))
def test_split_is_deterministic(date, vehicle):
    assert assign_split(date, vehicle) is assign_split(date, vehicle)


def test_split_rejects_empty():
    with pytest.raises(ValueError):
        assign_split("", "veh")


def test_windows_share_parent_split():
    parent = _parent()
    split = assign_split(parent.capture_date, parent.vehicle_id)
    for w in extract_windows(parent, "training"):
        assert assign_split(w.capture_date, w.vehicle_id) is split


# ---------------------------------------------------------------------------
# Windows


def _parent(n_steps=201, **kw):
    tracks = [
        line_track(1, (0, 0), (5, 0), n_steps=n_steps),
        line_track(2, (0, 5), (3, 1), n_steps=n_steps, object_type=ObjectType.CYCLIST),
        line_track(3, (9, 9), (0, 0), n_steps=n_steps, heading=0.5, object_type=ObjectType.PEDESTRIAN),
    ]
    return make_scenario(tracks, scenario_id="p", **kw)


@pytest.mark.parametrize("name, count", [("training", 7), ("validation", 3), ("val", 3), ("test", 3),
                                         ("validation_interactive", 3), ("test_interactive", 3)])
def test_window_counts(name, count):
    assert len(extract_windows(_parent(), name)) == count


def test_window_indexing_identity():
    parent = _parent()
    for w, offset in zip(extract_windows(parent, "val_interactive"), (4, 5, 6)):
        assert w.scenario_id == f"p_w{offset:02d}"
        assert w.num_steps == 91 and w.current_index == 10
        for track in w.tracks:
            src = parent.track(track.object_id)
            for t in range(91):
                assert track.states[t] == src.states[offset * 10 + t]


def test_short_parent_keeps_offsets_that_fit():
    windows = extract_windows(_parent(n_steps=151), "training")
    assert [w.scenario_id for w in windows] == ["p_w00", "p_w02", "p_w04", "p_w05", "p_w06"]


def test_parent_too_short():
    with pytest.raises(ParentTooShortError):
        extract_windows(_parent(n_steps=91), "test_interactive")


def test_unknown_set():
    with pytest.raises(ValueError):
        extract_windows(_parent(), "holdout")


def test_tracks_without_valid_state_are_dropped():
    valid = np.arange(201) >= 150
    late = line_track(4, (50, 50), (1, 0), n_steps=201, valid=valid)
    parent = dataclasses.replace(
        _parent(), tracks=_parent().tracks + (late,), predict_list=(PredictEntry(4, Difficulty.EASY),),
        interactive_pair=InteractivePair(1, 4, "merge"),
    )
    first, last = extract_windows(parent, "test")[0], extract_windows(parent, "test")[-1]
    assert 4 not in first.track_by_id and first.predict_list == () and first.interactive_pair is None
    assert 4 in last.track_by_id and last.interactive_pair == parent.interactive_pair


def test_signal_frames_reindexed():
    lanes = [lane(7, (0, 0), (10, 0))]
    frames = tuple(TrafficSignalFrame(t, ((7, SignalState.GO),)) for t in range(0, 201, 5))
    parent = _parent(map_features=lanes, signal_frames=frames)
    w = extract_windows(parent, "test")[1]  # 5 s offset
    assert [f.timestep for f in w.signal_frames] == list(range(0, 91, 5))
    assert w.map_features == parent.map_features


def test_interactive_set_predicts_only_the_pair():
    parent = dataclasses.replace(_parent(), interactive_pair=InteractivePair(1, 2, "merge"))
    for w in build_windowed_set(parent, "validation_interactive"):
        assert [e.object_id for e in w.predict_list] == [1, 2]
    assert build_windowed_set(_parent(), "test_interactive") == []


# ---------------------------------------------------------------------------
# Predict-list selection and difficulty


def _turning(object_id, object_type=ObjectType.VEHICLE, radius=12.0, speed=8.0):
    t = np.arange(91) * DT
    phi = speed * t / radius
    xy = np.stack([radius * np.sin(phi), radius - radius * np.cos(phi)], axis=1) + object_id * 100.0
    vel = np.stack([speed * np.cos(phi), speed * np.sin(phi)], axis=1)
    return make_track(object_id, xy, velocity=vel, object_type=object_type)


def test_at_least_two_of_each_type():
    types = [ObjectType.VEHICLE] * 3 + [ObjectType.PEDESTRIAN] * 2 + [ObjectType.CYCLIST] * 2
    tracks = [_turning(i + 1, t, speed=2.0 + 3 * (t is ObjectType.VEHICLE)) for i, t in enumerate(types)]
    chosen = select_predict_objects(make_scenario(tracks))
    counts = {t: 0 for t in ObjectType}
    for e in chosen:
        counts[tracks[e.object_id - 1].object_type] += 1
    assert all(c >= 2 for c in counts.values())
    assert len(chosen) == 7


def test_per_type_guarantee_beats_global_score():
    vehicles = [_turning(i, speed=10.0) for i in range(1, 11)]
    slow_ped = line_track(50, (0, 0), (1, 0), object_type=ObjectType.PEDESTRIAN)
    chosen = select_predict_objects(make_scenario(vehicles + [slow_ped]))
    assert len(chosen) == 8
    assert 50 in {e.object_id for e in chosen}


def test_turning_vehicle_ranked_first():
    cv = [line_track(i, (0, 10 * i), (6, 0)) for i in range(1, 21)]
    chosen = select_predict_objects(make_scenario(cv + [_turning(99)]))
    assert chosen[0].object_id == 99
    assert chosen[0].difficulty is Difficulty.HARD


def test_candidates_need_a_valid_future():
    valid = np.arange(91) <= 10
    gone = line_track(5, (0, 0), (5, 0), valid=valid)
    chosen = select_predict_objects(make_scenario([gone, line_track(6, (0, 5), (5, 0))]))
    assert [e.object_id for e in chosen] == [6]


@settings(max_examples=25, deadline=None)
@given(st.randoms(use_true_random=False))
def test_selection_invariant_to_track_order(rnd):
    s = generate_synthetic_scenario(7, "yield_pedestrian")
    tracks = list(s.tracks)
    rnd.shuffle(tracks)
    assert select_predict_objects(dataclasses.replace(s, tracks=tuple(tracks))) == select_predict_objects(s)


def test_difficulty_examples():
    w = make_scenario([line_track(1, (0, 0), (7, 2))])
    assert score_difficulty(w.tracks[0], w) is Difficulty.EASY
    still = make_scenario([line_track(1, (0, 0), (0, 0), heading=0.0)])
    assert score_difficulty(still.tracks[0], still) is Difficulty.EASY


def test_braking_from_ten_is_hard():
    track = stop_track(1, 10.0, 5.0, t_brake=1.0)
    w = make_scenario([track])
    # stops 10 m after the brake point; CV keeps going for 8 s
    assert cv_endpoint_error(track, 10) == pytest.approx(80.0 - 10.0)
    assert score_difficulty(track, w) is Difficulty.HARD


def test_difficulty_uses_furthest_valid_step():
    valid = np.arange(91) <= 40
    track = stop_track(1, 10.0, 5.0, t_brake=1.0, valid=valid)
    # 3 s after the prediction time: CV 30 m, braking 10 m
    assert cv_endpoint_error(track, 10) == pytest.approx(20.0)


# ---------------------------------------------------------------------------
# Corpus statistics


def test_empty_corpus_stats():
    stats = corpus_stats([])
    assert stats.num_scenes == 0 and stats.num_agents == 0
    assert set(stats.agents_per_scene.values()) == {0}
    assert stats.max_speed == {} and stats.unique_voxels == 0


def test_single_agent_scenes_land_in_bucket_one():
    corpus = [make_scenario([line_track(1, (0, 0), (5, 0))], scenario_id=f"s{i}") for i in range(4)]
    stats = corpus_stats(corpus)
    assert stats.agents_per_scene[1] == 4
    assert sum(stats.agents_per_scene.values()) == stats.num_scenes == 4


def test_agent_buckets_and_speed_bins():
    assert [agent_bucket(n) for n in (0, 1, 3, 4, 127, 128, 5000)] == [0, 1, 2, 4, 64, 128, 128]
    assert AGENT_BUCKETS[-1] == 128
    assert [speed_bin(v) for v in (0.0, 1.99, 2.0, 39.9, 95.0)] == [0.0, 0.0, 2.0, 38.0, 40.0]


def test_speed_histogram_matches_direct_tally():
    corpus = generate_corpus(["straight_cv", "braking", "yield_pedestrian"], range(3))
    stats = corpus_stats(corpus)
    tally = {}
    for s in corpus:
        for t in s.tracks:
            top = max(math.hypot(st.vx, st.vy) for st in t.states if st.valid)
            b = min(math.floor(top / 2.0) * 2.0, 40.0)
            tally[b] = tally.get(b, 0) + 1
    assert stats.max_speed == dict(sorted(tally.items()))
    assert sum(stats.max_speed.values()) == stats.num_agents == sum(len(s.tracks) for s in corpus)


def test_predict_shares_and_voxels():
    corpus = generate_corpus(["yield_pedestrian", "turning"], range(2))
    stats = corpus_stats(corpus)
    listed = sum(len(s.predict_list) for s in corpus)
    assert sum(stats.predict_counts.values()) == listed
    assert sum(stats.predict_shares().values()) == pytest.approx(1.0)
    ego_cells = set()
    for s in corpus:
        ego = s.sdc_track()
        ego_cells |= {(math.floor(st.x / 25.0), math.floor(st.y / 25.0)) for st in ego.states if st.valid}
    assert stats.unique_voxels == len(ego_cells)


def test_stats_merge_is_order_independent():
    corpus = generate_corpus(["turning", "braking"], range(3))
    shuffled = list(corpus)
    random.Random(4).shuffle(shuffled)
    assert corpus_stats(corpus).to_json() == corpus_stats(shuffled).to_json()
    assert corpus_stats(corpus).histograms_csv().startswith("table,bin,count\n")
