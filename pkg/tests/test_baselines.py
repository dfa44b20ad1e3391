import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import line_track, make_scenario
from trajeval.baselines import (
    EmptyMarginalSetError,
    PredictorKind,
    PredictorSpec,
    constant_velocity_predict,
    joint_from_marginal,
    noisy_cv_predict,
    predict_scenario,
)
from trajeval.metrics import ShapeBucket, classify_shape, min_ade
from trajeval.mining import crossed_paths
from trajeval.pipeline import score_difficulty
from trajeval.scenario import AgentInvalidError, JointPredictionSet, extract_ground_truth, serialize_scenario
from trajeval.synthetic import TEMPLATES, crossing_layout, generate_corpus, generate_synthetic_scenario


def marginal(agent_id, confidences, steps=3):
    k = len(confidences)
    wp = np.arange(k, dtype=float)[:, None, None, None] + np.zeros((k, 1, steps, 2))
    return JointPredictionSet((agent_id,), confidences, wp, "s")


# ---------------------------------------------------------------------------
# Constant velocity


def test_cv_waypoint_example():
    track = line_track(1, (0, 0), (2, 1), t0=1.0)  # at (0, 0) at step 10
    p = constant_velocity_predict(track, 10, 80)
    np.testing.assert_allclose(p.waypoints[0, 0, 4], (1.0, 0.5))
    assert p.confidences.tolist() == [1.0] and p.num_steps == 80


def test_cv_zero_velocity():
    p = constant_velocity_predict(line_track(1, (3, 4), (0, 0), heading=0.0), 10, 80)
    np.testing.assert_array_equal(p.waypoints[0, 0], np.tile([3.0, 4.0], (80, 1)))


def test_cv_on_cv_agent_is_exact():
    s = make_scenario([line_track(1, (5, 5), (7.3, -2.1))])
    p = constant_velocity_predict(s.tracks[0], 10, 80)
    assert min_ade(extract_ground_truth(s, [1], 80), p, 80) < 1e-9


def test_cv_invalid_agent():
    valid = np.arange(91) != 10
    with pytest.raises(AgentInvalidError):
        constant_velocity_predict(line_track(1, (0, 0), (1, 0), valid=valid), 10)


def test_spec_validation():
    assert PredictorSpec("cv").kind is PredictorKind.CONSTANT_VELOCITY
    assert PredictorSpec("noisy", k=4).kind is PredictorKind.NOISY_CV
    with pytest.raises(ValueError):
        PredictorSpec(k=0)
    with pytest.raises(ValueError):
        PredictorSpec("cv", k=2)
    with pytest.raises(ValueError):
        PredictorSpec("lstm")


# ---------------------------------------------------------------------------
# Noisy constant velocity


def test_noisy_cv_first_hypothesis_is_cv_and_sets_nest():
    track = line_track(1, (0, 0), (6, 1))
    cv = constant_velocity_predict(track, 10)
    six = noisy_cv_predict(track, 10, 6, scenario_id="s", seed=3)
    two = noisy_cv_predict(track, 10, 2, scenario_id="s", seed=3)
    np.testing.assert_array_equal(six.waypoints[0], cv.waypoints[0])
    assert two == six.head(2)
    assert six == noisy_cv_predict(track, 10, 6, scenario_id="s", seed=3)
    assert six != noisy_cv_predict(track, 10, 6, scenario_id="s", seed=4)
    assert np.all((six.confidences >= 0.05) & (six.confidences <= 1.0))


# ---------------------------------------------------------------------------
# Joint from marginal


def test_joint_example():
    j = joint_from_marginal([marginal(1, [0.6, 0.4]), marginal(2, [0.7, 0.3])], 2)
    assert j.agent_ids == (1, 2)
    # all four products: (0,0) 0.42, (0,1) 0.18, (1,0) 0.28, (1,1) 0.12
    np.testing.assert_allclose(j.confidences, [0.42, 0.28])
    # waypoint values encode the member hypothesis index
    assert j.waypoints[0, :, 0, 0].tolist() == [0.0, 0.0]
    assert j.waypoints[1, :, 0, 0].tolist() == [1.0, 0.0]


def test_joint_single_hypotheses():
    j = joint_from_marginal([marginal(1, [0.5]), marginal(2, [0.8])], 1)
    assert j.num_hypotheses == 1 and j.confidences[0] == pytest.approx(0.4)


def test_joint_caps_at_available_tuples():
    assert joint_from_marginal([marginal(1, [0.5, 0.5]), marginal(2, [0.8])], 6).num_hypotheses == 2


def test_joint_ties_break_lexicographically():
    j = joint_from_marginal([marginal(1, [0.5, 0.5]), marginal(2, [0.5, 0.5])], 4)
    combos = [tuple(int(v) for v in j.waypoints[k, :, 0, 0]) for k in range(4)]
    assert combos == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_joint_errors():
    with pytest.raises(ValueError):
        joint_from_marginal([marginal(1, [1.0])], 1)
    with pytest.raises(ValueError):
        joint_from_marginal([marginal(1, [1.0]), marginal(2, [1.0], steps=4)], 1)
    with pytest.raises(EmptyMarginalSetError):
        joint_from_marginal([_EmptySet(1), marginal(2, [1.0])], 1)


class _EmptySet:
    """Stand-in for a marginal set with no hypotheses (the container itself refuses to build one)."""

    def __init__(self, agent_id):
        self.agent_ids = (agent_id,)
        self.num_agents = 1
        self.num_hypotheses = 0
        self.num_steps = 3


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 3), st.integers(1, 4), st.integers(1, 8))
def test_joint_equals_brute_force_top_k(seed, agents, per_agent, k):
    if agents * per_agent > 12:
        per_agent = 12 // agents
    rng = np.random.default_rng(seed)
    margs = [marginal(a + 1, rng.choice([0.1, 0.2, 0.5, 0.9], per_agent)) for a in range(agents)]
    j = joint_from_marginal(margs, k)
    brute = sorted(
        itertools.product(*(range(per_agent) for _ in margs)),
        key=lambda combo: (-math.prod(float(m.confidences[i]) for m, i in zip(margs, combo)), combo),
    )[:k]
    got = [tuple(int(v) for v in j.waypoints[h, :, 0, 0]) for h in range(j.num_hypotheses)]
    assert got == brute
    assert np.all(np.diff(j.confidences) <= 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_joint_selected_set_ignores_hypothesis_order(seed):
    rng = np.random.default_rng(seed)
    conf = rng.permutation([0.9, 0.6, 0.3, 0.1])
    a = JointPredictionSet((1,), conf, rng.normal(size=(4, 1, 3, 2)))
    b = marginal(2, [0.7, 0.2])
    perm = rng.permutation(4)
    shuffled = JointPredictionSet((1,), a.confidences[perm], a.waypoints[perm])
    picked = joint_from_marginal([a, b], 3)
    again = joint_from_marginal([shuffled, b], 3)
    key = lambda j: sorted(map(lambda h: h.tobytes(), j.waypoints))
    assert key(picked) == key(again)


# ---------------------------------------------------------------------------
# Scenario-level prediction


def test_predict_scenario_modes():
    s = generate_synthetic_scenario(1, "crossing_pair")
    marginals = predict_scenario(s, PredictorSpec())
    assert [p.agent_ids[0] for p in marginals] == [e.object_id for e in s.predict_list]
    (joint,) = predict_scenario(s, PredictorSpec("noisy_cv", k=6, seed=1), joint=True)
    assert joint.agent_ids == s.interactive_pair.ids and joint.num_hypotheses == 6


# ---------------------------------------------------------------------------
# Synthetic generator


@pytest.mark.parametrize("template", TEMPLATES)
def test_generator_is_deterministic_and_valid(template):
    a, b = generate_synthetic_scenario(9, template), generate_synthetic_scenario(9, template)
    assert serialize_scenario(a) == serialize_scenario(b)
    assert a.num_steps == 91 and a.current_index == 10
    assert a.predict_list and a.sdc_track() is not None
    assert any(f.kind.value == "lane_center" for f in a.map_features)


def test_generator_seeds_differ():
    assert serialize_scenario(generate_synthetic_scenario(1, "turning")) != serialize_scenario(
        generate_synthetic_scenario(2, "turning")
    )


@pytest.mark.parametrize("seed", range(5))
def test_crossing_pair_matches_layout(seed):
    s = generate_synthetic_scenario(seed, "crossing_pair")
    layout = crossing_layout(seed)
    c = crossed_paths(s.track(layout.first), s.track(layout.second))
    assert c.time_gap == pytest.approx(layout.gap, abs=1e-6)
    assert c.point == pytest.approx((0.0, 0.0), abs=1e-6)
    assert s.interactive_pair.ids in ((1, 2), (2, 1))


def test_straight_cv_is_straight_and_easy():
    s = generate_synthetic_scenario(0, "straight_cv")
    cur = s.current_index
    for track in s.tracks:
        assert classify_shape(track.xy[cur:], headings=track.heading[cur:]) in (ShapeBucket.STRAIGHT, ShapeBucket.STATIONARY)
        assert score_difficulty(track, s).value == "easy"


def test_generator_custom_length_and_bad_template():
    assert generate_synthetic_scenario(0, "braking", num_steps=201).num_steps == 201
    with pytest.raises(ValueError):
        generate_synthetic_scenario(0, "spiral")


def test_generate_corpus_ids_unique():
    corpus = generate_corpus(TEMPLATES, range(3))
    ids = [s.scenario_id for s in corpus]
    assert len(ids) == len(set(ids)) == 15
