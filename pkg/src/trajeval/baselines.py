"""Reference predictors and the marginal-to-joint conversion."""

from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Sequence

import numpy as np

from trajeval.scenario import (
    FUTURE_STEPS,
    STEP_SECONDS,
    AgentInvalidError,
    JointPredictionSet,
    Scenario,
    Track,
)


class PredictorKind(str, Enum):
    CONSTANT_VELOCITY = "constant_velocity"
    NOISY_CV = "noisy_cv"


KIND_ALIASES = {"cv": PredictorKind.CONSTANT_VELOCITY, "noisy": PredictorKind.NOISY_CV}


class EmptyMarginalSetError(ValueError):
    pass


@dataclass(frozen=True)
class PredictorSpec:
    """Which baseline to run and how many hypotheses it emits.

    ``noise`` is the heading jitter (radians, one standard deviation) applied
    to the extra hypotheses of the noisy predictor; speed is jittered by the
    same relative amount.
    """

    kind: PredictorKind = PredictorKind.CONSTANT_VELOCITY
    k: int = 1
    horizon_steps: int = FUTURE_STEPS
    seed: int = 0
    noise: float = 0.3

    def __post_init__(self) -> None:
        kind = KIND_ALIASES[self.kind] if self.kind in KIND_ALIASES else PredictorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.horizon_steps < 1:
            raise ValueError("horizon_steps must be at least 1")
        if self.kind is PredictorKind.CONSTANT_VELOCITY and self.k != 1:
            raise ValueError("the constant velocity baseline emits exactly one hypothesis")


def _cv_path(x: float, y: float, vx: float, vy: float, horizon_steps: int, step_seconds: float) -> np.ndarray:
    t = np.arange(1, horizon_steps + 1) * step_seconds
    return np.stack([x + vx * t, y + vy * t], axis=1)


def _current_state(track: Track, current_index: int):
    if not track.valid[current_index]:
        raise AgentInvalidError(f"object {track.object_id} is not valid at step {current_index}")
    return track.states[current_index]


def constant_velocity_predict(
    track: Track,
    current_index: int,
    horizon_steps: int = FUTURE_STEPS,
    scenario_id: str = "",
    step_seconds: float = STEP_SECONDS,
) -> JointPredictionSet:
    """Hold the current velocity: waypoint ``t`` is ``position + velocity * t * dt``."""
    st = _current_state(track, current_index)
    path = _cv_path(st.x, st.y, st.vx, st.vy, horizon_steps, step_seconds)
    return JointPredictionSet((track.object_id,), [1.0], path[None, None], scenario_id)


def _rng(seed: int, scenario_id: str, object_id: int, k: int) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(scenario_id.encode("utf-8")), object_id & 0xFFFFFFFF, k])


def noisy_cv_predict(
    track: Track,
    current_index: int,
    k: int,
    horizon_steps: int = FUTURE_STEPS,
    scenario_id: str = "",
    seed: int = 0,
    noise: float = 0.3,
    step_seconds: float = STEP_SECONDS,
) -> JointPredictionSet:
    """Constant velocity plus ``k - 1`` jittered variants, each with a random confidence.

    Hypothesis 0 is the exact constant-velocity path. Every hypothesis is
    drawn from its own stream keyed on (seed, scenario, object, index), so the
    set for ``k`` is a prefix of the set for any larger ``k``.
    """
    st = _current_state(track, current_index)
    paths, conf = [], []
    for i in range(k):
        rng = _rng(seed, scenario_id, track.object_id, i)
        c = float(rng.uniform(0.05, 1.0))
        vx, vy = st.vx, st.vy
        if i > 0:
            angle = rng.normal(0.0, noise)
            scale = max(0.0, 1.0 + rng.normal(0.0, noise))
            ca, sa = math.cos(angle), math.sin(angle)
            vx, vy = scale * (ca * st.vx - sa * st.vy), scale * (sa * st.vx + ca * st.vy)
        paths.append(_cv_path(st.x, st.y, vx, vy, horizon_steps, step_seconds))
        conf.append(c)
    return JointPredictionSet((track.object_id,), conf, np.stack(paths)[:, None], scenario_id)


def joint_from_marginal(marginals: Sequence[JointPredictionSet], k: int) -> JointPredictionSet:
    """Top-``k`` joint hypotheses from the cross product of per-agent marginals.

    Each tuple of member hypotheses is scored by the product of member
    confidences (no renormalization). Ties go to the lexicographically
    smallest index tuple.
    """
    if len(marginals) < 2:
        raise ValueError("joint_from_marginal needs at least two agents")
    if k < 1:
        raise ValueError("k must be at least 1")
    for m in marginals:
        if m.num_agents != 1:
            raise ValueError("each marginal set must cover exactly one agent")
        if m.num_hypotheses == 0:
            raise EmptyMarginalSetError(f"agent {m.agent_ids[0]} has no hypotheses")
    steps = {m.num_steps for m in marginals}
    if len(steps) != 1:
        raise ValueError(f"marginal sets disagree on horizon length: {sorted(steps)}")
    scored = []
    for combo in itertools.product(*(range(m.num_hypotheses) for m in marginals)):
        score = 1.0
        for m, i in zip(marginals, combo):
            score *= float(m.confidences[i])
        scored.append((-score, combo))
    scored.sort()
    chosen = scored[:k]
    waypoints = np.stack(
        [np.stack([m.waypoints[i, 0] for m, i in zip(marginals, combo)]) for _, combo in chosen]
    )
    return JointPredictionSet(
        tuple(m.agent_ids[0] for m in marginals),
        [-neg for neg, _ in chosen],
        waypoints,
        marginals[0].scenario_id,
    )


def _marginal(scenario: Scenario, object_id: int, spec: PredictorSpec) -> JointPredictionSet:
    track = scenario.track(object_id)
    if spec.kind is PredictorKind.CONSTANT_VELOCITY:
        return constant_velocity_predict(track, scenario.current_index, spec.horizon_steps, scenario.scenario_id)
    return noisy_cv_predict(
        track, scenario.current_index, spec.k, spec.horizon_steps, scenario.scenario_id, spec.seed, spec.noise
    )


def predict_scenario(scenario: Scenario, spec: PredictorSpec, joint: bool = False) -> List[JointPredictionSet]:
    """Baseline predictions for one scenario.

    Marginal mode predicts every predict-list object; joint mode predicts the
    interactive pair by combining its two marginals. Objects that are not
    valid at the prediction time are skipped.
    """
    if joint:
        pair = scenario.interactive_pair
        if pair is None:
            return []
        try:
            members = [_marginal(scenario, i, spec) for i in pair.ids]
        except AgentInvalidError:
            return []
        return [joint_from_marginal(members, spec.k)]
    out = []
    for entry in scenario.predict_list:
        try:
            out.append(_marginal(scenario, entry.object_id, spec))
        except AgentInvalidError:
            continue
    return out


def predict_corpus(scenarios: Iterable[Scenario], spec: PredictorSpec, joint: bool = False) -> List[JointPredictionSet]:
    return [p for s in scenarios for p in predict_scenario(s, spec, joint)]
