"""Overlap rate: do the most confident predicted boxes collide with anything?"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from trajeval.geometry import Box5, box_iou, infer_headings
from trajeval.metrics.config import MetricsConfig
from trajeval.scenario import JointPredictionSet, Scenario, Track


def predicted_boxes(waypoints: np.ndarray, length: float, width: float, fallback_heading: float) -> List[Box5]:
    """Boxes along a predicted path, headings from waypoint differences."""
    headings = infer_headings(waypoints, fallback=fallback_heading)
    return [Box5(float(x), float(y), length, width, float(h)) for (x, y), h in zip(waypoints, headings)]


def ground_truth_box(track: Track, index: int) -> Optional[Box5]:
    st = track.states[index]
    if not st.valid:
        return None
    return Box5(st.x, st.y, st.length, st.width, st.heading)


def _agent_boxes(scenario: Scenario, agent_id: int, waypoints: np.ndarray) -> List[Box5]:
    st = scenario.track(agent_id).states[scenario.current_index]
    if not st.valid:
        raise ValueError(f"agent {agent_id} is not valid at the prediction time")
    return predicted_boxes(waypoints, st.length, st.width, st.heading)


def _overlaps(box: Box5, others: Sequence[Box5], eps: float) -> bool:
    return any(box_iou(box, other) > eps for other in others)


def overlap_joint(scenario: Scenario, p: JointPredictionSet, horizon_s: int, cfg: MetricsConfig = MetricsConfig()) -> bool:
    """Overlap indicator for one joint sample, using its top hypothesis.

    Predicted boxes are compared with every other jointly predicted box and
    with ground-truth boxes of agents visible at the prediction time.
    """
    steps = cfg.horizon_steps(horizon_s)
    if p.num_steps < steps:
        raise ValueError(f"prediction has {p.num_steps} steps, horizon needs {steps}")
    top = p.waypoints[p.top_index(), :, :steps]
    boxes = [_agent_boxes(scenario, a, top[i]) for i, a in enumerate(p.agent_ids)]
    cur = scenario.current_index
    members = set(p.agent_ids)
    env = [t for t in scenario.tracks if t.object_id not in members and t.states[cur].valid]
    last = scenario.num_steps - 1
    for t in range(steps):
        index = cur + 1 + t
        env_boxes = []
        if index <= last:
            env_boxes = [b for b in (ground_truth_box(track, index) for track in env) if b is not None]
        for i in range(len(boxes)):
            others = env_boxes + [boxes[j][t] for j in range(len(boxes)) if j != i]
            if _overlaps(boxes[i][t], others, cfg.iou_eps):
                return True
    return False


def agent_overlaps_ground_truth(
    scenario: Scenario, agent_id: int, waypoints: np.ndarray, cfg: MetricsConfig = MetricsConfig()
) -> bool:
    """Whether a single predicted path hits any other agent's ground-truth box at the same step."""
    boxes = _agent_boxes(scenario, agent_id, waypoints)
    cur = scenario.current_index
    others = [t for t in scenario.tracks if t.object_id != agent_id]
    for t, box in enumerate(boxes):
        index = cur + 1 + t
        if index >= scenario.num_steps:
            break
        gt = [b for b in (ground_truth_box(track, index) for track in others) if b is not None]
        if _overlaps(box, gt, cfg.iou_eps):
            return True
    return False


def overlap_marginal(
    scenario: Scenario,
    predictions: Sequence[JointPredictionSet],
    horizon_s: int,
    cfg: MetricsConfig = MetricsConfig(),
) -> Tuple[float, Dict[int, bool]]:
    """Fraction of predicted agents whose top trajectory overlaps a ground-truth box.

    Returns the rate and the per-agent flags.
    """
    steps = cfg.horizon_steps(horizon_s)
    flags: Dict[int, bool] = {}
    for p in predictions:
        if p.num_agents != 1:
            raise ValueError("marginal overlap expects single-agent prediction sets")
        agent = p.agent_ids[0]
        top = p.waypoints[p.top_index(), 0, :steps]
        flags[agent] = agent_overlaps_ground_truth(scenario, agent, top, cfg)
    if not flags:
        return 0.0, flags
    return sum(flags.values()) / len(flags), flags
