"""Dataset assembly: hash splits, fixed-offset windows, predict-list selection, corpus stats."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

from trajeval.scenario import (
    HISTORY_STEPS,
    STEP_SECONDS,
    WINDOW_STEPS,
    Difficulty,
    ObjectType,
    PredictEntry,
    Scenario,
    Track,
    TrafficSignalFrame,
)

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3

EASY_LIMIT = 2.0  # meters of constant-velocity endpoint error
MEDIUM_LIMIT = 6.0


class Split(str, Enum):
    TRAINING = "training"
    VALIDATION = "validation"
    TEST = "test"


# window start offsets in seconds
WINDOW_OFFSETS: Dict[str, Tuple[int, ...]] = {
    "training": (0, 2, 4, 5, 6, 8, 10),
    "validation": (0, 5, 10),
    "test": (0, 5, 10),
    "validation_interactive": (4, 5, 6),
    "test_interactive": (4, 5, 6),
}
SET_ALIASES = {"val": "validation", "val_interactive": "validation_interactive"}
INTERACTIVE_SETS = ("validation_interactive", "test_interactive")


class ParentTooShortError(ValueError):
    pass


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def assign_split(capture_date: str, vehicle_id: str) -> Split:
    """70/15/15 split keyed only on capture date and vehicle id."""
    if not capture_date or not vehicle_id:
        raise ValueError("capture_date and vehicle_id must be non-empty")
    bucket = fnv1a_64(f"{capture_date}|{vehicle_id}".encode("utf-8")) % 100
    if bucket < 70:
        return Split.TRAINING
    if bucket < 85:
        return Split.VALIDATION
    return Split.TEST


def canonical_set(name: str) -> str:
    name = SET_ALIASES.get(name, name)
    if name not in WINDOW_OFFSETS:
        raise ValueError(f"unknown target set {name!r}; expected one of {sorted(WINDOW_OFFSETS) + sorted(SET_ALIASES)}")
    return name


def _slice_track(track: Track, start: int) -> Track:
    return dataclasses.replace(track, states=track.states[start : start + WINDOW_STEPS])


def extract_windows(scenario: Scenario, target_set: str, step_seconds: float = STEP_SECONDS) -> List[Scenario]:
    """Cut 91-step windows at the target set's start offsets.

    Offsets that do not fit in the parent are skipped. Tracks with no valid
    state inside a window are dropped; predict-list entries and the
    interactive pair are kept only when their tracks survive. Signal frames
    are re-indexed to window time; the map is carried over unchanged.
    """
    offsets = WINDOW_OFFSETS[canonical_set(target_set)]
    steps_per_second = int(round(1.0 / step_seconds))
    windows = []
    for offset_s in offsets:
        start = offset_s * steps_per_second
        if start + WINDOW_STEPS > scenario.num_steps:
            continue
        tracks = tuple(
            t for t in (_slice_track(tr, start) for tr in scenario.tracks) if any(s.valid for s in t.states)
        )
        ids = {t.object_id for t in tracks}
        pair = scenario.interactive_pair
        if pair is not None and not set(pair.ids) <= ids:
            pair = None
        frames = tuple(
            TrafficSignalFrame(f.timestep - start, f.lane_states)
            for f in scenario.signal_frames
            if start <= f.timestep < start + WINDOW_STEPS
        )
        windows.append(
            dataclasses.replace(
                scenario,
                scenario_id=f"{scenario.scenario_id}_w{offset_s:02d}",
                current_index=HISTORY_STEPS,
                tracks=tracks,
                signal_frames=frames,
                predict_list=tuple(e for e in scenario.predict_list if e.object_id in ids),
                interactive_pair=pair,
            )
        )
    if not windows:
        raise ParentTooShortError(
            f"scenario {scenario.scenario_id} has {scenario.num_steps} steps; no {target_set} window fits"
        )
    return windows


def cv_endpoint_error(track: Track, current_index: int, step_seconds: float = STEP_SECONDS) -> Optional[float]:
    """Constant-velocity extrapolation error at the furthest valid future step.

    ``None`` when the track is invalid at ``current_index`` or has no valid
    future step.
    """
    if not track.valid[current_index]:
        return None
    future = np.flatnonzero(track.valid[current_index + 1 :])
    if len(future) == 0:
        return None
    k = int(future[-1]) + 1
    st = track.states[current_index]
    pred = np.array([st.x + st.vx * (k * step_seconds), st.y + st.vy * (k * step_seconds)])
    return float(np.hypot(*(track.xy[current_index + k] - pred)))


def difficulty_from_error(error: float) -> Difficulty:
    if error < EASY_LIMIT:
        return Difficulty.EASY
    if error < MEDIUM_LIMIT:
        return Difficulty.MEDIUM
    return Difficulty.HARD


def score_difficulty(track: Track, window: Scenario) -> Difficulty:
    """Difficulty from the constant-velocity endpoint error."""
    error = cv_endpoint_error(track, window.current_index)
    if error is None:
        if not track.valid[window.current_index]:
            raise ValueError(f"track {track.object_id} is not valid at the prediction time")
        return Difficulty.EASY
    return difficulty_from_error(error)


def select_predict_objects(window: Scenario, max_objects: int = 8, per_type: int = 2) -> Tuple[PredictEntry, ...]:
    """Pick up to ``max_objects`` agents, favoring ones a constant-velocity model gets wrong.

    Up to ``per_type`` of each object type are guaranteed a slot (best scored
    first); the remaining slots go to the highest scores overall. Ties break
    on object id, so the result does not depend on track order.
    """
    scored = []
    for track in window.tracks:
        error = cv_endpoint_error(track, window.current_index)
        if error is not None:
            scored.append((error, track))
    ranked = sorted(scored, key=lambda item: (-item[0], item[1].object_id))
    chosen: List[Tuple[float, Track]] = []
    for otype in ObjectType:
        of_type = [item for item in ranked if item[1].object_type is otype]
        chosen.extend(of_type[:per_type])
    chosen = sorted(chosen, key=lambda item: (-item[0], item[1].object_id))[:max_objects]
    taken = {t.object_id for _, t in chosen}
    for item in ranked:
        if len(chosen) >= max_objects:
            break
        if item[1].object_id not in taken:
            chosen.append(item)
            taken.add(item[1].object_id)
    chosen.sort(key=lambda item: (-item[0], item[1].object_id))
    return tuple(PredictEntry(t.object_id, difficulty_from_error(err)) for err, t in chosen)


def build_windowed_set(scenario: Scenario, target_set: str) -> List[Scenario]:
    """Windows with predict lists filled in for the target set.

    Standard sets select up to 8 objects; interactive sets predict only the
    interactive pair, and windows where that pair is unusable are dropped.
    """
    name = canonical_set(target_set)
    out = []
    for window in extract_windows(scenario, name):
        if name in INTERACTIVE_SETS:
            pair = window.interactive_pair
            if pair is None:
                continue
            tracks = [window.track(i) for i in pair.ids]
            if not all(t.valid[window.current_index] for t in tracks):
                continue
            predict = tuple(PredictEntry(t.object_id, score_difficulty(t, window)) for t in tracks)
        else:
            predict = select_predict_objects(window)
        out.append(dataclasses.replace(window, predict_list=predict))
    return out


# --------------------------------------------------------------------------
# Corpus statistics

AGENT_BUCKETS = (1, 2, 4, 8, 16, 32, 64, 128)
SPEED_BIN = 2.0  # m/s
SPEED_MAX = 40.0  # m/s; last bin is open-ended
VOXEL_SIZE = 25.0  # meters


def agent_bucket(n: int) -> int:
    """Lower edge of the power-of-two bucket holding ``n`` (0 for empty scenes)."""
    label = 0
    for edge in AGENT_BUCKETS:
        if n >= edge:
            label = edge
    return label


def speed_bin(speed: float) -> float:
    return min(math.floor(speed / SPEED_BIN) * SPEED_BIN, SPEED_MAX)


@dataclass
class CorpusStats:
    num_scenes: int = 0
    num_agents: int = 0
    agents_per_scene: Dict[int, int] = field(default_factory=lambda: {b: 0 for b in (0,) + AGENT_BUCKETS})
    predict_counts: Dict[str, int] = field(default_factory=lambda: {t.value: 0 for t in ObjectType})
    max_speed: Dict[float, int] = field(default_factory=dict)
    ego_voxels: FrozenSet[Tuple[int, int]] = frozenset()

    @property
    def unique_voxels(self) -> int:
        return len(self.ego_voxels)

    def predict_shares(self) -> Dict[str, float]:
        total = sum(self.predict_counts.values())
        return {k: (v / total if total else 0.0) for k, v in self.predict_counts.items()}

    def merge(self, other: "CorpusStats") -> "CorpusStats":
        speeds = dict(self.max_speed)
        for k, v in other.max_speed.items():
            speeds[k] = speeds.get(k, 0) + v
        return CorpusStats(
            num_scenes=self.num_scenes + other.num_scenes,
            num_agents=self.num_agents + other.num_agents,
            agents_per_scene={k: self.agents_per_scene[k] + other.agents_per_scene[k] for k in self.agents_per_scene},
            predict_counts={k: self.predict_counts[k] + other.predict_counts[k] for k in self.predict_counts},
            max_speed=dict(sorted(speeds.items())),
            ego_voxels=self.ego_voxels | other.ego_voxels,
        )

    def to_dict(self) -> dict:
        return {
            "num_scenes": self.num_scenes,
            "num_agents": self.num_agents,
            "agents_per_scene": {str(k): v for k, v in self.agents_per_scene.items()},
            "predict_counts": dict(self.predict_counts),
            "predict_shares": self.predict_shares(),
            "max_speed_histogram": {repr(float(k)): v for k, v in sorted(self.max_speed.items())},
            "unique_voxels_25m": self.unique_voxels,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def histograms_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["table", "bin", "count"])
        for k, v in self.agents_per_scene.items():
            w.writerow(["agents_per_scene", k, v])
        for k, v in sorted(self.max_speed.items()):
            w.writerow(["max_speed_mps", repr(float(k)), v])
        for k, v in self.predict_counts.items():
            w.writerow(["predict_type", k, v])
        return buf.getvalue()


def scenario_stats(scenario: Scenario) -> CorpusStats:
    stats = CorpusStats(num_scenes=1, num_agents=len(scenario.tracks))
    stats.agents_per_scene[agent_bucket(len(scenario.tracks))] += 1
    by_id = scenario.track_by_id
    for entry in scenario.predict_list:
        stats.predict_counts[by_id[entry.object_id].object_type.value] += 1
    for track in scenario.tracks:
        speeds = np.hypot(*track.velocity[track.valid].T)
        b = speed_bin(float(speeds.max()))
        stats.max_speed[b] = stats.max_speed.get(b, 0) + 1
    ego = scenario.sdc_track()
    if ego is not None:
        cells = np.floor(ego.xy[ego.valid] / VOXEL_SIZE).astype(np.int64)
        stats.ego_voxels = frozenset(map(tuple, cells.tolist()))
    return stats


def corpus_stats(scenarios: Iterable[Scenario]) -> CorpusStats:
    """Summary histograms over a corpus; an empty corpus yields zeroed stats."""
    total = CorpusStats()
    for s in scenarios:
        total = total.merge(scenario_stats(s))
    return total
