from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Tuple


class ShapeBucket(str, Enum):
    STATIONARY = "stationary"
    STRAIGHT = "straight"
    STRAIGHT_LEFT = "straight_left"
    STRAIGHT_RIGHT = "straight_right"
    LEFT = "left"
    RIGHT = "right"
    LEFT_U_TURN = "left_u_turn"
    RIGHT_U_TURN = "right_u_turn"


AP_FIRST_MATCH = "first_match"
AP_TOP_ONLY = "top_only"


def _default_thresholds() -> Dict[int, Tuple[float, float]]:
    # horizon seconds -> (lateral, longitudinal) base thresholds in meters
    return {3: (1.0, 2.0), 5: (1.8, 3.6), 8: (3.0, 6.0)}


@dataclass(frozen=True)
class MetricsConfig:
    """Constants shared by every metric.

    Thresholds exist only at the configured horizons; there is no
    interpolation between them.
    """

    step_seconds: float = 0.1
    thresholds: Dict[int, Tuple[float, float]] = field(default_factory=_default_thresholds)
    speed_lower: float = 1.4
    speed_upper: float = 11.0
    iou_eps: float = 1e-6
    ap_protocol: str = AP_FIRST_MATCH
    # shape bucketing
    stationary_displacement: float = 2.0
    u_turn_angle: float = math.radians(135.0)
    turn_angle: float = math.radians(45.0)
    lateral_offset: float = 3.0

    def __post_init__(self) -> None:
        if not self.speed_upper > self.speed_lower > 0:
            raise ValueError("need speed_upper > speed_lower > 0")
        prev = (0.0, 0.0)
        for horizon in sorted(self.thresholds):
            lat, lon = self.thresholds[horizon]
            if lat <= 0 or lon <= 0:
                raise ValueError(f"thresholds at {horizon}s must be positive")
            if lat < prev[0] or lon < prev[1]:
                raise ValueError("thresholds must be nondecreasing in horizon")
            prev = (lat, lon)
        if self.ap_protocol not in (AP_FIRST_MATCH, AP_TOP_ONLY):
            raise ValueError(f"unknown AP protocol {self.ap_protocol!r}")

    @property
    def horizons(self) -> Tuple[int, ...]:
        return tuple(sorted(self.thresholds))

    def horizon_steps(self, horizon_s: int) -> int:
        if horizon_s not in self.thresholds:
            raise KeyError(f"no thresholds defined at {horizon_s}s (have {self.horizons})")
        return int(round(horizon_s / self.step_seconds))

    def lateral_longitudinal(self, horizon_s: int) -> Tuple[float, float]:
        if horizon_s not in self.thresholds:
            raise KeyError(f"no thresholds defined at {horizon_s}s (have {self.horizons})")
        return self.thresholds[horizon_s]
