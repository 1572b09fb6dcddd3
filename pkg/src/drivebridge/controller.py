"""Speed-adaptation decision logic and the saturated proportional speed law."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .perception import Detection, ObjectClass
from .plant import MAX_ACCEL, MAX_DECEL, DriveCommand

GAIN = 0.7
CONTROL_PERIOD_S = 0.1

MAINTAIN = "Maintain"
ADAPT = "Adapt"
STOPPING = "Stopping"


def kmh_to_ms(v: float) -> float:
    return v / 3.6


def ms_to_kmh(v: float) -> float:
    return v * 3.6


@dataclass(frozen=True)
class SpeedMapping:
    """Detected limit (km/h) -> commanded target (km/h)."""

    entries: tuple = ((30.0, 25.0), (90.0, 80.0))

    def __post_init__(self):
        items = self.entries.items() if isinstance(self.entries, dict) else self.entries
        entries = tuple(sorted((float(k), float(v)) for k, v in items))
        for limit, target in entries:
            if not 0 < target <= limit:
                raise ValueError(f"mapping {limit:g}->{target:g} must satisfy 0 < target <= limit")
        object.__setattr__(self, "entries", entries)

    def get(self, limit_kmh: float) -> float | None:
        for limit, target in self.entries:
            if limit == limit_kmh:
                return target
        return None

    def as_dict(self) -> dict:
        return dict(self.entries)


DEFAULT_MAPPING = SpeedMapping()


@dataclass(frozen=True)
class ControllerState:
    mode: str = MAINTAIN
    target_speed: float = 0.0
    last_detection_stamp: float | None = None
    confidence_threshold: float = 0.5
    active_limit_kmh: float | None = None
    cruise_speed: float = 0.0
    last_obstacle_stamp: float | None = None
    hold_time: float = 2.0
    warnings: int = 0

    def __post_init__(self):
        if self.target_speed < 0:
            raise ValueError("target_speed must be >= 0")
        if self.mode == STOPPING and self.target_speed != 0:
            raise ValueError("Stopping mode requires target_speed == 0")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in [0, 1]")


def control_accel(current_speed: float, target_speed: float) -> float:
    """Acceleration command: 0.7 times the speed error, saturated to +-6 m/s^2."""
    if not (math.isfinite(current_speed) and math.isfinite(target_speed)):
        raise ValueError("speeds must be finite")
    return min(max(GAIN * (target_speed - current_speed), MAX_DECEL), MAX_ACCEL)


def on_detection(state: ControllerState, det: Detection,
                 mapping: SpeedMapping = DEFAULT_MAPPING) -> ControllerState:
    """Fold one detection into the controller state.

    Detections under the confidence gate, and repeats of the limit already
    in force, return ``state`` itself.
    """
    if det.confidence < state.confidence_threshold:
        return state
    cls = ObjectClass(det.class_id)
    if cls is ObjectClass.Obstacle:
        return replace(state, mode=STOPPING, target_speed=0.0,
                       last_obstacle_stamp=det.stamp, last_detection_stamp=det.stamp)

    limit = cls.speed_limit_kmh
    target_kmh = mapping.get(limit)
    if target_kmh is None:
        return replace(state, warnings=state.warnings + 1)
    if state.mode == STOPPING:
        # remembered for when the stop is released
        return replace(state, active_limit_kmh=limit, last_detection_stamp=det.stamp)
    if limit == state.active_limit_kmh:
        return state
    return replace(state, mode=ADAPT, target_speed=kmh_to_ms(target_kmh),
                   active_limit_kmh=limit, last_detection_stamp=det.stamp)


def release_stop(state: ControllerState, now: float,
                 mapping: SpeedMapping = DEFAULT_MAPPING) -> ControllerState:
    """Leave Stopping once no obstacle has been seen for ``hold_time`` seconds."""
    if state.mode != STOPPING or now - state.last_obstacle_stamp < state.hold_time:
        return state
    if state.active_limit_kmh is not None and mapping.get(state.active_limit_kmh) is not None:
        return replace(state, mode=ADAPT,
                       target_speed=kmh_to_ms(mapping.get(state.active_limit_kmh)))
    return replace(state, mode=MAINTAIN, target_speed=state.cruise_speed)


def set_cruise(state: ControllerState, speed: float) -> ControllerState:
    """Operator set-speed request. Ignored for the target while stopping."""
    if speed < 0:
        raise ValueError("cruise speed must be >= 0")
    if state.mode == STOPPING:
        return replace(state, cruise_speed=speed)
    return replace(state, mode=MAINTAIN, target_speed=speed, cruise_speed=speed)


def tick(state: ControllerState, vehicle_speed: float, now: float) -> DriveCommand:
    return DriveCommand(target_speed=state.target_speed,
                        accel=control_accel(vehicle_speed, state.target_speed),
                        steering=0.0, stamp=now)


def settling_time(v0: float, v_target: float, epsilon: float,
                  gain: float = GAIN, a_max: float = MAX_ACCEL) -> float:
    """Continuous-time time for ``dv/dt = clamp(gain*(v_target - v))`` to enter the epsilon band.

    While ``gain*|error|`` exceeds ``a_max`` the error shrinks linearly at
    ``a_max``; after that it decays exponentially at rate ``gain``.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    err = abs(v_target - v0)
    if err <= epsilon:
        return 0.0
    knee = a_max / gain
    t = 0.0
    if err > knee:
        if epsilon >= knee:
            return (err - epsilon) / a_max
        t = (err - knee) / a_max
        err = knee
    return t + math.log(err / epsilon) / gain
