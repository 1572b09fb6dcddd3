"""1-D longitudinal point-mass vehicle model."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

MAX_ACCEL = 6.0
MAX_DECEL = -6.0


@dataclass(frozen=True)
class VehicleState:
    """Kinematic state of the ego vehicle along a straight track.

    ``acceleration`` is the (clamped) value applied during the last step.
    """

    position: float = 0.0
    speed: float = 0.0
    acceleration: float = 0.0
    time: float = 0.0

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        if self.position < 0:
            raise ValueError(f"position must be >= 0, got {self.position}")


@dataclass(frozen=True)
class DriveCommand:
    """Ackermann-style drive command. Steering is always zero on a 1-D track."""

    target_speed: float
    accel: float
    steering: float = 0.0
    stamp: float = 0.0

    def __post_init__(self):
        if self.target_speed < 0:
            raise ValueError(f"target_speed must be >= 0, got {self.target_speed}")
        if self.steering != 0.0:
            raise ValueError("steering must be 0")


def clamp_accel(a_cmd: float) -> float:
    """Limit a commanded acceleration to [-6, 6] m/s^2."""
    if not math.isfinite(a_cmd):
        raise ValueError(f"acceleration must be finite, got {a_cmd}")
    return min(max(a_cmd, MAX_DECEL), MAX_ACCEL)


def step(state: VehicleState, cmd: DriveCommand, dt: float) -> VehicleState:
    """Advance the vehicle by ``dt`` seconds under ``cmd``.

    Speed is floored at zero (no reverse); position uses the mean of the
    old and new speed, which is exact for constant acceleration.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    a = clamp_accel(cmd.accel)
    v_new = max(0.0, state.speed + a * dt)
    x_new = state.position + 0.5 * (state.speed + v_new) * dt
    return replace(state, position=x_new, speed=v_new, acceleration=a,
                   time=state.time + dt)
