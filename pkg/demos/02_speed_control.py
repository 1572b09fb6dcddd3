# coding: utf-8

# # Proportional speed control
#
# The controller commands `a = clamp(0.7 * (v_target - v), -6, 6)` in m/s^2.
# Large errors saturate, then the error decays by a factor 0.93 per 0.1 s tick.

# In[1]:

import numpy as np

from drivebridge import DriveCommand, VehicleState, control_accel, settling_time, step
from drivebridge.controller import kmh_to_ms, ms_to_kmh

v = 20.0
for dv in (8.5, 20.0, -15.0, 0.0):
    print(f"dv = {dv:6.1f} m/s -> a = {control_accel(v, v + dv):+.2f} m/s^2")


# Closed loop: 49.4 km/h towards an 80 km/h target, stepping the plant at 10 Hz.

# In[2]:

target = kmh_to_ms(80.0)
eps = kmh_to_ms(1.0)
state = VehicleState(speed=kmh_to_ms(49.4))
speeds = [state.speed]
while abs(state.speed - target) > eps:
    cmd = DriveCommand(target_speed=target, accel=control_accel(state.speed, target))
    state = step(state, cmd, 0.1)
    speeds.append(state.speed)

print(f"discrete loop settles in {state.time:.1f} s")
print(f"continuous-time estimate {settling_time(kmh_to_ms(49.4), target, eps):.3f} s")
print("speed (km/h) every second:", np.round([ms_to_kmh(v) for v in speeds[::10]], 1))


# The same for braking from 40 to 25 km/h.

# In[3]:

print(f"40 -> 25 km/h: {settling_time(kmh_to_ms(40.0), kmh_to_ms(25.0), eps):.3f} s (continuous)")
