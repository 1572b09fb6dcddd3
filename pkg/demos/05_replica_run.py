# coding: utf-8

# # End-to-end run: two speed-limit signs
#
# The vehicle starts at 40 km/h. A 30 sign appears in fog and the controller
# brakes to 25 km/h; the operator then sets 49.4 km/h, and once the weather
# clears a 90 sign raises the target to 80 km/h.

# In[1]:

from pathlib import Path

from drivebridge import paper_replica_spec, simulate
from drivebridge.controller import kmh_to_ms
from drivebridge.plot import speed_profile_svg
from drivebridge.summary import summarize

result = simulate(paper_replica_spec())
summary = summarize(result.trace, initial_speed=kmh_to_ms(result.spec.initial_speed_kmh))
for phase in summary["phases"]:
    print(f"t={phase['start_time']:5.1f} s  {phase['start_speed_kmh']:5.1f} -> "
          f"{phase['target_kmh']:5.1f} km/h  settles in {phase['settling_time_s']:.1f} s")


# Perception-to-command latency for each sign, and the built-in checks.

# In[2]:

for s in summary["latency_samples"]:
    print(f"sign -> {s['target_kmh']:.0f} km/h, latency {s['latency']:.2f} s")
print(summary["acceptance"])


# Write the speed profile next to this script.

# In[3]:

out = Path(__file__).with_name("speed_profile.svg")
out.write_text(speed_profile_svg(result.trace, "Two-sign run"))
print("wrote", out)
