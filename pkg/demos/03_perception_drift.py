# coding: utf-8

# # Simulated perception and data drift
#
# The detector sees a sign with a probability that falls off with distance and
# visibility. Drift modes then perturb the detections: covariate (lower
# confidence, more misses, box jitter), prior shift (class subsampling) and
# concept (relabelling).

# In[1]:

import numpy as np

from drivebridge import DriftSpec, ObjectClass, SceneObject, VehicleState, WeatherState, sense
from drivebridge.perception import detection_probability

for d in (10, 30, 50, 100):
    print(f"{d:4d} m  clear p={detection_probability(WeatherState.clear(), d):.3f}"
          f"  fog p={detection_probability(WeatherState.fog(60), d):.3f}")


# Run 2000 frames of a sign at 20 m under each drift mode and count what comes out.

# In[2]:

scene = [SceneObject(ObjectClass.SpeedLimit30, 20.0)]
drifts = {
    "none": DriftSpec(),
    "covariate": DriftSpec("Covariate", confidence_scale=0.8, miss_rate_boost=0.3),
    "prior shift": DriftSpec("PriorShift", class_weights={ObjectClass.SpeedLimit30: 0.25}),
    "concept": DriftSpec("Concept", relabel={ObjectClass.SpeedLimit30: ObjectClass.SpeedLimit90}),
}
for name, drift in drifts.items():
    rng = np.random.default_rng(0)
    dets = [d for k in range(2000)
            for d in sense(VehicleState(), scene, WeatherState.clear(), drift, rng, now=k * 0.1)]
    conf = np.mean([d.confidence for d in dets]) if dets else float("nan")
    labels = sorted({d.object_class.name for d in dets})
    print(f"{name:12s} detections={len(dets):5d} mean conf={conf:.3f} labels={labels}")
