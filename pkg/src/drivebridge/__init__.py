"""Desk-scale perception -> decision -> control driving pipeline simulator."""

from .bus import Bus, MessageEnvelope, RegistryRecord
from .controller import (ControllerState, SpeedMapping, control_accel, on_detection,
                         settling_time, tick)
from .metrics import (MetricsReport, average_precision, evaluate, iou, match_detections,
                      response_latency, speed_profile_stats)
from .perception import (Detection, DriftSpec, ObjectClass, SceneObject, WeatherState,
                         apply_drift, detection_probability, project_bbox, sense)
from .plant import DriveCommand, VehicleState, clamp_accel, step
from .scenario import ScenarioSpec, load_scenario, paper_replica_spec, run, simulate

__version__ = "0.1.0"
