"""Simulated sign/obstacle detector with weather effects and drift injection.

Scene geometry stands in for camera frames: each object ahead of the
vehicle gets a pinhole-style bounding box, a weather- and range-dependent
chance of being detected, and a sampled confidence. Drift injectors then
perturb the detection stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum

import numpy as np


class ObjectClass(IntEnum):
    SpeedLimit30 = 0
    SpeedLimit90 = 1
    Obstacle = 2

    @property
    def speed_limit_kmh(self) -> float | None:
        return {ObjectClass.SpeedLimit30: 30.0, ObjectClass.SpeedLimit90: 90.0}.get(self)

    @classmethod
    def parse(cls, value) -> ObjectClass:
        if isinstance(value, cls):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        try:
            return cls[str(value).strip()]
        except KeyError:
            raise ValueError(f"unknown object class: {value!r}") from None


class Condition(str, Enum):
    Clear = "Clear"
    Fog = "Fog"


CLEAR_VISIBILITY_M = 200.0


@dataclass(frozen=True)
class SceneObject:
    object_class: ObjectClass
    position: float
    width_m: float = 1.0
    height_m: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "object_class", ObjectClass.parse(self.object_class))
        if self.position < 0:
            raise ValueError(f"object position must be >= 0, got {self.position}")
        if self.width_m <= 0 or self.height_m <= 0:
            raise ValueError("object dimensions must be > 0")


@dataclass(frozen=True)
class WeatherState:
    condition: Condition = Condition.Clear
    visibility_m: float = CLEAR_VISIBILITY_M
    sun_altitude_deg: float = 45.0

    def __post_init__(self):
        object.__setattr__(self, "condition", Condition(self.condition))
        if not self.visibility_m > 0:
            raise ValueError(f"visibility_m must be > 0, got {self.visibility_m}")
        if self.condition is Condition.Fog and self.visibility_m > CLEAR_VISIBILITY_M:
            raise ValueError("fog visibility cannot exceed the clear-weather default")

    @classmethod
    def clear(cls) -> WeatherState:
        return cls(Condition.Clear, CLEAR_VISIBILITY_M, 45.0)

    @classmethod
    def fog(cls, visibility_m: float = 60.0) -> WeatherState:
        return cls(Condition.Fog, visibility_m, 5.0)


@dataclass(frozen=True)
class Detection:
    """One detector output. ``truth_id`` is for scoring only."""

    class_id: int
    class_name: str
    confidence: float
    bbox: tuple  # normalized (cx, cy, w, h)
    stamp: float
    truth_id: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0, 1]: {self.confidence}")
        if len(self.bbox) != 4 or not all(0.0 <= c <= 1.0 for c in self.bbox):
            raise ValueError(f"bbox components must lie in [0, 1]: {self.bbox}")
        if not (self.bbox[2] > 0 and self.bbox[3] > 0):
            raise ValueError(f"bbox width and height must be > 0: {self.bbox}")

    @property
    def object_class(self) -> ObjectClass:
        return ObjectClass(self.class_id)


DRIFT_KINDS = ("None", "Covariate", "PriorShift", "Concept")


@dataclass(frozen=True)
class DriftSpec:
    """Drift injector configuration.

    Covariate uses ``confidence_scale``, ``miss_rate_boost`` and
    ``bbox_jitter_sigma``; PriorShift uses ``class_weights`` (classes left out
    keep weight 1); Concept uses ``relabel`` (classes left out map to themselves).
    """

    kind: str = "None"
    confidence_scale: float = 1.0
    miss_rate_boost: float = 0.0
    bbox_jitter_sigma: float = 0.0
    class_weights: dict = field(default_factory=dict)
    relabel: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise ValueError(f"drift kind must be one of {DRIFT_KINDS}, got {self.kind!r}")
        if not 0.0 < self.confidence_scale <= 1.0:
            raise ValueError("confidence_scale must be in (0, 1]")
        if not 0.0 <= self.miss_rate_boost < 1.0:
            raise ValueError("miss_rate_boost must be in [0, 1)")
        if self.bbox_jitter_sigma < 0:
            raise ValueError("bbox_jitter_sigma must be >= 0")
        weights = {ObjectClass.parse(k): float(v) for k, v in self.class_weights.items()}
        if any(w < 0 or not math.isfinite(w) for w in weights.values()):
            raise ValueError("class weights must be finite and >= 0")
        if self.kind == "PriorShift":
            full = {c: weights.get(c, 1.0) for c in ObjectClass}
            if not any(full.values()):
                raise ValueError("class weights must not all be zero")
        relabel = {ObjectClass.parse(k): ObjectClass.parse(v) for k, v in self.relabel.items()}
        object.__setattr__(self, "class_weights", weights)
        object.__setattr__(self, "relabel", relabel)

    def weight(self, cls: ObjectClass) -> float:
        return self.class_weights.get(cls, 1.0)

    def relabeled(self, cls: ObjectClass) -> ObjectClass:
        return self.relabel.get(cls, cls)


NO_DRIFT = DriftSpec()


@dataclass(frozen=True)
class PerceptionConfig:
    """Detector tuning knobs. Defaults describe a healthy detector, not measured data."""

    p_base: dict = field(default_factory=lambda: {Condition.Clear: 0.98, Condition.Fog: 0.90})
    confidence_mean: dict = field(default_factory=lambda: {Condition.Clear: 0.92,
                                                           Condition.Fog: 0.85})
    confidence_std: float = 0.04
    max_range_m: float = 150.0
    focal_norm: float = 25.0
    norm_divisor: float = 100.0
    bbox_noise_rel: float = 0.05


DEFAULT_PERCEPTION = PerceptionConfig()


def project_bbox(vehicle, obj: SceneObject, config: PerceptionConfig = DEFAULT_PERCEPTION):
    """Normalized (cx, cy, w, h) of ``obj`` as seen from ``vehicle``, or None.

    Box size scales with 1/distance and is capped at the full frame; objects
    behind the vehicle or beyond ``max_range_m`` are not visible.
    """
    distance = obj.position - vehicle.position
    if distance < 0 or distance > config.max_range_m:
        return None
    scale = config.focal_norm / config.norm_divisor
    w = min(1.0, scale * obj.width_m / distance) if distance > 0 else 1.0
    h = min(1.0, scale * obj.height_m / distance) if distance > 0 else 1.0
    return (0.5, 0.5, w, h)


def detection_probability(weather: WeatherState, distance: float,
                          config: PerceptionConfig = DEFAULT_PERCEPTION) -> float:
    if distance < 0:
        raise ValueError(f"distance must be >= 0, got {distance}")
    p_base = config.p_base[weather.condition]
    return p_base * max(0.0, 1.0 - distance / weather.visibility_m)


def _beta_params(mean: float, std: float) -> tuple[float, float]:
    k = mean * (1.0 - mean) / std**2 - 1.0
    if not 0.0 < mean < 1.0 or k <= 0:
        raise ValueError(f"no beta distribution with mean {mean} and std {std}")
    return mean * k, (1.0 - mean) * k


def _clip_box(cx, cy, w, h) -> tuple:
    return (float(min(max(cx, 0.0), 1.0)), float(min(max(cy, 0.0), 1.0)),
            float(min(max(w, 1e-6), 1.0)), float(min(max(h, 1e-6), 1.0)))


def sense(vehicle, scene, weather: WeatherState, drift: DriftSpec, rng: np.random.Generator,
          config: PerceptionConfig = DEFAULT_PERCEPTION, now: float | None = None) -> list[Detection]:
    """Run one detector frame over ``scene``.

    Random draws happen in scene order, so a fixed ``rng`` seed reproduces
    the output exactly.
    """
    stamp = vehicle.time if now is None else now
    a, b = _beta_params(config.confidence_mean[weather.condition], config.confidence_std)
    detections = []
    for truth_id, obj in enumerate(scene):
        box = project_bbox(vehicle, obj, config)
        if box is None:
            continue
        p = detection_probability(weather, obj.position - vehicle.position, config)
        if rng.random() >= p:
            continue
        confidence = float(rng.beta(a, b))
        cx, cy, w, h = box
        if config.bbox_noise_rel > 0:
            noise = rng.normal(0.0, config.bbox_noise_rel, size=4)
            cx, cy = cx + noise[0] * w, cy + noise[1] * h
            w, h = w * (1.0 + noise[2]), h * (1.0 + noise[3])
        cls = obj.object_class
        detections.append(Detection(int(cls), cls.name, confidence, _clip_box(cx, cy, w, h),
                                    stamp, truth_id))
    return apply_drift(detections, drift, rng)


def apply_drift(detections, drift: DriftSpec, rng: np.random.Generator) -> list[Detection]:
    if drift.kind == "None":
        return list(detections)

    if drift.kind == "Covariate":
        out = []
        for det in detections:
            if drift.miss_rate_boost > 0 and rng.random() < drift.miss_rate_boost:
                continue
            box = det.bbox
            if drift.bbox_jitter_sigma > 0:
                box = _clip_box(*(np.asarray(box) + rng.normal(0.0, drift.bbox_jitter_sigma, 4)))
            confidence = min(1.0, max(0.0, det.confidence * drift.confidence_scale))
            out.append(replace(det, confidence=float(confidence), bbox=box))
        return out

    if drift.kind == "PriorShift":
        top = max(drift.weight(c) for c in ObjectClass)
        out = []
        for det in detections:
            keep = drift.weight(det.object_class) / top
            if keep >= 1.0 or rng.random() < keep:
                out.append(det)
        return out

    # Concept
    out = []
    for det in detections:
        cls = drift.relabeled(det.object_class)
        out.append(replace(det, class_id=int(cls), class_name=cls.name))
    return out
