"""Scenario files, builtin scenarios and the deterministic tick loop.

Scenario files are line-oriented ``key = value`` text split into sections::

    [scenario]          name, seed, duration_s, tick_hz, initial_speed_kmh,
                        track_length_m, confidence_threshold, hold_time_s,
                        queue_capacity
    [object.N]          class, position_m, width_m, height_m
    [weather.N]         time_s, condition, visibility_m, sun_altitude_deg
    [setpoint.N]        time_s, speed_kmh
    [drift]             kind, confidence_scale, miss_rate_boost,
                        bbox_jitter_sigma, weight.<Class>, relabel.<Class>
    [mapping]           <limit_kmh> = <target_kmh>
    [perception]        p_base_clear, p_base_fog, confidence_mean_clear,
                        confidence_mean_fog, confidence_std, max_range_m,
                        bbox_noise_rel

Each tick runs weather -> sense -> decide -> act, publishing on
``/weather_control``, ``/detections``, ``/ackermann_cmd`` and
``/vehicle_state`` in that order. The clock is logical: tick k is at k/tick_hz.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from . import controller as ctl
from . import trace as tr
from .bus import DEFAULT_QUEUE_CAPACITY, Bus
from .perception import (DEFAULT_PERCEPTION, NO_DRIFT, Condition, DriftSpec, ObjectClass,
                         PerceptionConfig, SceneObject, WeatherState, project_bbox, sense)
from .plant import DriveCommand, VehicleState, step

DETECTIONS = "/detections"
COMMANDS = "/ackermann_cmd"
VEHICLE_STATE = "/vehicle_state"
WEATHER = "/weather_control"


class ScenarioParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{key + ': ' if key else ''}{message}")


class ScenarioValidationError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    duration_s: float
    initial_speed_kmh: float
    name: str = "unnamed"
    tick_hz: float = 10.0
    track_length_m: float = 2000.0
    objects: tuple = ()
    weather_schedule: tuple = ((0.0, WeatherState.clear()),)
    setpoint_schedule: tuple = ()  # (time_s, speed_kmh) operator set-speed requests
    drift: DriftSpec = NO_DRIFT
    mapping: ctl.SpeedMapping = ctl.DEFAULT_MAPPING
    confidence_threshold: float = 0.5
    hold_time_s: float = 2.0
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY
    perception: PerceptionConfig = DEFAULT_PERCEPTION

    def validate(self) -> ScenarioSpec:
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ScenarioValidationError("seed must be an unsigned integer")
        if not self.duration_s > 0:
            raise ScenarioValidationError("duration_s must be > 0")
        if not self.tick_hz > 0:
            raise ScenarioValidationError("tick_hz must be > 0")
        if not self.initial_speed_kmh >= 0:
            raise ScenarioValidationError("initial_speed_kmh must be >= 0")
        if not self.track_length_m > 0:
            raise ScenarioValidationError("track_length_m must be > 0")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ScenarioValidationError("confidence_threshold must be in [0, 1]")
        if self.queue_capacity < 1:
            raise ScenarioValidationError("queue_capacity must be >= 1")
        for obj in self.objects:
            if obj.position > self.track_length_m:
                raise ScenarioValidationError(
                    f"{obj.object_class.name} at {obj.position} m is beyond the track end")
        for label, schedule in (("weather", self.weather_schedule),
                                ("setpoint", self.setpoint_schedule)):
            times = [t for t, _ in schedule]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ScenarioValidationError(f"{label} schedule times must be strictly increasing")
            if any(t < 0 for t in times):
                raise ScenarioValidationError(f"{label} schedule times must be >= 0")
        return self

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration_s * self.tick_hz))


# --- file format ----------------------------------------------------------

_SECTION_RE = re.compile(r"^\[([A-Za-z_]+)(?:\.(\d+))?\]$")


def _parse_sections(text: str):
    sections = []  # (kind, index, {key: (value, line)}, line)
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            current = (m.group(1), m.group(2), {}, lineno)
            sections.append(current)
            continue
        if current is None:
            raise ScenarioParseError("key outside of any section", lineno)
        if "=" not in line:
            raise ScenarioParseError("expected 'key = value'", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ScenarioParseError("empty key", lineno)
        if key in current[2]:
            raise ScenarioParseError("duplicate key", lineno, key)
        current[2][key] = (value, lineno)
    return sections


class _Fields:
    """Typed, line-aware access to one section's keys."""

    def __init__(self, kind, values, line):
        self.kind = kind
        self.values = values
        self.line = line
        self.used = set()

    def get(self, key, conv, default=None, required=False):
        if key not in self.values:
            if required:
                raise ScenarioParseError(f"missing required key in [{self.kind}]", self.line, key)
            return default
        self.used.add(key)
        value, line = self.values[key]
        try:
            return conv(value)
        except (ValueError, KeyError) as exc:
            raise ScenarioParseError(f"bad value {value!r} ({exc})", line, key) from None

    def prefixed(self, prefix):
        for key, (value, line) in self.values.items():
            if key.startswith(prefix):
                self.used.add(key)
                yield key[len(prefix):], value, line

    def check_unused(self):
        for key, (_, line) in self.values.items():
            if key not in self.used:
                raise ScenarioParseError(f"unknown key in [{self.kind}]", line, key)


def _uint(text):
    value = int(text)
    if value < 0:
        raise ValueError("must be >= 0")
    return value


def load_scenario(text: str) -> ScenarioSpec:
    """Parse and validate a scenario file's text."""
    sections = _parse_sections(text)
    head = None
    objects, weather, setpoints = [], [], []
    drift = NO_DRIFT
    mapping = ctl.DEFAULT_MAPPING
    perception = DEFAULT_PERCEPTION
    seen = set()
    for kind, index, values, line in sections:
        key = (kind, index)
        if key in seen:
            raise ScenarioParseError(f"duplicate section [{kind}{'.' + index if index else ''}]",
                                     line)
        seen.add(key)
        f = _Fields(kind, values, line)
        indexed = kind in ("object", "weather", "setpoint")
        if indexed != (index is not None):
            raise ScenarioParseError(f"section [{kind}] {'needs' if indexed else 'takes no'} index",
                                     line)
        if kind == "scenario":
            head = dict(
                seed=f.get("seed", _uint, required=True),
                duration_s=f.get("duration_s", float, required=True),
                initial_speed_kmh=f.get("initial_speed_kmh", float, required=True),
                name=f.get("name", str, "unnamed"),
                tick_hz=f.get("tick_hz", float, 10.0),
                track_length_m=f.get("track_length_m", float, 2000.0),
                confidence_threshold=f.get("confidence_threshold", float, 0.5),
                hold_time_s=f.get("hold_time_s", float, 2.0),
                queue_capacity=f.get("queue_capacity", int, DEFAULT_QUEUE_CAPACITY),
            )
        elif kind == "object":
            try:
                obj = SceneObject(f.get("class", ObjectClass.parse, required=True),
                                  f.get("position_m", float, required=True),
                                  f.get("width_m", float, 1.0), f.get("height_m", float, 1.0))
            except ValueError as exc:
                if isinstance(exc, ScenarioParseError):
                    raise
                raise ScenarioValidationError(f"[object.{index}] {exc}") from None
            objects.append((int(index), obj))
        elif kind == "weather":
            cond = f.get("condition", Condition, required=True)
            default_vis = 60.0 if cond is Condition.Fog else WeatherState.clear().visibility_m
            default_sun = 5.0 if cond is Condition.Fog else 45.0
            try:
                state = WeatherState(cond, f.get("visibility_m", float, default_vis),
                                     f.get("sun_altitude_deg", float, default_sun))
            except ValueError as exc:
                raise ScenarioValidationError(f"[weather.{index}] {exc}") from None
            weather.append((int(index), (f.get("time_s", float, required=True), state)))
        elif kind == "setpoint":
            setpoints.append((int(index), (f.get("time_s", float, required=True),
                                           f.get("speed_kmh", float, required=True))))
        elif kind == "drift":
            weights = {}
            for cls, value, ln in f.prefixed("weight."):
                try:
                    weights[ObjectClass.parse(cls)] = float(value)
                except ValueError as exc:
                    raise ScenarioParseError(str(exc), ln, "weight." + cls) from None
            relabel = {}
            for cls, value, ln in f.prefixed("relabel."):
                try:
                    relabel[ObjectClass.parse(cls)] = ObjectClass.parse(value)
                except ValueError as exc:
                    raise ScenarioParseError(str(exc), ln, "relabel." + cls) from None
            try:
                drift = DriftSpec(kind=f.get("kind", str, "None"),
                                  confidence_scale=f.get("confidence_scale", float, 1.0),
                                  miss_rate_boost=f.get("miss_rate_boost", float, 0.0),
                                  bbox_jitter_sigma=f.get("bbox_jitter_sigma", float, 0.0),
                                  class_weights=weights, relabel=relabel)
            except ValueError as exc:
                if isinstance(exc, ScenarioParseError):
                    raise
                raise ScenarioValidationError(f"[drift] {exc}") from None
        elif kind == "mapping":
            entries = {}
            for k, (value, ln) in values.items():
                try:
                    entries[float(k)] = float(value)
                except ValueError:
                    raise ScenarioParseError(f"bad mapping entry {value!r}", ln, k) from None
                f.used.add(k)
            try:
                mapping = ctl.SpeedMapping(entries)
            except ValueError as exc:
                raise ScenarioValidationError(f"[mapping] {exc}") from None
        elif kind == "perception":
            d = DEFAULT_PERCEPTION
            perception = PerceptionConfig(
                p_base={Condition.Clear: f.get("p_base_clear", float, d.p_base[Condition.Clear]),
                        Condition.Fog: f.get("p_base_fog", float, d.p_base[Condition.Fog])},
                confidence_mean={
                    Condition.Clear: f.get("confidence_mean_clear", float,
                                           d.confidence_mean[Condition.Clear]),
                    Condition.Fog: f.get("confidence_mean_fog", float,
                                         d.confidence_mean[Condition.Fog])},
                confidence_std=f.get("confidence_std", float, d.confidence_std),
                max_range_m=f.get("max_range_m", float, d.max_range_m),
                bbox_noise_rel=f.get("bbox_noise_rel", float, d.bbox_noise_rel),
            )
        else:
            raise ScenarioParseError(f"unknown section [{kind}]", line)
        f.check_unused()

    if head is None:
        raise ScenarioParseError("missing [scenario] section")
    spec = ScenarioSpec(
        **head,
        objects=tuple(obj for _, obj in sorted(objects, key=lambda p: p[0])),
        weather_schedule=tuple(w for _, w in sorted(weather, key=lambda p: p[0]))
        or ((0.0, WeatherState.clear()),),
        setpoint_schedule=tuple(s for _, s in sorted(setpoints, key=lambda p: p[0])),
        drift=drift, mapping=mapping, perception=perception,
    )
    return spec.validate()


def dump_scenario(spec: ScenarioSpec) -> str:
    """Inverse of :func:`load_scenario`."""
    lines = ["[scenario]",
             f"name = {spec.name}",
             f"seed = {spec.seed}",
             f"duration_s = {spec.duration_s!r}",
             f"tick_hz = {spec.tick_hz!r}",
             f"initial_speed_kmh = {spec.initial_speed_kmh!r}",
             f"track_length_m = {spec.track_length_m!r}",
             f"confidence_threshold = {spec.confidence_threshold!r}",
             f"hold_time_s = {spec.hold_time_s!r}",
             f"queue_capacity = {spec.queue_capacity}"]
    for i, obj in enumerate(spec.objects):
        lines += ["", f"[object.{i}]", f"class = {obj.object_class.name}",
                  f"position_m = {obj.position!r}", f"width_m = {obj.width_m!r}",
                  f"height_m = {obj.height_m!r}"]
    for i, (t, w) in enumerate(spec.weather_schedule):
        lines += ["", f"[weather.{i}]", f"time_s = {t!r}", f"condition = {w.condition.value}",
                  f"visibility_m = {w.visibility_m!r}", f"sun_altitude_deg = {w.sun_altitude_deg!r}"]
    for i, (t, v) in enumerate(spec.setpoint_schedule):
        lines += ["", f"[setpoint.{i}]", f"time_s = {t!r}", f"speed_kmh = {v!r}"]
    d = spec.drift
    lines += ["", "[drift]", f"kind = {d.kind}", f"confidence_scale = {d.confidence_scale!r}",
              f"miss_rate_boost = {d.miss_rate_boost!r}",
              f"bbox_jitter_sigma = {d.bbox_jitter_sigma!r}"]
    lines += [f"weight.{c.name} = {w!r}" for c, w in d.class_weights.items()]
    lines += [f"relabel.{a.name} = {b.name}" for a, b in d.relabel.items()]
    lines += ["", "[mapping]"] + [f"{k!r} = {v!r}" for k, v in spec.mapping.entries]
    p = spec.perception
    lines += ["", "[perception]",
              f"p_base_clear = {p.p_base[Condition.Clear]!r}",
              f"p_base_fog = {p.p_base[Condition.Fog]!r}",
              f"confidence_mean_clear = {p.confidence_mean[Condition.Clear]!r}",
              f"confidence_mean_fog = {p.confidence_mean[Condition.Fog]!r}",
              f"confidence_std = {p.confidence_std!r}",
              f"max_range_m = {p.max_range_m!r}",
              f"bbox_noise_rel = {p.bbox_noise_rel!r}"]
    return "\n".join(lines) + "\n"


# --- builtin scenarios ----------------------------------------------------

# Sign placement for the replica: the 30 sign enters fog visibility a few
# seconds in, while cruising at 40 km/h, and is passed before the set-speed
# request at 15 s. The 90 sign enters detection range after the vehicle has
# settled at 49.4 km/h in clear weather.
REPLICA_SIGN30_M = 100.0
REPLICA_SIGN90_M = 430.0


def paper_replica_spec(seed: int = 42) -> ScenarioSpec:
    """Fog then clear run: 30 km/h sign in fog, 90 km/h sign in clear weather."""
    return ScenarioSpec(
        name="paper-replica",
        seed=seed,
        duration_s=40.0,
        initial_speed_kmh=40.0,
        track_length_m=800.0,
        objects=(SceneObject(ObjectClass.SpeedLimit30, REPLICA_SIGN30_M),
                 SceneObject(ObjectClass.SpeedLimit90, REPLICA_SIGN90_M)),
        weather_schedule=((0.0, WeatherState.fog(60.0)), (20.0, WeatherState.clear())),
        setpoint_schedule=((15.0, 49.4),),
        mapping=ctl.SpeedMapping({30.0: 25.0, 90.0: 80.0}),
    ).validate()


def fog_drift_spec(seed: int = 7) -> ScenarioSpec:
    """Foggy drive with covariate drift and an obstacle that forces a stop."""
    return ScenarioSpec(
        name="fog-drift",
        seed=seed,
        duration_s=40.0,
        initial_speed_kmh=50.0,
        track_length_m=600.0,
        objects=(SceneObject(ObjectClass.SpeedLimit90, 60.0),
                 SceneObject(ObjectClass.SpeedLimit30, 200.0),
                 SceneObject(ObjectClass.Obstacle, 330.0, 2.0, 1.5)),
        weather_schedule=((0.0, WeatherState.fog(50.0)),),
        drift=DriftSpec("Covariate", confidence_scale=0.8, miss_rate_boost=0.3,
                        bbox_jitter_sigma=0.002),
    ).validate()


BUILTINS = {
    "paper-replica": paper_replica_spec,
    "fog-drift": fog_drift_spec,
}


def builtin(name: str, seed: int | None = None) -> ScenarioSpec:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown builtin scenario {name!r}; choose from {sorted(BUILTINS)}") \
            from None
    return factory() if seed is None else factory(seed)


def generate_scene(rng: np.random.Generator, n_objects: int, track_length_m: float,
                   class_weights: dict | None = None, min_gap_m: float = 50.0) -> tuple:
    """Random scene whose class frequencies follow ``class_weights``.

    This is the ground-truth side of a prior-probability shift: the label
    mix changes while the appearance of each class does not.
    """
    classes = list(ObjectClass)
    given = {ObjectClass.parse(k): float(v) for k, v in (class_weights or {}).items()}
    weights = np.array([given.get(c, 1.0) for c in classes])
    if (weights < 0).any() or weights.sum() <= 0:
        raise ValueError("class weights must be >= 0 and not all zero")
    labels = rng.choice(len(classes), size=n_objects, p=weights / weights.sum())
    positions = np.sort(rng.uniform(min_gap_m, track_length_m, size=n_objects))
    return tuple(SceneObject(classes[c], float(x)) for c, x in zip(labels, positions))


# --- runner ---------------------------------------------------------------

@dataclass
class SimulationResult:
    spec: ScenarioSpec
    trace: list
    truths: list = field(default_factory=list)  # (time, class_id, cx, cy, w, h, truth_id)
    final_state: VehicleState | None = None
    final_controller: ctl.ControllerState | None = None
    dropped: dict = field(default_factory=dict)


def _record(env) -> tr.TraceRecord:
    p = env.payload
    if env.topic == VEHICLE_STATE:
        return tr.TraceRecord(env.publish_time, tr.VEHICLE,
                              {"position": p.position, "speed": p.speed,
                               "acceleration": p.acceleration})
    if env.topic == DETECTIONS:
        cx, cy, w, h = p.bbox
        return tr.TraceRecord(env.publish_time, tr.DETECTION,
                              {"seq": env.seq, "class_id": p.class_id, "class_name": p.class_name,
                               "confidence": p.confidence, "cx": cx, "cy": cy, "w": w, "h": h,
                               "truth_id": p.truth_id})
    if env.topic == COMMANDS:
        return tr.TraceRecord(env.publish_time, tr.COMMAND,
                              {"seq": env.seq, "target_speed": p.target_speed, "accel": p.accel,
                               "steering": p.steering})
    return tr.TraceRecord(env.publish_time, tr.WEATHER,
                          {"condition": p.condition.value, "visibility_m": p.visibility_m,
                           "sun_altitude_deg": p.sun_altitude_deg})


def simulate(spec: ScenarioSpec) -> SimulationResult:
    spec.validate()
    bus = Bus()
    rng = np.random.default_rng(spec.seed)
    dt = 1.0 / spec.tick_hz
    cap = spec.queue_capacity

    weather_pub = bus.register_publisher("weather", WEATHER)
    det_pub = bus.register_publisher("perception", DETECTIONS)
    cmd_pub = bus.register_publisher("controller", COMMANDS)
    state_pub = bus.register_publisher("plant", VEHICLE_STATE)

    perc_weather = bus.register_subscriber("perception", WEATHER, cap)
    perc_state = bus.register_subscriber("perception", VEHICLE_STATE, cap)
    ctl_dets = bus.register_subscriber("controller", DETECTIONS, cap)
    ctl_state = bus.register_subscriber("controller", VEHICLE_STATE, cap)
    plant_cmds = bus.register_subscriber("plant", COMMANDS, cap)
    taps = [bus.register_subscriber("recorder", t, 4096)
            for t in (WEATHER, DETECTIONS, COMMANDS, VEHICLE_STATE)]

    initial = VehicleState(speed=ctl.kmh_to_ms(spec.initial_speed_kmh))
    cruise = initial.speed
    cstate = ctl.ControllerState(target_speed=cruise, cruise_speed=cruise,
                                 confidence_threshold=spec.confidence_threshold,
                                 hold_time=spec.hold_time_s)
    plant_state = initial
    perceived_state = initial
    controller_view = initial
    weather = WeatherState.clear()
    schedule = list(spec.weather_schedule)
    if not schedule or schedule[0][0] > 0:
        schedule.insert(0, (0.0, WeatherState.clear()))
    setpoints = list(spec.setpoint_schedule)
    last_cmd = None
    trace, truths = [], []

    for k in range(spec.n_ticks):
        now = k / spec.tick_hz

        # weather
        while schedule and schedule[0][0] <= now + 1e-9:
            weather_pub.publish(schedule.pop(0)[1], now)

        # sense
        for env in perc_weather.drain():
            weather = env.payload
        for env in perc_state.drain():
            perceived_state = env.payload
        for truth_id, obj in enumerate(spec.objects):
            box = project_bbox(perceived_state, obj, spec.perception)
            if box is not None:
                truths.append((now, int(obj.object_class), *box, truth_id))
        for det in sense(perceived_state, spec.objects, weather, spec.drift, rng,
                         spec.perception, now=now):
            det_pub.publish(det, now)

        # decide
        for env in ctl_state.drain():
            controller_view = env.payload
        while setpoints and setpoints[0][0] <= now + 1e-9:
            cstate = ctl.set_cruise(cstate, ctl.kmh_to_ms(setpoints.pop(0)[1]))
        for env in ctl_dets.drain():
            cstate = ctl.on_detection(cstate, env.payload, spec.mapping)
        cstate = ctl.release_stop(cstate, now, spec.mapping)
        cmd_pub.publish(ctl.tick(cstate, controller_view.speed, now), now)

        # act
        for env in plant_cmds.drain():
            last_cmd = env.payload
        if last_cmd is None:
            last_cmd = DriveCommand(target_speed=plant_state.speed, accel=0.0, stamp=now)
        t_next = (k + 1) / spec.tick_hz
        plant_state = replace(step(plant_state, last_cmd, dt), time=t_next)
        state_pub.publish(plant_state, t_next)

        for tap in taps:
            trace.extend(_record(env) for env in tap.drain())

    dropped = {f"{s.node_id}{s.topic}": s.dropped
               for s in (perc_weather, perc_state, ctl_dets, ctl_state, plant_cmds, *taps)
               if s.dropped}
    return SimulationResult(spec, trace, truths, plant_state, cstate, dropped)


def run(spec: ScenarioSpec) -> list:
    """Run ``spec`` and return its trace records."""
    return simulate(spec).trace

