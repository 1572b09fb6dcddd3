"""Run summary: per-phase settling, latency, and acceptance flags for a trace."""

from __future__ import annotations

import numpy as np

from . import trace as tr
from .controller import DEFAULT_MAPPING, kmh_to_ms, ms_to_kmh
from .metrics import analyze_latency, speed_profile_stats, speed_samples
from .plant import MAX_ACCEL

EPSILON_KMH = 1.0
LATENCY_BOUND_S = 0.5
LATENCY_TICKS_BOUND_S = 0.2
ACCEL_SETTLE_BOUND_S = 5.0
OVERSHOOT_BOUND_KMH = 0.5


def target_changes(records):
    """(time, target m/s) for the first command and every target change."""
    out = []
    for r in records:
        if r.kind == tr.COMMAND and (not out or r["target_speed"] != out[-1][1]):
            out.append((r.time, r["target_speed"]))
    return out


def phases(records, epsilon_kmh: float = EPSILON_KMH, initial_speed: float = 0.0):
    """One entry per target change after the first command."""
    changes = target_changes(records)
    eps = kmh_to_ms(epsilon_kmh)
    out = []
    for i, (t0, target) in enumerate(changes[1:], start=1):
        t_end = changes[i + 1][0] if i + 1 < len(changes) else None
        stats = speed_profile_stats(records, target, eps, t_start=t0, t_end=t_end)
        t, v = speed_samples(records, t0, t_end)
        start_speed = _speed_at(records, t0, initial_speed)
        err = np.abs(v - target)
        monotone = bool(np.all(np.diff(np.concatenate([[abs(start_speed - target)], err]))
                               <= 1e-12))
        out.append({
            "start_time": t0,
            "start_speed_kmh": ms_to_kmh(start_speed),
            "target_kmh": ms_to_kmh(target),
            "settling_time_s": stats.settling_time,
            "overshoot_kmh": ms_to_kmh(stats.overshoot),
            "monotone": monotone,
        })
    return out


def _speed_at(records, t, initial_speed):
    """Speed the vehicle enters the tick at time ``t`` with."""
    speed = initial_speed
    for r in records:
        if r.kind == tr.VEHICLE:
            if r.time > t + 1e-9:
                break
            speed = r["speed"]
    return speed


def summarize(records, mapping=DEFAULT_MAPPING, confidence_threshold: float = 0.5,
              initial_speed: float = 0.0) -> dict:
    samples, anomalies = analyze_latency(records, mapping, confidence_threshold)
    accels = [abs(r["acceleration"]) for r in records if r.kind == tr.VEHICLE]
    speeds = [r["speed"] for r in records if r.kind == tr.VEHICLE]
    phase_list = phases(records, initial_speed=initial_speed)
    latencies = [s.latency for s in samples]
    max_accel = max(accels) if accels else 0.0

    detection_phases = [p for p in phase_list
                        if any(abs(s.effect_stamp - p["start_time"]) < 1e-9 for s in samples)]
    accel_phases = [p for p in detection_phases if p["target_kmh"] > p["start_speed_kmh"]]
    decel_phases = [p for p in detection_phases if p["target_kmh"] < p["start_speed_kmh"]]
    acceptance = {
        "latency_le_0.5s": all(x <= LATENCY_BOUND_S + 1e-9 for x in latencies),
        "latency_le_2_ticks": all(x <= LATENCY_TICKS_BOUND_S + 1e-9 for x in latencies),
        "accel_within_clamp": max_accel <= MAX_ACCEL + 1e-12,
        "speed_nonnegative": all(v >= 0 for v in speeds),
        "accel_phases_settle_le_5s": all(p["settling_time_s"] is not None
                                         and p["settling_time_s"] <= ACCEL_SETTLE_BOUND_S + 1e-9
                                         for p in accel_phases),
        "decel_phases_monotone": all(p["monotone"]
                                     and p["overshoot_kmh"] <= OVERSHOOT_BOUND_KMH
                                     for p in decel_phases),
    }
    return {
        "final_speed_kmh": ms_to_kmh(speeds[-1]) if speeds else None,
        "max_abs_accel": max_accel,
        "latency_samples": [{"trigger": s.trigger_stamp, "effect": s.effect_stamp,
                             "latency": s.latency, "target_kmh": ms_to_kmh(s.target_speed)}
                            for s in samples],
        "latency_anomalies": [{"effect": a.effect_stamp, "target_kmh": ms_to_kmh(a.target_speed),
                               "reason": a.reason} for a in anomalies],
        "phases": phase_list,
        "acceptance": acceptance,
    }
