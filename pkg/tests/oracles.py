"""Independent reference implementations used only by the tests."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp
from shapely.geometry import box as shapely_box


def iou_shapely(a, b) -> float:
    pa, pb = shapely_box(*a), shapely_box(*b)
    return pa.intersection(pb).area / pa.union(pb).area


def _candidates(dets, truths, thr, iou_fn):
    table = {}
    for i, d in enumerate(dets):
        for j, t in enumerate(truths):
            if d.class_id == t.class_id and d.frame == t.frame:
                v = iou_fn(d.box, t.box)
                if v >= thr:
                    table[i, j] = v
    return table


def all_matchings(n_dets, n_truths, allowed):
    """Every partial injective det -> truth assignment over allowed pairs."""
    out = []

    def rec(i, used, current):
        if i == n_dets:
            out.append(dict(current))
            return
        rec(i + 1, used, current)
        for j in range(n_truths):
            if j not in used and (i, j) in allowed:
                current[i] = j
                rec(i + 1, used | {j}, current)
                del current[i]

    rec(0, frozenset(), {})
    return out


def brute_force_match(dets, truths, thr, iou_fn=iou_shapely):
    """Enumerate all valid matchings and keep the one that is lexicographically
    best when detections are ranked by confidence (stream order on ties) and
    each detection prefers a higher IoU, then a lower truth index.

    Returns (tp, fp, fn, tp_flags in input order).
    """
    table = _candidates(dets, truths, thr, iou_fn)
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))

    def key(m):
        return tuple((1, table[i, m[i]], -m[i]) if i in m else (0, 0.0, 0) for i in order)

    best = max(all_matchings(len(dets), len(truths), table), key=key)
    flags = [i in best for i in range(len(dets))]
    tp = len(best)
    return tp, len(dets) - tp, len(truths) - tp, flags


def max_count_match(dets, truths, thr, iou_fn=iou_shapely) -> int:
    table = _candidates(dets, truths, thr, iou_fn)
    return max(len(m) for m in all_matchings(len(dets), len(truths), table))


def pr_prefix_ap(confidences, tp_flags, n_truths) -> Fraction:
    """101-point AP in exact arithmetic, enumerating every ranked prefix."""
    order = sorted(range(len(confidences)), key=lambda i: (-confidences[i], i))
    points = []
    tp = 0
    for k, i in enumerate(order, start=1):
        tp += bool(tp_flags[i])
        points.append((Fraction(tp, n_truths), Fraction(tp, k)))
    total = Fraction(0)
    for step in range(101):
        r = Fraction(step, 100)
        ps = [p for rec, p in points if rec >= r]
        total += max(ps) if ps else Fraction(0)
    return total / 101


def integrate_settling(v0, v_target, eps, gain=0.7, a_max=6.0, max_step=1e-4):
    """Settling time of dv/dt = clamp(gain * (v_target - v)) by numeric ODE solve."""

    def rhs(t, v):
        return [np.clip(gain * (v_target - v[0]), -a_max, a_max)]

    def inside(t, v):
        return abs(v[0] - v_target) - eps

    inside.terminal = True
    inside.direction = -1
    sol = solve_ivp(rhs, (0.0, 60.0), [v0], events=inside, max_step=max_step,
                    rtol=1e-10, atol=1e-12)
    return float(sol.t_events[0][0])


def discrete_settling_ticks(v0, v_target, eps, gain=0.7, dt=0.1, a_max=6.0):
    """Tick count for the 10 Hz loop, by direct iteration."""
    v, n = v0, 0
    while abs(v - v_target) > eps:
        a = min(max(gain * (v_target - v), -a_max), a_max)
        v = max(0.0, v + a * dt)
        n += 1
    return n
