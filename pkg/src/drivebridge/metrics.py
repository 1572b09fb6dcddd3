"""Detection scoring (IoU matching, precision/recall, COCO-style AP) and
trace analysis (command latency, speed-profile settling)."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import trace as tr
from .controller import DEFAULT_MAPPING, SpeedMapping, kmh_to_ms
from .perception import ObjectClass

RECALL_GRID = tuple(i / 100 for i in range(101))
COCO_IOU_THRESHOLDS = tuple((10 + i) / 20 for i in range(10))  # 0.50:0.05:0.95


@dataclass(frozen=True)
class ScoredBox:
    """A detection for scoring. ``box`` is (x1, y1, x2, y2); ``frame`` keys the image."""

    class_id: int
    confidence: float
    box: tuple
    frame: float = 0.0


@dataclass(frozen=True)
class TruthBox:
    class_id: int
    box: tuple
    frame: float = 0.0


def xywh_to_corners(cx, cy, w, h) -> tuple:
    return (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def iou(box_a, box_b) -> float:
    ax1, ay1, ax2, ay2 = box_a
    bx1, by1, bx2, by2 = box_b
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    if not (ax2 > ax1 and ay2 > ay1 and bx2 > bx1 and by2 > by1):
        raise ValueError("boxes must have positive area")
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (area_a + area_b - inter)


@dataclass
class MatchResult:
    true_positives: int
    false_positives: int
    false_negatives: int
    pairs: list = field(default_factory=list)  # (det index, truth index, iou)
    tp_flags: list = field(default_factory=list)  # per detection, input order


def confidence_order(dets) -> list[int]:
    """Indices by descending confidence, ties broken by stream order."""
    return sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))


def match_detections(dets, truths, iou_threshold: float = 0.5) -> MatchResult:
    """Greedy matching: each detection, highest confidence first, takes the
    unmatched same-class, same-frame truth with the highest IoU >= threshold."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError("iou_threshold must be in (0, 1]")
    buckets = {}
    for j, t in enumerate(truths):
        buckets.setdefault((t.frame, t.class_id), []).append(j)
    taken = [False] * len(truths)
    flags = [False] * len(dets)
    pairs = []
    for i in confidence_order(dets):
        d = dets[i]
        best, best_iou = None, iou_threshold
        for j in buckets.get((d.frame, d.class_id), ()):
            if taken[j]:
                continue
            v = iou(d.box, truths[j].box)
            if v >= best_iou and (best is None or v > best_iou):
                best, best_iou = j, v
        if best is not None:
            taken[best] = True
            flags[i] = True
            pairs.append((i, best, best_iou))
    tp = len(pairs)
    return MatchResult(tp, len(dets) - tp, len(truths) - tp, pairs, flags)


def interpolated_ap(tp_sorted, n_truths: int) -> float:
    """101-point interpolated AP from TP flags already in confidence order."""
    if n_truths == 0:
        return math.nan
    tp = np.cumsum(np.asarray(tp_sorted, dtype=np.int64))
    fp = np.arange(1, len(tp) + 1) - tp
    if len(tp) == 0:
        return 0.0
    recall = tp / n_truths
    precision = tp / (tp + fp)
    # precision envelope: max precision at any recall >= r
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, np.asarray(RECALL_GRID), side="left")
    values = np.where(idx < len(recall), envelope[np.minimum(idx, len(recall) - 1)], 0.0)
    return float(values.mean())


def average_precision(dets, truths, iou_threshold: float = 0.5) -> float:
    """AP of one class's detections against its truths; NaN when there are no truths."""
    result = match_detections(dets, truths, iou_threshold)
    order = confidence_order(dets)
    return interpolated_ap([result.tp_flags[i] for i in order], len(truths))


def class_average_precisions(dets, truths, iou_threshold: float = 0.5) -> dict:
    classes = sorted({t.class_id for t in truths})
    out = {}
    for c in classes:
        out[c] = average_precision([d for d in dets if d.class_id == c],
                                   [t for t in truths if t.class_id == c], iou_threshold)
    return out


def mean_average_precision(dets, truths, thresholds=(0.5,)) -> float:
    """Mean over IoU thresholds of the mean AP over classes that have truths."""
    per_threshold = []
    for thr in thresholds:
        aps = list(class_average_precisions(dets, truths, thr).values())
        per_threshold.append(float(np.mean(aps)) if aps else 0.0)
    return float(np.mean(per_threshold))


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f1: float
    map50: float
    map50_95: float
    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def csv_header(self) -> str:
        return ",".join(asdict(self))

    def csv_row(self) -> str:
        return ",".join(repr(v) if isinstance(v, float) else str(v)
                        for v in asdict(self).values())


def f1_score(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def evaluate(dets, truths, iou_threshold: float = 0.5) -> MetricsReport:
    m = match_detections(dets, truths, iou_threshold)
    precision = m.true_positives / len(dets) if dets else 0.0
    recall = m.true_positives / len(truths) if truths else 0.0
    return MetricsReport(
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        map50=mean_average_precision(dets, truths, (0.5,)),
        map50_95=mean_average_precision(dets, truths, COCO_IOU_THRESHOLDS),
        true_positives=m.true_positives,
        false_positives=m.false_positives,
        false_negatives=m.false_negatives,
    )


def frame_key(t: float) -> float:
    return round(t, 6)


def detections_from_trace(records) -> list[ScoredBox]:
    out = []
    for r in records:
        if r.kind == tr.DETECTION:
            f = r.fields
            out.append(ScoredBox(f["class_id"], f["confidence"],
                                 xywh_to_corners(f["cx"], f["cy"], f["w"], f["h"]),
                                 frame_key(r.time)))
    return out


def truths_from_rows(rows) -> list[TruthBox]:
    return [TruthBox(cid, xywh_to_corners(cx, cy, w, h), frame_key(t))
            for t, cid, cx, cy, w, h, _ in rows]


# --- trace analysis -------------------------------------------------------

@dataclass(frozen=True)
class LatencySample:
    trigger_stamp: float
    effect_stamp: float
    latency: float
    target_speed: float


@dataclass(frozen=True)
class LatencyAnomaly:
    effect_stamp: float
    target_speed: float
    reason: str


def _explains(fields, target: float, mapping: SpeedMapping) -> bool:
    cls = ObjectClass(fields["class_id"])
    if cls is ObjectClass.Obstacle:
        return target == 0.0
    mapped = mapping.get(cls.speed_limit_kmh)
    return mapped is not None and math.isclose(kmh_to_ms(mapped), target, abs_tol=1e-9)


def analyze_latency(records, mapping: SpeedMapping = DEFAULT_MAPPING,
                    confidence_threshold: float = 0.5):
    """Pair each target-speed change on the command stream with the first
    detection since the previous change that accounts for the new target.

    Returns ``(samples, anomalies)``; changes with no such detection (for
    example operator set-speed requests) become anomalies.
    """
    samples, anomalies = [], []
    pending = []
    prev_target = None
    for r in records:
        if r.kind == tr.DETECTION:
            if r.fields["confidence"] >= confidence_threshold:
                pending.append(r)
        elif r.kind == tr.COMMAND:
            target = r.fields["target_speed"]
            if prev_target is None:
                prev_target = target
                pending.clear()
                continue
            if math.isclose(target, prev_target, abs_tol=1e-12):
                continue
            cause = next((d for d in pending if _explains(d.fields, target, mapping)), None)
            if cause is None:
                anomalies.append(LatencyAnomaly(r.time, target, "no causal detection"))
            else:
                samples.append(LatencySample(cause.time, r.time, r.time - cause.time, target))
            prev_target = target
            pending.clear()
    return samples, anomalies


def response_latency(records, mapping: SpeedMapping = DEFAULT_MAPPING,
                     confidence_threshold: float = 0.5) -> list[LatencySample]:
    return analyze_latency(records, mapping, confidence_threshold)[0]


@dataclass(frozen=True)
class SpeedProfileStats:
    settling_time: float | None
    overshoot: float


def speed_samples(records, t_start=None, t_end=None):
    """(time, speed) arrays of vehicle samples with t_start <= time <= t_end."""
    rows = [(r.time, r.fields["speed"]) for r in records if r.kind == tr.VEHICLE
            and (t_start is None or r.time >= t_start) and (t_end is None or r.time <= t_end)]
    if not rows:
        return np.empty(0), np.empty(0)
    t, v = np.asarray(rows, dtype=float).T
    return t, v


def speed_profile_stats(records, v_target: float, epsilon: float,
                        t_start: float | None = None,
                        t_end: float | None = None) -> SpeedProfileStats:
    """Settling time and overshoot of the vehicle speed toward ``v_target``.

    Settling time counts from ``t_start`` (default: first sample) to the first
    sample after which the speed never leaves the epsilon band again; a speed
    already inside the band at the start settles in 0. Overshoot is the
    largest excursion past the target once it has been crossed.
    """
    t, v = speed_samples(records, t_start, t_end)
    if len(t) == 0:
        return SpeedProfileStats(None, 0.0)
    t0 = t[0] if t_start is None else t_start
    err = v - v_target
    outside = np.flatnonzero(np.abs(err) > epsilon)
    if len(outside) == 0:
        settling = 0.0
    elif outside[-1] == len(v) - 1:
        settling = None
    else:
        settling = float(t[outside[-1] + 1] - t0)

    direction = np.sign(-err[0])
    if direction == 0:
        overshoot = float(np.max(np.abs(err)))
    else:
        past = direction * err
        crossed = np.flatnonzero(past >= 0)
        overshoot = float(max(0.0, past[crossed[0]:].max())) if len(crossed) else 0.0
    return SpeedProfileStats(settling, overshoot)
