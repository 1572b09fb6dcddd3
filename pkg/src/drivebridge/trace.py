"""Trace records and their CSV / JSON-lines encodings.

CSV rows use a fixed header ``time,kind,field1..field9``; the meaning of each
positional field depends on ``kind`` (see ``SCHEMA``). Floats are written with
``repr`` so a round trip is lossless and the bytes only depend on the values.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

VEHICLE = "VehicleSample"
DETECTION = "DetectionEvent"
COMMAND = "CommandEvent"
WEATHER = "WeatherEvent"


def _opt_int(text):
    return None if text in ("", None) else int(text)


SCHEMA = {
    VEHICLE: (("position", float), ("speed", float), ("acceleration", float)),
    DETECTION: (("seq", int), ("class_id", int), ("class_name", str), ("confidence", float),
                ("cx", float), ("cy", float), ("w", float), ("h", float),
                ("truth_id", _opt_int)),
    COMMAND: (("seq", int), ("target_speed", float), ("accel", float), ("steering", float)),
    WEATHER: (("condition", str), ("visibility_m", float), ("sun_altitude_deg", float)),
}
N_FIELDS = max(len(v) for v in SCHEMA.values())
CSV_HEADER = ["time", "kind"] + [f"field{i}" for i in range(1, N_FIELDS + 1)]


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    time: float
    kind: str
    fields: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.fields[key]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        names = [name for name, _ in SCHEMA[rec.kind]]
        row = [_fmt(rec.time), rec.kind] + [_fmt(rec.fields[n]) for n in names]
        writer.writerow(row + [""] * (N_FIELDS - len(names)))
    return buf.getvalue()


def to_jsonl(records) -> str:
    lines = []
    for rec in records:
        obj = {"time": rec.time, "kind": rec.kind}
        obj.update((name, rec.fields[name]) for name, _ in SCHEMA[rec.kind])
        lines.append(json.dumps(obj, sort_keys=False))
    return "".join(line + "\n" for line in lines)


def _build(time, kind, values: dict, where: str) -> TraceRecord:
    if kind not in SCHEMA:
        raise TraceFormatError(f"{where}: unknown record kind {kind!r}")
    try:
        fields = {name: conv(values[name]) for name, conv in SCHEMA[kind]}
        return TraceRecord(float(time), kind, fields)
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"{where}: bad {kind} record ({exc})") from None


def from_csv(text: str) -> list[TraceRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise TraceFormatError("trace CSV header mismatch")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_HEADER):
            raise TraceFormatError(f"line {lineno}: expected {len(CSV_HEADER)} columns")
        kind = row[1]
        names = [name for name, _ in SCHEMA.get(kind, ())]
        records.append(_build(row[0], kind, dict(zip(names, row[2:])), f"line {lineno}"))
    return records


def from_jsonl(text: str) -> list[TraceRecord]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from None
        if not isinstance(obj, dict) or "time" not in obj or "kind" not in obj:
            raise TraceFormatError(f"line {lineno}: missing time/kind")
        records.append(_build(obj["time"], obj["kind"], obj, f"line {lineno}"))
    return records


def write_trace(records, path, fmt: str | None = None) -> Path:
    path = Path(path)
    fmt = fmt or ("jsonl" if path.suffix == ".jsonl" else "csv")
    text = to_jsonl(records) if fmt == "jsonl" else to_csv(records)
    path.write_text(text, encoding="utf-8")
    return path


def read_trace(path) -> list[TraceRecord]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return from_jsonl(text) if path.suffix == ".jsonl" else from_csv(text)


# Ground truth files: one visible object per row, keyed by frame time.
TRUTH_HEADER = ["time", "class_id", "cx", "cy", "w", "h", "truth_id"]


def truths_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRUTH_HEADER)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def truths_from_csv(text: str) -> list[tuple]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != TRUTH_HEADER:
        raise TraceFormatError("truth CSV header mismatch")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            t, cid, cx, cy, w, h, tid = row
            out.append((float(t), int(cid), float(cx), float(cy), float(w), float(h),
                        _opt_int(tid)))
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from None
    return out
