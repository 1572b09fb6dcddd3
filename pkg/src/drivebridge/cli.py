"""Command-line entry point.

Exit codes: 0 success, 2 input/IO error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import scenario as sc
from . import trace as tr
from .metrics import detections_from_trace, evaluate, response_latency, truths_from_rows
from .plot import speed_profile_svg
from .summary import summarize

log = logging.getLogger("drivebridge")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INVARIANT = 3


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_run(args) -> int:
    try:
        if args.builtin:
            spec = sc.builtin(args.builtin)
        else:
            spec = sc.load_scenario(Path(args.scenario).read_text(encoding="utf-8"))
        if args.seed_override is not None:
            spec = replace(spec, seed=args.seed_override).validate()
    except (OSError, UnicodeDecodeError, KeyError, ValueError) as exc:
        return _fail(EXIT_INPUT, f"cannot load scenario: {exc}")

    result = sc.simulate(spec)
    summary = summarize(result.trace, spec.mapping, spec.confidence_threshold,
                        initial_speed=spec.initial_speed_kmh / 3.6)
    summary["scenario"] = spec.name
    summary["seed"] = spec.seed
    summary["dropped_messages"] = result.dropped

    out = Path(args.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        trace_path = tr.write_trace(result.trace, out / f"trace.{args.trace_format}",
                                    args.trace_format)
        (out / "truths.csv").write_text(tr.truths_to_csv(result.truths), encoding="utf-8")
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        if args.plot:
            (out / "speed_profile.svg").write_text(
                speed_profile_svg(result.trace, f"{spec.name} (seed {spec.seed})"),
                encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_INPUT, f"cannot write outputs: {exc}")

    print(f"wrote {trace_path}")
    acc = summary["acceptance"]
    if not (acc["accel_within_clamp"] and acc["speed_nonnegative"]):
        return _fail(EXIT_INVARIANT, "plant invariant violated (|a| > 6 or negative speed)")
    for s in summary["latency_samples"]:
        print(f"latency {s['latency']:.3f} s -> target {s['target_kmh']:g} km/h")
    print(f"final speed {summary['final_speed_kmh']:.2f} km/h")
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        records = tr.read_trace(args.trace)
        truths = truths_from_rows(tr.truths_from_csv(Path(args.truths).read_text("utf-8")))
    except (OSError, UnicodeDecodeError, ValueError) as exc:
        return _fail(EXIT_INPUT, f"cannot read inputs: {exc}")
    report = evaluate(detections_from_trace(records), truths, args.iou_threshold)
    if args.csv:
        print(report.csv_header())
        print(report.csv_row())
    else:
        print(report.to_json())
    latencies = [s.latency for s in response_latency(records)]
    if latencies:
        print(f"latency samples {len(latencies)}: max {max(latencies):.3f} s, "
              f"mean {sum(latencies) / len(latencies):.3f} s")
    else:
        print("latency samples 0")
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        records = tr.read_trace(args.trace)
        svg = speed_profile_svg(records)
    except (OSError, UnicodeDecodeError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    try:
        Path(args.out).write_text(svg, encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_INPUT, f"cannot write {args.out}: {exc}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_list_builtins(args) -> int:
    for name, factory in sorted(sc.BUILTINS.items()):
        print(f"{name}\t{factory.__doc__.strip().splitlines()[0]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drivebridge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write trace + summary")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", choices=sorted(sc.BUILTINS))
    src.add_argument("--scenario", help="scenario file path")
    p.add_argument("--output-dir", default=os.environ.get("DRIVEBRIDGE_OUT", "out"))
    p.add_argument("--trace-format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--plot", action="store_true", help="also write speed_profile.svg")
    p.add_argument("--seed-override", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("metrics", help="detection metrics and latency from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--truths", required=True, help="ground-truth CSV written by run")
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--csv", action="store_true", help="print a flat CSV row instead of JSON")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("plot", help="render a speed profile SVG from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("list-builtins", help="list builtin scenarios")
    p.set_defaults(func=cmd_list_builtins)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed_override", None) is not None and args.seed_override < 0:
        return _fail(EXIT_INPUT, "--seed-override must be >= 0")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
