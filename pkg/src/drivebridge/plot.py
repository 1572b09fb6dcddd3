"""Hand-written SVG speed-profile chart (no plotting dependency)."""

from __future__ import annotations

import math

from . import trace as tr

WIDTH, HEIGHT = 960, 480
LEFT, RIGHT, TOP, BOTTOM = 70, 30, 40, 60

SPEED_COLOR = "#1f77b4"
TARGET_COLOR = "#d62728"
DETECTION_COLOR = "#2ca02c"


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def _nice_step(span: float, n: int = 6) -> float:
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if raw <= m * mag:
            return m * mag
    return 10 * mag


def speed_profile_svg(records, title: str = "Speed profile") -> str:
    """Speed (km/h) over time with the commanded target as a step line and
    one marker per detection frame. Raises ValueError without vehicle samples."""
    speed = [(r.time, r["speed"] * 3.6) for r in records if r.kind == tr.VEHICLE]
    if not speed:
        raise ValueError("trace has no vehicle samples")
    commands = [(r.time, r["target_speed"] * 3.6) for r in records if r.kind == tr.COMMAND]
    target = [c for i, c in enumerate(commands) if i == 0 or c[1] != commands[i - 1][1]]
    if commands and commands[-1] != target[-1]:
        target.append(commands[-1])
    det_times = sorted({r.time for r in records if r.kind == tr.DETECTION})

    times = [t for t, _ in speed] + [t for t, _ in target]
    t_min, t_max = min(times), max(times)
    v_max = max([v for _, v in speed] + [v for _, v in target] + [1.0]) * 1.1
    plot_w, plot_h = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(t):
        if t_max == t_min:
            return LEFT + plot_w / 2
        return LEFT + (t - t_min) / (t_max - t_min) * plot_w

    def py(v):
        return TOP + plot_h - v / v_max * plot_h

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
           f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="18" '
           f'font-family="Arial">{_escape(title)}</text>']

    step = _nice_step(v_max)
    v = 0.0
    while v <= v_max:
        y = py(v)
        out.append(f'<line x1="{LEFT}" y1="{y:.2f}" x2="{WIDTH - RIGHT}" y2="{y:.2f}" '
                   f'stroke="#e0e0e0" stroke-width="1"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="12" '
                   f'font-family="Arial">{v:g}</text>')
        v += step
    if t_max > t_min:
        t_step = _nice_step(t_max - t_min)
        t = math.ceil(t_min / t_step) * t_step
        while t <= t_max + 1e-9:
            x = px(t)
            out.append(f'<line x1="{x:.2f}" y1="{TOP + plot_h}" x2="{x:.2f}" '
                       f'y2="{TOP + plot_h + 5}" stroke="#000000" stroke-width="1"/>')
            out.append(f'<text x="{x:.2f}" y="{TOP + plot_h + 20}" text-anchor="middle" '
                       f'font-size="12" font-family="Arial">{round(t, 6):g}</text>')
            t += t_step

    out.append(f'<line x1="{LEFT}" y1="{TOP + plot_h}" x2="{WIDTH - RIGHT}" y2="{TOP + plot_h}" '
               f'stroke="#000000" stroke-width="2"/>')
    out.append(f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + plot_h}" '
               f'stroke="#000000" stroke-width="2"/>')

    for t in det_times:
        x = px(t)
        out.append(f'<line class="detection" x1="{x:.2f}" y1="{TOP + plot_h}" x2="{x:.2f}" '
                   f'y2="{TOP + plot_h - 10}" stroke="{DETECTION_COLOR}" stroke-width="1"/>')

    if target:
        pts = []
        for i, (t, v) in enumerate(target):
            if i:
                pts.append(f"{px(t):.2f},{py(target[i - 1][1]):.2f}")
            pts.append(f"{px(t):.2f},{py(v):.2f}")
        levels = ",".join(f"{round(v, 3):g}" for i, (_, v) in enumerate(target)
                          if i == 0 or v != target[i - 1][1])
        out.append(f'<polyline class="target" data-steps="{levels}" fill="none" '
                   f'stroke="{TARGET_COLOR}" '
                   f'stroke-width="1.5" stroke-dasharray="6,4" points="{" ".join(pts)}"/>')

    if len(speed) == 1:
        t, v = speed[0]
        out.append(f'<circle class="speed" cx="{px(t):.2f}" cy="{py(v):.2f}" r="3" '
                   f'fill="{SPEED_COLOR}"/>')
    else:
        pts = " ".join(f"{px(t):.2f},{py(v):.2f}" for t, v in speed)
        out.append(f'<polyline class="speed" fill="none" stroke="{SPEED_COLOR}" '
                   f'stroke-width="2" points="{pts}"/>')

    legend = ((SPEED_COLOR, "speed", ""), (TARGET_COLOR, "target", ' stroke-dasharray="6,4"'),
              (DETECTION_COLOR, "detection", ""))
    out.append(f'<rect x="{WIDTH - RIGHT - 118}" y="{TOP + 2}" width="112" height="62" '
               f'fill="#ffffff" stroke="#cccccc"/>')
    for i, (color, label, dash) in enumerate(legend):
        x, y = WIDTH - RIGHT - 110, TOP + 14 + 18 * i
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 22}" y2="{y}" stroke="{color}" '
                   f'stroke-width="2"{dash}/>')
        out.append(f'<text x="{x + 28}" y="{y + 4}" font-size="12" '
                   f'font-family="Arial">{label}</text>')

    out.append(f'<text x="{LEFT + plot_w / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" '
               f'font-size="14" font-family="Arial">time (s)</text>')
    out.append(f'<text x="18" y="{TOP + plot_h / 2:.1f}" text-anchor="middle" font-size="14" '
               f'font-family="Arial" transform="rotate(-90 18 {TOP + plot_h / 2:.1f})">'
               f'speed (km/h)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
