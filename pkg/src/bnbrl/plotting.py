"""Dependency-free SVG output: metric line charts and episode replays.

Every number is formatted with a fixed precision so identical inputs give
byte-identical files.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Optional

from .episode_log import EpisodeLog, read_log

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _f(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _esc(text: str) -> str:
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


def svg_line_chart(series: dict[str, list[tuple[float, float]]], title: str, xlabel: str,
                   ylabel: str, width: int = 640, height: int = 400,
                   invert_x: bool = False) -> str:
    """Multi-series line chart; points with ``None`` y are skipped (gap in the line)."""
    ml, mr, mt, mb = 70, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts if y is not None]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    yt = _nice_ticks(min(ys + [0.0]), max(ys + [1e-9])) if ys else [0.0, 1.0]
    y0, y1 = yt[0], yt[-1]

    def sx(x):
        frac = (x - x0) / (x1 - x0)
        return ml + (1 - frac if invert_x else frac) * pw

    def sy(y):
        return mt + (1 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{_f(ml + pw / 2)}" y="24" text-anchor="middle" font-size="15">{_esc(title)}</text>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for y in yt:
        out.append(f'<line x1="{ml}" y1="{_f(sy(y))}" x2="{ml + pw}" y2="{_f(sy(y))}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 6}" y="{_f(sy(y) + 4)}" text-anchor="end" font-size="11">{y:g}</text>')
    for x in sorted(set(xs)):
        out.append(f'<text x="{_f(sx(x))}" y="{mt + ph + 16}" text-anchor="middle" font-size="11">{x:g}</text>')
    out.append(f'<text x="{_f(ml + pw / 2)}" y="{height - 10}" text-anchor="middle" font-size="12">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{_f(mt + ph / 2)}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {_f(mt + ph / 2)})">{_esc(ylabel)}</text>')
    for k, (name, pts) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        segment = []
        segments = [segment]
        for x, y in sorted(pts):
            if y is None:
                segment = []
                segments.append(segment)
                continue
            segment.append(f"{_f(sx(x))},{_f(sy(y))}")
            out.append(f'<circle cx="{_f(sx(x))}" cy="{_f(sy(y))}" r="3" fill="{color}"/>')
        for seg in segments:
            if len(seg) > 1:
                out.append(f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = mt + 14 + 18 * k
        out.append(f'<line x1="{ml + pw + 12}" y1="{ly}" x2="{ml + pw + 32}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 38}" y="{ly + 4}" font-size="11">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- experiment outputs -------------------------------------------------------

METRIC_LABELS = {"SR": "success rate", "NT": "navigation time (s)", "PL": "path length (m)",
                 "ITR": "intrusion ratio"}


def write_sweep_outputs(rows: list[dict], out_dir: str | Path) -> list[Path]:
    """``fov_sweep.csv`` plus ``fov_sweep_<metric>.svg``; charts are drawn
    from the CSV as read back, so the CSV is the single source."""
    from .evaluation import read_metrics_csv, write_metrics_csv
    out = Path(out_dir)
    csv_path = write_metrics_csv(rows, out / "fov_sweep.csv", lead=("policy", "fov"))
    table = read_metrics_csv(csv_path)
    paths = [csv_path]
    for metric, label in METRIC_LABELS.items():
        series: dict[str, list] = {}
        for r in table:
            series.setdefault(r["policy"], []).append((r["fov"], None if r[metric] == "" else r[metric]))
        svg = svg_line_chart(series, f"{metric} vs field of view", "FoV (deg)", label, invert_x=True)
        path = out / f"fov_sweep_{metric}.svg"
        path.write_text(svg)
        paths.append(path)
    return paths


def write_blink_outputs(rows: list[dict], out_dir: str | Path) -> list[Path]:
    """``blink.csv`` (raw values, deltas and no-blink values) and
    ``blink_table.csv`` / ``blink_table.md`` in the 'value (delta)' layout."""
    from .evaluation import format_blink_table
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw = out / "blink.csv"
    fields = ["policy"] + [f"{m}{s}" for m in ("SR", "NT", "PL", "ITR") for s in ("", "_delta", "_noblink")]
    with open(raw, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    table = format_blink_table(rows)
    cols = list(table[0]) if table else ["Navigation Method"]
    tab_csv = out / "blink_table.csv"
    with open(tab_csv, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(table)
    md = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    md += ["| " + " | ".join(r[c] for c in cols) + " |" for r in table]
    tab_md = out / "blink_table.md"
    tab_md.write_text("\n".join(md) + "\n")
    return [raw, tab_csv, tab_md]


# -- replay -------------------------------------------------------------------

def _wedge(cx: float, cy: float, heading: float, fov_deg: float, radius: float) -> Optional[str]:
    """Path data for a sensing sector in world coordinates (y up)."""
    if fov_deg <= 0:
        return None
    if fov_deg >= 360:
        return f"circle:{_f(cx)},{_f(cy)},{_f(radius)}"
    half = math.radians(fov_deg) / 2
    a0, a1 = heading - half, heading + half
    p0 = (cx + radius * math.cos(a0), cy + radius * math.sin(a0))
    p1 = (cx + radius * math.cos(a1), cy + radius * math.sin(a1))
    large = 1 if fov_deg > 180 else 0
    return (p0, p1, large)


def render_replay(log: EpisodeLog, size: int = 600, wedge_every: int = 8) -> str:
    half = float(log.header.get("arena_half_extent", 6.0))
    margin = 20
    scale = (size - 2 * margin) / (2 * half)
    max_range = log.header.get("sensor", {}).get("max_range") or 2 * half * math.sqrt(2)

    def sx(x):
        return margin + (x + half) * scale

    def sy(y):
        return margin + (half - y) * scale

    def pts(seq):
        return " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in seq)

    init = log.header["initial"]
    records = [(0, init["robot"], init["humans"], init.get("fov"), [])]
    records += [(s["t"], s["robot"], s["humans"], s.get("fov"), s.get("beliefs", [])) for s in log.steps]

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>',
           f'<rect x="{margin}" y="{margin}" width="{_f(2 * half * scale)}" height="{_f(2 * half * scale)}" '
           f'fill="none" stroke="black"/>',
           '<g id="fov">']
    for k, (t, robot, _, fov, _) in enumerate(records):
        if fov is None or (k % wedge_every and k != len(records) - 1):
            continue
        shape = _wedge(robot[0], robot[1], robot[6], fov, max_range)
        if shape is None:
            continue
        if isinstance(shape, str):
            out.append(f'<circle cx="{_f(sx(robot[0]))}" cy="{_f(sy(robot[1]))}" r="{_f(max_range * scale)}" '
                       'fill="#1f77b4" fill-opacity="0.04" stroke="#1f77b4" stroke-opacity="0.2"/>')
            continue
        p0, p1, large = shape
        r = max_range * scale
        # y flips on screen, so the counter-clockwise world arc is drawn with sweep-flag 0
        out.append(f'<path d="M {_f(sx(robot[0]))} {_f(sy(robot[1]))} L {_f(sx(p0[0]))} {_f(sy(p0[1]))} '
                   f'A {_f(r)} {_f(r)} 0 {large} 0 {_f(sx(p1[0]))} {_f(sy(p1[1]))} Z" '
                   'fill="#1f77b4" fill-opacity="0.04" stroke="#1f77b4" stroke-opacity="0.2"/>')
    out.append("</g>")

    n_humans = len(init["humans"])
    out.append('<g id="humans">')
    for i in range(n_humans):
        path = [(h[i][0], h[i][1]) for _, _, h, _, _ in records]
        out.append(f'<polyline points="{pts(path)}" fill="none" stroke="#888" stroke-width="1"/>')
        last = records[-1][2][i]
        out.append(f'<circle cx="{_f(sx(last[0]))}" cy="{_f(sy(last[1]))}" r="{_f(last[4] * scale)}" '
                   'fill="none" stroke="#555"/>')
    out.append("</g>")

    out.append('<g id="beliefs">')
    arm = 0.12 * scale
    for t, _, _, _, beliefs in records:
        for b in beliefs:
            x, y = sx(b["traj"][0][0]), sy(b["traj"][0][1])
            out.append(f'<path d="M {_f(x - arm)} {_f(y - arm)} L {_f(x + arm)} {_f(y + arm)} '
                       f'M {_f(x - arm)} {_f(y + arm)} L {_f(x + arm)} {_f(y - arm)}" '
                       f'stroke="#ff7f0e" stroke-width="1.5" data-t="{t}" data-id="{b["id"]}"/>')
    out.append("</g>")

    robot_path = [(r[0], r[1]) for _, r, _, _, _ in records]
    out.append(f'<polyline id="robot" points="{pts(robot_path)}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    last = records[-1][1]
    out.append(f'<circle cx="{_f(sx(last[0]))}" cy="{_f(sy(last[1]))}" r="{_f(last[7] * scale)}" '
               'fill="#1f77b4" fill-opacity="0.5"/>')
    gx, gy = init["robot"][4], init["robot"][5]
    out.append(f'<circle id="goal" cx="{_f(sx(gx))}" cy="{_f(sy(gy))}" r="{_f(0.15 * scale)}" fill="#d62728"/>')
    out.append(f'<text x="{margin + 4}" y="{margin + 14}" font-size="12">{_esc(log.header.get("policy", ""))} '
               f'seed {log.header.get("seed", "")}: {_esc(log.outcome)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


TRACE_FIELDS = ["t", "sim_time", "d_min", "n_visible", "n_beliefs", "reward", "r_goal", "r_col",
                "r_disc", "r_pred", "r_bel", "r_pot", "event"]


def write_trace(log: EpisodeLog, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for s in log.steps:
            r = s["reward"]
            w.writerow([s["t"], repr(s["sim_time"]), "" if s["d_min"] is None else repr(s["d_min"]),
                        sum(s["mask"]), len(s.get("beliefs", [])), repr(r["total"]), repr(r["goal"]),
                        repr(r["col"]), repr(r["disc"]), repr(r["pred"]), repr(r["bel"]), repr(r["pot"]),
                        s["event"]])
    return path


def replay(log_path: str | Path, out_dir: Optional[str | Path] = None) -> tuple[Path, Path]:
    """Render ``<stem>.svg`` and ``<stem>_trace.csv`` next to the log (or in ``out_dir``)."""
    log_path = Path(log_path)
    log = read_log(log_path)
    out = Path(out_dir) if out_dir is not None else log_path.parent
    out.mkdir(parents=True, exist_ok=True)
    svg = out / f"{log_path.stem}.svg"
    svg.write_text(render_replay(log))
    return svg, write_trace(log, out / f"{log_path.stem}_trace.csv")
