"""Minimal deterministic SVG line charts for loss histories and comparison tables.

Output depends only on the input numbers: fixed viewport, fixed palette and
fixed number formatting, so identical inputs give byte-identical files.
"""

import csv
import math
import os

from .errors import FormatError

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 160, 30, 50
PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")

LOSS_COLUMNS = ("step", "loss", "block_index", "wall_ms")
COMPARE_COLUMNS = ("method", "m", "n", "mu", "max_h1", "mean_h1")


def read_series(path):
    """Series ``[(label, xs, ys)]`` from a loss CSV or a comparison CSV."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise FormatError(f"{path}: no data rows")
    header, body = tuple(rows[0]), rows[1:]
    try:
        if header == LOSS_COLUMNS:
            label = os.path.splitext(os.path.basename(path))[0]
            return [(label, [float(r[0]) for r in body], [float(r[1]) for r in body])]
        if header == COMPARE_COLUMNS:
            series = {}
            for r in body:
                xs, ys = series.setdefault(r[0], ([], []))
                y = float(r[4])
                if math.isfinite(y):
                    xs.append(float(r[1]))
                    ys.append(y)
            return [(k, xs, ys) for k, (xs, ys) in series.items()]
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: malformed row ({exc})") from exc
    raise FormatError(f"{path}: unrecognized columns {','.join(header)}")


def _num(v):
    return f"{v:.2f}"


def _tick_label(v):
    return f"{v:.0e}" if (abs(v) >= 1e4 or 0 < abs(v) < 1e-2) else f"{v:g}"


def svg_chart(series, title="", xlabel="", ylabel="", log_y=True):
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)]
    if log_y:
        pts = [(x, y) for x, y in pts if y > 0]
    if not pts:
        raise FormatError("nothing to plot")
    fy = (lambda y: math.log10(y)) if log_y else (lambda y: y)
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(fy(p[1]) for p in pts), max(fy(p[1]) for p in pts)
    if log_y:
        y0, y1 = math.floor(y0), math.ceil(y1)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + ph - (fy(y) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if log_y:
        yticks = [(TOP + ph - (e - y0) / (y1 - y0) * ph, f"1e{e}") for e in range(y0, y1 + 1)]
    else:
        yticks = [(TOP + ph - i / 4 * ph, _tick_label(y0 + i / 4 * (y1 - y0))) for i in range(5)]
    for py, lab in yticks:
        out.append(f'<line x1="{LEFT - 4}" y1="{_num(py)}" x2="{LEFT}" y2="{_num(py)}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{_num(py + 4)}" text-anchor="end">{lab}</text>')
    for i in range(5):
        xv = x0 + i / 4 * (x1 - x0)
        px = sx(xv)
        out.append(f'<line x1="{_num(px)}" y1="{TOP + ph}" x2="{_num(px)}" y2="{TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_num(px)}" y="{TOP + ph + 16}" text-anchor="middle">{_tick_label(xv)}</text>')
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y in zip(xs, ys) if y > 0 or not log_y)
        if coords:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = TOP + 14 + 16 * i
        out.append(f'<line x1="{WIDTH - RIGHT + 10}" y1="{ly}" x2="{WIDTH - RIGHT + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - RIGHT + 34}" y="{ly + 4}">{_escape(label)}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{_escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{TOP + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 14 {TOP + ph / 2:.1f})">{_escape(ylabel)}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="18" text-anchor="middle" font-size="13">{_escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def plot_files(paths, out_path, title=""):
    series = [s for p in paths for s in read_series(p)]
    with open(paths[0], newline="") as fh:
        compare = fh.readline().strip().split(",")[0] == "method"
    xlabel, ylabel = ("sensors", "max H1 error") if compare else ("step", "training loss")
    svg = svg_chart(series, title, xlabel, ylabel, log_y=True)
    with open(out_path, "w", newline="\n") as fh:
        fh.write(svg)
    return out_path
