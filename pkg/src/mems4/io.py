"""Deterministic CSV tables and minimal SVG line charts."""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np


def fmt(x):
    """Shortest decimal that round-trips to the same double."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


@dataclass
class CsvTable:
    header: list
    rows: list = field(default_factory=list)

    def render(self):
        lines = [",".join(self.header)]
        lines += [",".join(fmt(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def write(self, path):
        Path(path).write_text(self.render(), encoding="utf-8", newline="\n")

    def column(self, name):
        k = self.header.index(name)
        return [row[k] for row in self.rows]


def _parse(cell):
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def parse_csv(text):
    reader = csv.reader(text.splitlines())
    header = next(reader)
    return CsvTable(header, [[_parse(c) for c in row] for row in reader if row])


def read_csv(path):
    return parse_csv(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------- SVG

WIDTH, HEIGHT = 800, 600
MARGIN = dict(left=80, right=30, top=50, bottom=70)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((k * mag for k in (1, 2, 5, 10) if k * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def svg_plot(series, title="", xlabel="", ylabel=""):
    """Line chart of ``series``: a list of ``(label, xs, ys)``; returns SVG text."""
    xs_all = np.concatenate([np.asarray(s[1], float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], float) for s in series])
    fin = np.isfinite(xs_all) & np.isfinite(ys_all)
    x0, x1 = float(xs_all[fin].min()), float(xs_all[fin].max())
    y0, y1 = float(ys_all[fin].min()), float(ys_all[fin].max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN["top"] + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{MARGIN["top"] + ph}" x2="{X:.2f}" y2="{MARGIN["top"] + ph + 6}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{MARGIN["top"] + ph + 22}" font-size="13" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{MARGIN["left"] - 6}" y1="{Y:.2f}" x2="{MARGIN["left"]}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 10}" y="{Y + 4:.2f}" font-size="13" text-anchor="end">{t:.4g}</text>')
    for k, (label, xs, ys) in enumerate(series):
        pts = " ".join(
            f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys) if np.isfinite(x) and np.isfinite(y)
        )
        color = COLORS[k % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        if label:
            ly = MARGIN["top"] + 20 + 18 * k
            out.append(f'<text x="{MARGIN["left"] + pw - 10}" y="{ly}" font-size="13" '
                       f'text-anchor="end" fill="{color}">{escape(label)}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="30" font-size="16" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 20}" font-size="14" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="20" y="{MARGIN["top"] + ph / 2}" font-size="14" text-anchor="middle" '
               f'transform="rotate(-90 20 {MARGIN["top"] + ph / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, series, **labels):
    Path(path).write_text(svg_plot(series, **labels), encoding="utf-8", newline="\n")
