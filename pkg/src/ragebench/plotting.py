"""Deterministic static SVG rendering for the workbench figures.

Output is plain SVG 1.1 text on a fixed 800x600 viewBox; identical PlotSpec
inputs produce byte-identical documents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NonFiniteValue

WIDTH, HEIGHT = 800, 600
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 30, 50, 70

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class Series:
    name: str
    ys: list
    xs: list | None = None  # None for bar charts (categorical x from labels)
    labels: list | None = None


@dataclass
class PlotSpec:
    kind: str  # bar | line | step | scatter
    title: str
    x_label: str
    y_label: str
    series: list = field(default_factory=list)
    reference_diagonal: bool = False

    def validate(self):
        if self.kind not in ("bar", "line", "step", "scatter"):
            raise ValueError(f"unknown plot kind {self.kind!r}")
        if not self.series:
            raise NonFiniteValue("plot has no series")
        for s in self.series:
            if len(s.ys) == 0:
                raise NonFiniteValue(f"series {s.name!r} is empty")
            if not np.all(np.isfinite(np.asarray(s.ys, dtype=np.float64))):
                raise NonFiniteValue(f"series {s.name!r} has non-finite y values")
            if s.xs is not None and not np.all(np.isfinite(np.asarray(s.xs, dtype=np.float64))):
                raise NonFiniteValue(f"series {s.name!r} has non-finite x values")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


class _Canvas:
    def __init__(self):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        ]

    def add(self, element: str):
        self.parts.append(element)

    def text(self, x, y, content, size=14, anchor="middle", rotate=None):
        transform = f' transform="rotate(-90 {_fmt(x)} {_fmt(y)})"' if rotate else ""
        self.add(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" '
            f'font-size="{size}" text-anchor="{anchor}"{transform}>{_escape(content)}</text>'
        )

    def finish(self) -> str:
        return "\n".join(self.parts + ["</svg>"])


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _data_range(values, pad_fraction=0.05):
    lo, hi = float(np.min(values)), float(np.max(values))
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    pad = (hi - lo) * pad_fraction
    return lo - pad, hi + pad


def render_svg(spec: PlotSpec) -> str:
    spec.validate()
    canvas = _Canvas()
    x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    y0, y1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP

    if spec.kind == "bar":
        _render_bar(canvas, spec, x0, x1, y0, y1)
    else:
        _render_xy(canvas, spec, x0, x1, y0, y1)

    canvas.text((x0 + x1) / 2, MARGIN_TOP - 20, spec.title, size=18)
    canvas.text((x0 + x1) / 2, HEIGHT - 15, spec.x_label)
    canvas.text(22, (y0 + y1) / 2, spec.y_label, rotate=True)
    return canvas.finish()


def _axes(canvas, x0, x1, y0, y1):
    canvas.add(
        f'<path d="M {_fmt(x0)} {_fmt(y1)} L {_fmt(x0)} {_fmt(y0)} '
        f'L {_fmt(x1)} {_fmt(y0)}" stroke="#000000" fill="none" stroke-width="1"/>'
    )


def _y_ticks(canvas, lo, hi, x0, y0, y1):
    for i in range(6):
        v = lo + (hi - lo) * i / 5
        y = y0 + (y1 - y0) * i / 5
        canvas.add(
            f'<line x1="{_fmt(x0 - 5)}" y1="{_fmt(y)}" x2="{_fmt(x0)}" y2="{_fmt(y)}" '
            f'stroke="#000000" stroke-width="1"/>'
        )
        canvas.text(x0 - 9, y + 4, _tick_label(v), size=11, anchor="end")


def _render_bar(canvas, spec, x0, x1, y0, y1):
    series = spec.series[0]
    values = np.asarray(series.ys, dtype=np.float64)
    labels = series.labels or [str(i) for i in range(len(values))]
    lo = min(0.0, float(values.min()))
    hi = max(0.0, float(values.max()))
    if lo == hi:
        hi = lo + 1.0
    _axes(canvas, x0, x1, y0, y1)
    _y_ticks(canvas, lo, hi, x0, y0, y1)
    n = len(values)
    slot = (x1 - x0) / n
    for i, (v, label) in enumerate(zip(values, labels)):
        bar_w = slot * 0.6
        bx = x0 + slot * i + slot * 0.2
        frac_v = (v - lo) / (hi - lo)
        frac_0 = (0.0 - lo) / (hi - lo)
        top = y0 + (y1 - y0) * max(frac_v, frac_0)
        base = y0 + (y1 - y0) * min(frac_v, frac_0)
        canvas.add(
            f'<rect x="{_fmt(bx)}" y="{_fmt(top)}" width="{_fmt(bar_w)}" '
            f'height="{_fmt(abs(base - top))}" fill="{PALETTE[0]}"/>'
        )
        canvas.text(bx + bar_w / 2, y0 + 18, str(label), size=11)
        canvas.text(bx + bar_w / 2, top - 5, _tick_label(float(v)), size=10)


def _render_xy(canvas, spec, x0, x1, y0, y1):
    all_x = np.concatenate([np.asarray(s.xs, dtype=np.float64) for s in spec.series])
    all_y = np.concatenate([np.asarray(s.ys, dtype=np.float64) for s in spec.series])
    lo_x, hi_x = _data_range(all_x)
    lo_y, hi_y = _data_range(all_y)

    def px(v):
        return x0 + (x1 - x0) * (v - lo_x) / (hi_x - lo_x)

    def py(v):
        return y0 + (y1 - y0) * (v - lo_y) / (hi_y - lo_y)

    _axes(canvas, x0, x1, y0, y1)
    _y_ticks(canvas, lo_y, hi_y, x0, y0, y1)
    for i in range(6):
        v = lo_x + (hi_x - lo_x) * i / 5
        x = x0 + (x1 - x0) * i / 5
        canvas.add(
            f'<line x1="{_fmt(x)}" y1="{_fmt(y0)}" x2="{_fmt(x)}" y2="{_fmt(y0 + 5)}" '
            f'stroke="#000000" stroke-width="1"/>'
        )
        canvas.text(x, y0 + 22, _tick_label(v), size=11)

    if spec.reference_diagonal:
        lo_d = max(lo_x, lo_y)
        hi_d = min(hi_x, hi_y)
        if hi_d > lo_d:
            canvas.add(
                f'<line x1="{_fmt(px(lo_d))}" y1="{_fmt(py(lo_d))}" '
                f'x2="{_fmt(px(hi_d))}" y2="{_fmt(py(hi_d))}" '
                f'stroke="#888888" stroke-width="1" stroke-dasharray="6,4"/>'
            )

    for si, series in enumerate(spec.series):
        color = PALETTE[si % len(PALETTE)]
        xs = np.asarray(series.xs, dtype=np.float64)
        ys = np.asarray(series.ys, dtype=np.float64)
        if spec.kind == "scatter":
            for vx, vy in zip(xs, ys):
                canvas.add(
                    f'<circle cx="{_fmt(px(vx))}" cy="{_fmt(py(vy))}" r="3" '
                    f'fill="{color}" fill-opacity="0.7"/>'
                )
        else:
            points = []
            for j, (vx, vy) in enumerate(zip(xs, ys)):
                if spec.kind == "step" and j > 0:
                    points.append(f"{_fmt(px(vx))},{_fmt(py(ys[j - 1]))}")
                points.append(f"{_fmt(px(vx))},{_fmt(py(vy))}")
            canvas.add(
                f'<polyline points="{" ".join(points)}" fill="none" '
                f'stroke="{color}" stroke-width="2"/>'
            )
        legend_y = MARGIN_TOP + 16 * si + 8
        canvas.add(
            f'<rect x="{_fmt(x1 - 150)}" y="{_fmt(legend_y - 9)}" width="10" height="10" '
            f'fill="{color}"/>'
        )
        canvas.text(x1 - 135, legend_y, series.name, size=11, anchor="start")


def write_svg(spec: PlotSpec, path) -> None:
    content = render_svg(spec)
    Path(path).write_text(content)
