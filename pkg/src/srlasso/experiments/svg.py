"""Minimal SVG plotting: line plots with log axes, small multiples and heatmaps.

The CSV files written next to each figure are the ground truth; the figures
are a convenience.  Output is plain text assembled deterministically (fixed
number formatting, no timestamps), so identical data gives identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _f(v: float) -> str:
    return f"{v:.2f}"


@dataclass
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str = ""
    color: Optional[str] = None
    dash: bool = False
    markers: bool = False


@dataclass
class Panel:
    series: list
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlog: bool = False
    ylog: bool = False
    vlines: list = field(default_factory=list)      # (x, color)
    xbands: list = field(default_factory=list)      # (x_lo, x_hi) shaded
    diagonal: bool = False                          # reference line y = x
    legend: bool = True
    xticks: bool = True                             # False when another layer labels x


def _finite(v, log):
    return v is not None and math.isfinite(v) and (not log or v > 0)


def _limits(values, log):
    vals = [v for v in values if _finite(v, log)]
    if not vals:
        return (1.0, 10.0) if log else (0.0, 1.0)
    lo, hi = min(vals), max(vals)
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi - lo < 1e-12:
        pad = 0.5 if log else max(abs(lo) * 0.1, 0.5)
        lo, hi = lo - pad, hi + pad
    else:
        pad = 0.04 * (hi - lo)
        lo, hi = lo - pad, hi + pad
    return lo, hi


def _ticks(lo, hi, log):
    if log:
        a, b = math.ceil(lo - 1e-9), math.floor(hi + 1e-9)
        step = max(1, math.ceil((b - a + 1) / 8))
        return [(t, f"1e{t}") for t in range(a, b + 1, step)]
    span = hi - lo
    raw = span / 5
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * span:
        out.append((t, f"{t:g}"))
        t += step
    return out


class _Axes:
    def __init__(self, x0, y0, w, h, panel: Panel):
        self.x0, self.y0, self.w, self.h, self.p = x0, y0, w, h, panel
        xs = [v for s in panel.series for v in s.x] + [v for v, _ in panel.vlines]
        xs += [v for band in panel.xbands for v in band]
        ys = [v for s in panel.series for v in s.y]
        self.xlim = _limits(xs, panel.xlog)
        self.ylim = _limits(ys, panel.ylog)

    def tx(self, v):
        t = math.log10(v) if self.p.xlog else v
        lo, hi = self.xlim
        return self.x0 + (t - lo) / (hi - lo) * self.w

    def ty(self, v):
        t = math.log10(v) if self.p.ylog else v
        lo, hi = self.ylim
        return self.y0 + self.h - (t - lo) / (hi - lo) * self.h

    def render(self) -> list[str]:
        p, out = self.p, []
        clip = f"clip{int(self.x0)}_{int(self.y0)}"
        out.append(f'<clipPath id="{clip}"><rect x="{_f(self.x0)}" y="{_f(self.y0)}" '
                   f'width="{_f(self.w)}" height="{_f(self.h)}"/></clipPath>')
        out.append(f'<rect x="{_f(self.x0)}" y="{_f(self.y0)}" width="{_f(self.w)}" '
                   f'height="{_f(self.h)}" fill="white" stroke="black"/>')
        for lo, hi in p.xbands:
            if _finite(lo, p.xlog) and _finite(hi, p.xlog):
                a, b = self.tx(lo), self.tx(hi)
                out.append(f'<rect x="{_f(min(a, b))}" y="{_f(self.y0)}" width="{_f(abs(b - a))}" '
                           f'height="{_f(self.h)}" fill="#cccccc" clip-path="url(#{clip})"/>')
        for t, label in (_ticks(*self.xlim, p.xlog) if p.xticks else ()):
            X = self.x0 + (t - self.xlim[0]) / (self.xlim[1] - self.xlim[0]) * self.w
            out.append(f'<line x1="{_f(X)}" y1="{_f(self.y0 + self.h)}" x2="{_f(X)}" '
                       f'y2="{_f(self.y0 + self.h + 4)}" stroke="black"/>')
            out.append(f'<text x="{_f(X)}" y="{_f(self.y0 + self.h + 15)}" font-size="9" '
                       f'text-anchor="middle">{escape(label)}</text>')
        for t, label in _ticks(*self.ylim, p.ylog):
            Y = self.y0 + self.h - (t - self.ylim[0]) / (self.ylim[1] - self.ylim[0]) * self.h
            out.append(f'<line x1="{_f(self.x0 - 4)}" y1="{_f(Y)}" x2="{_f(self.x0)}" '
                       f'y2="{_f(Y)}" stroke="black"/>')
            out.append(f'<text x="{_f(self.x0 - 6)}" y="{_f(Y + 3)}" font-size="9" '
                       f'text-anchor="end">{escape(label)}</text>')
        if p.diagonal:
            lo = max(self.xlim[0], self.ylim[0])
            hi = min(self.xlim[1], self.ylim[1])
            if lo < hi and p.xlog == p.ylog:
                a, b = (10**lo, 10**hi) if p.xlog else (lo, hi)
                out.append(f'<line x1="{_f(self.tx(a))}" y1="{_f(self.ty(a))}" x2="{_f(self.tx(b))}" '
                           f'y2="{_f(self.ty(b))}" stroke="gray" stroke-dasharray="5,3" '
                           f'clip-path="url(#{clip})"/>')
        for v, color in p.vlines:
            if _finite(v, p.xlog):
                X = self.tx(v)
                out.append(f'<line x1="{_f(X)}" y1="{_f(self.y0)}" x2="{_f(X)}" '
                           f'y2="{_f(self.y0 + self.h)}" stroke="{color}" stroke-dasharray="4,3"/>')
        for k, s in enumerate(p.series):
            color = s.color or PALETTE[k % len(PALETTE)]
            pts = [(self.tx(a), self.ty(b)) for a, b in zip(s.x, s.y)
                   if _finite(a, p.xlog) and _finite(b, p.ylog)]
            if not pts:
                continue
            dash = ' stroke-dasharray="6,3"' if s.dash else ""
            path = " ".join(f"{_f(a)},{_f(b)}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" '
                       f'stroke-width="1.3"{dash} clip-path="url(#{clip})"/>')
            if s.markers:
                out.extend(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="2" fill="{color}" '
                           f'clip-path="url(#{clip})"/>' for a, b in pts)
        if p.title:
            out.append(f'<text x="{_f(self.x0 + self.w / 2)}" y="{_f(self.y0 - 6)}" font-size="11" '
                       f'text-anchor="middle">{escape(p.title)}</text>')
        if p.xlabel:
            out.append(f'<text x="{_f(self.x0 + self.w / 2)}" y="{_f(self.y0 + self.h + 30)}" '
                       f'font-size="10" text-anchor="middle">{escape(p.xlabel)}</text>')
        if p.ylabel:
            cx, cy = self.x0 - 42, self.y0 + self.h / 2
            out.append(f'<text x="{_f(cx)}" y="{_f(cy)}" font-size="10" text-anchor="middle" '
                       f'transform="rotate(-90 {_f(cx)} {_f(cy)})">{escape(p.ylabel)}</text>')
        labelled = [(k, s) for k, s in enumerate(p.series) if s.label]
        if p.legend and labelled:
            out.append(f'<rect x="{_f(self.x0 + self.w - 114)}" y="{_f(self.y0 + 2)}" width="110" '
                       f'height="{12 * len(labelled) + 4}" fill="white" fill-opacity="0.85"/>')
            for row, (k, s) in enumerate(labelled):
                color = s.color or PALETTE[k % len(PALETTE)]
                Y = self.y0 + 12 + 12 * row
                X = self.x0 + self.w - 110
                dash = ' stroke-dasharray="6,3"' if s.dash else ""
                out.append(f'<line x1="{_f(X)}" y1="{_f(Y - 3)}" x2="{_f(X + 16)}" y2="{_f(Y - 3)}" '
                           f'stroke="{color}" stroke-width="1.3"{dash}/>')
                out.append(f'<text x="{_f(X + 20)}" y="{_f(Y)}" font-size="9">{escape(s.label)}</text>')
        return out


def _document(width, height, body, title=""):
    head = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(width)}" '
            f'height="{int(height)}" viewBox="0 0 {int(width)} {int(height)}" '
            f'font-family="sans-serif">',
            f'<rect width="{int(width)}" height="{int(height)}" fill="white"/>']
    if title:
        head.append(f'<text x="{_f(width / 2)}" y="18" font-size="13" '
                    f'text-anchor="middle">{escape(title)}</text>')
    return "\n".join(head + body + ["</svg>"]) + "\n"


def line_plot(panel: Panel, width: int = 640, height: int = 440) -> str:
    """A single panel as a complete SVG document."""
    ax = _Axes(70, 40, width - 100, height - 90, panel)
    return _document(width, height, ax.render())


def small_multiples(panels: Sequence[Panel], ncols: int, title: str = "",
                    cell_w: int = 260, cell_h: int = 200) -> str:
    """Panels on a grid, read row by row."""
    ncols = max(1, int(ncols))
    nrows = max(1, math.ceil(len(panels) / ncols))
    width, height = ncols * cell_w + 40, nrows * cell_h + 40
    body = []
    for k, panel in enumerate(panels):
        r, c = divmod(k, ncols)
        ax = _Axes(40 + c * cell_w + 30, 40 + r * cell_h + 20, cell_w - 60, cell_h - 70, panel)
        body.extend(ax.render())
    return _document(width, height, body, title)


def heatmap(values, xvals: Sequence[float], yvals: Sequence[float], title: str = "",
            xlabel: str = "", ylabel: str = "", overlay: Optional[Panel] = None,
            width: int = 720, height: int = 460) -> str:
    """Cells ``values[i][j]`` at ``(xvals[j], yvals[i])`` on log-spaced axes.

    Values in [0, 1] are shaded from white to dark blue; ``None`` or NaN cells
    (no data) are left blank.  ``overlay`` series are drawn on top with their
    own log-log scale sharing the horizontal axis.
    """
    x0, y0, w, h = 70, 40, width - 190, height - 90
    nx, ny = len(xvals), len(yvals)
    body = [f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="white" stroke="black"/>']
    cw, ch = w / max(nx, 1), h / max(ny, 1)
    for i in range(ny):
        for j in range(nx):
            v = values[i][j]
            if v is None or not math.isfinite(v):
                continue
            t = min(max(float(v), 0.0), 1.0)
            shade = int(round(255 - 200 * t))
            color = f"rgb({shade},{shade},{min(255, shade + 60)})"
            X = x0 + j * cw
            Y = y0 + h - (i + 1) * ch
            body.append(f'<rect x="{_f(X)}" y="{_f(Y)}" width="{_f(cw + 0.3)}" '
                        f'height="{_f(ch + 0.3)}" fill="{color}"/>')
    step = max(1, nx // 8)
    for j in range(0, nx, step):
        X = x0 + (j + 0.5) * cw
        body.append(f'<text x="{_f(X)}" y="{_f(y0 + h + 15)}" font-size="9" '
                    f'text-anchor="middle">{xvals[j]:.3g}</text>')
    for i in range(ny):
        Y = y0 + h - (i + 0.5) * ch
        body.append(f'<text x="{_f(x0 + w + 6)}" y="{_f(Y + 3)}" font-size="9">{yvals[i]:.3g}</text>')
    if xlabel:
        body.append(f'<text x="{_f(x0 + w / 2)}" y="{_f(y0 + h + 32)}" font-size="10" '
                    f'text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        cx, cy = x0 + w + 50, y0 + h / 2
        body.append(f'<text x="{_f(cx)}" y="{_f(cy)}" font-size="10" text-anchor="middle" '
                    f'transform="rotate(90 {_f(cx)} {_f(cy)})">{escape(ylabel)}</text>')
    if overlay is not None:
        lo, hi = math.log10(xvals[0]), math.log10(xvals[-1])
        half = 0.5 * (hi - lo) / max(nx - 1, 1)
        # pad the overlay's axis so that cell centres line up with the samples
        overlay = Panel(series=overlay.series + [Series([10 ** (lo - half), 10 ** (hi + half)],
                                                        [float("nan")] * 2)],
                        xlog=True, ylog=overlay.ylog, vlines=overlay.vlines,
                        ylabel=overlay.ylabel, legend=overlay.legend, xticks=False)
        ax = _Axes(x0, y0, w, h, overlay)
        ax.xlim = (lo - half, hi + half)
        body.extend(line for line in ax.render()
                    if not line.startswith('<rect x="' + _f(x0)))
    return _document(width, height, body, title)
