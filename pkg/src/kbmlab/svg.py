"""Minimal deterministic SVG line plots (no plotting library needed)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


@dataclass
class Panel:
    title: str
    series: list[tuple[np.ndarray, np.ndarray, str]] = field(default_factory=list)
    xlabel: str = ""
    ylabel: str = ""
    logx: bool = False
    logy: bool = False
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    markers: bool = False


def _num(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.3g}"


def _limits(vals, given):
    if given is not None:
        return given
    lo, hi = float(np.min(vals)), float(np.max(vals))
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.03 * (hi - lo)
    return lo - pad, hi + pad


def _axis_lim(lim, log):
    if lim is None or not log:
        return lim
    return math.log10(lim[0]), math.log10(lim[1])


def _split_breaks(x, y, jump):
    """Break a polyline where consecutive points jump by more than ``jump`` (wrapped paths)."""
    if jump is None or x.size < 2:
        return [(x, y)]
    cut = np.flatnonzero((np.abs(np.diff(x)) > jump) | (np.abs(np.diff(y)) > jump)) + 1
    return list(zip(np.split(x, cut), np.split(y, cut)))


def _panel(p: Panel, ox: float, oy: float, w: float, h: float, jump) -> list[str]:
    out = []
    xs, ys = [], []
    for x, y, _ in p.series:
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        if p.logx:
            ok &= x > 0
        if p.logy:
            ok &= y > 0
        xs.append(np.log10(x[ok]) if p.logx else x[ok])
        ys.append(np.log10(y[ok]) if p.logy else y[ok])
    allx = np.concatenate(xs) if xs else np.zeros(1)
    ally = np.concatenate(ys) if ys else np.zeros(1)
    xl = _limits(allx if allx.size else np.zeros(1), _axis_lim(p.xlim, p.logx))
    yl = _limits(ally if ally.size else np.zeros(1), _axis_lim(p.ylim, p.logy))
    ml, mr, mt, mb = 60.0, 15.0, 25.0, 40.0
    pw, ph = w - ml - mr, h - mt - mb

    def X(v):
        return ox + ml + (v - xl[0]) / (xl[1] - xl[0]) * pw

    def Y(v):
        return oy + mt + ph - (v - yl[0]) / (yl[1] - yl[0]) * ph

    out.append(f'<rect x="{_num(ox + ml)}" y="{_num(oy + mt)}" width="{_num(pw)}" height="{_num(ph)}" '
               'fill="none" stroke="#000"/>')
    out.append(f'<text x="{_num(ox + w / 2)}" y="{_num(oy + 16)}" text-anchor="middle">{p.title}</text>')
    for v in np.linspace(xl[0], xl[1], 5):
        lab = _tick(10**v) if p.logx else _tick(v)
        out.append(f'<text x="{_num(X(v))}" y="{_num(oy + mt + ph + 15)}" text-anchor="middle" '
                   f'font-size="10">{lab}</text>')
    for v in np.linspace(yl[0], yl[1], 5):
        lab = _tick(10**v) if p.logy else _tick(v)
        out.append(f'<text x="{_num(ox + ml - 4)}" y="{_num(Y(v) + 3)}" text-anchor="end" '
                   f'font-size="10">{lab}</text>')
    out.append(f'<text x="{_num(ox + ml + pw / 2)}" y="{_num(oy + h - 5)}" text-anchor="middle" '
               f'font-size="11">{p.xlabel}</text>')
    out.append(f'<text x="{_num(ox + 12)}" y="{_num(oy + mt + ph / 2)}" text-anchor="middle" font-size="11" '
               f'transform="rotate(-90 {_num(ox + 12)} {_num(oy + mt + ph / 2)})">{p.ylabel}</text>')
    for i, ((_, _, label), x, y) in enumerate(zip(p.series, xs, ys)):
        color = COLORS[i % len(COLORS)]
        for xa, ya in _split_breaks(x, y, jump):
            if xa.size == 0:
                continue
            pts = " ".join(f"{_num(X(a))},{_num(Y(b))}" for a, b in zip(xa, ya))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>')
            if p.markers:
                out += [f'<circle cx="{_num(X(a))}" cy="{_num(Y(b))}" r="2.5" fill="{color}"/>'
                        for a, b in zip(xa, ya)]
        if label:
            out.append(f'<text x="{_num(ox + ml + pw - 4)}" y="{_num(oy + mt + 14 + 13 * i)}" '
                       f'text-anchor="end" font-size="10" fill="{color}">{label}</text>')
    return out


def write_svg(path: str | Path, panels: list[Panel], width: float = 420.0, height: float = 320.0,
              break_jumps: float | None = None) -> Path:
    """Lay ``panels`` out in one row and write the SVG file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    W = width * len(panels)
    body = []
    for i, p in enumerate(panels):
        body += _panel(p, i * width, 0.0, width, height, break_jumps)
    text = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(W)}" height="{_num(height)}" '
            f'font-family="sans-serif" font-size="12">\n'
            f'<rect width="100%" height="100%" fill="#fff"/>\n' + "\n".join(body) + "\n</svg>\n")
    path.write_text(text)
    return path
