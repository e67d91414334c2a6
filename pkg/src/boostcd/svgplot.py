"""Static SVG convergence plots (no plotting library needed)."""

from __future__ import annotations

import math
from html import escape

COLORS = ["#d62728", "#2ca02c", "#17becf", "#1f77b4", "#9467bd", "#ff7f0e"]


def _ticks(lo, hi, k=5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * t / (k - 1) for t in range(k)]


def convergence_svg(traces: dict, path, x: str = "time", width: int = 640, height: int = 420) -> None:
    """Plot log10(F - F_best) against elapsed seconds (or iterations) for each trace."""
    best = min(min(tr.F) for tr in traces.values())
    floor = 1e-12
    series = {}
    for name, tr in traces.items():
        xs = tr.elapsed if x == "time" else tr.iters
        pts = [(float(a), math.log10(max(F - best, floor))) for a, F in zip(xs, tr.F) if math.isfinite(a)]
        if pts:
            series[name] = pts
    if not series:
        raise ValueError("nothing to plot")
    xmin = min(p[0] for s in series.values() for p in s)
    xmax = max(p[0] for s in series.values() for p in s)
    ymin = min(p[1] for s in series.values() for p in s)
    ymax = max(p[1] for s in series.values() for p in s)
    if xmax <= xmin:
        xmax = xmin + 1.0
    if ymax <= ymin:
        ymax = ymin + 1.0
    ml, mr, mt, mb = 70, 150, 20, 50
    pw, ph = width - ml - mr, height - mt - mb

    def sx(v):
        return ml + (v - xmin) / (xmax - xmin) * pw

    def sy(v):
        return mt + (ymax - v) / (ymax - ymin) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
    for v in _ticks(xmin, xmax):
        out.append(f'<text x="{sx(v):.1f}" y="{mt + ph + 15}" text-anchor="middle">{v:.3g}</text>')
    for v in _ticks(ymin, ymax):
        out.append(f'<text x="{ml - 6}" y="{sy(v) + 4:.1f}" text-anchor="end">1e{v:.1f}</text>')
    xlabel = "elapsed seconds" if x == "time" else "iteration"
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="15" y="{mt + ph / 2}" transform="rotate(-90 15 {mt + ph / 2})" text-anchor="middle">F - F_best</text>')
    for k, (name, pts) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = mt + 15 + 18 * k
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 35}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
