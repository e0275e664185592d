"""Minimal log-log rate plot written as plain SVG text."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

from .harness import CellResult

WIDTH, HEIGHT = 640, 440
MARGIN = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def rate_plot_svg(results: Sequence[CellResult], title: str = "mean loss vs n") -> str:
    """Plot ``log10 mean_loss`` against ``log10 n``.

    Every (model, metric) series becomes one ``<polyline>``.  The matching
    upper-bound principal term, shifted to pass through the geometric mean of
    the series, is drawn as a dashed ``<path>`` so that its slope can be
    compared by eye.
    """
    ok = [r for r in results if isinstance(r, CellResult)]
    series: dict[tuple[int, str], list[tuple[float, float, float]]] = {}
    for r in ok:
        for m, v in r.mean_loss.items():
            if v > 0:
                series.setdefault((r.model_index, m), []).append(
                    (r.params["n"], v, r.rate_refs[m]["principal"])
                )
    pts = [(math.log10(n), math.log10(v)) for s in series.values() for n, v, _ in s]
    refs = []
    for key, s in series.items():
        shift = sum(math.log10(v) - math.log10(p) for _, v, p in s if p > 0) / max(
            1, sum(1 for *_, p in s if p > 0)
        )
        line = [(math.log10(n), math.log10(p) + shift) for n, _, p in s if p > 0]
        refs.append((key, line))
        pts.extend(line)
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(x: float) -> float:
        return MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def sy(y: float) -> float:
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<path d="M{MARGIN},{MARGIN} V{HEIGHT - MARGIN} H{WIDTH - MARGIN}" stroke="black" fill="none"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle" font-size="12">log10 n</text>',
        f'<text x="18" y="{HEIGHT / 2}" font-size="12" '
        f'transform="rotate(-90 18 {HEIGHT / 2})" text-anchor="middle">log10 mean loss</text>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 16}" font-size="10">{x0:.2f}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 16}" font-size="10" text-anchor="end">{x1:.2f}</text>',
        f'<text x="{MARGIN - 4}" y="{HEIGHT - MARGIN}" font-size="10" text-anchor="end">{y0:.2f}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + 4}" font-size="10" text-anchor="end">{y1:.2f}</text>',
    ]
    for i, ((mi, metric), s) in enumerate(sorted(series.items())):
        color = COLORS[i % len(COLORS)]
        coords = " ".join(f"{sx(math.log10(n)):.2f},{sy(math.log10(v)):.2f}" for n, v, _ in s)
        out.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2">'
            f"<title>model {mi} {metric}</title></polyline>"
        )
        out.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 14 * i}" font-size="11" fill="{color}">'
            f"model {mi} {escape(metric)}</text>"
        )
    for i, ((mi, metric), line) in enumerate(sorted(refs)):
        if len(line) < 2:
            continue
        color = COLORS[i % len(COLORS)]
        d = " ".join(
            f"{'M' if j == 0 else 'L'}{sx(x):.2f},{sy(y):.2f}" for j, (x, y) in enumerate(line)
        )
        out.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-dasharray="6,4"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
