"""Minimal deterministic SVG line and scatter charts."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT, PAD = 640, 400, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _scale(lo: float, hi: float, a: float, b: float):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _frame(title: str, xlabel: str, ylabel: str, xlim, ylim) -> list[str]:
    x0, x1, y0, y1 = PAD, WIDTH - PAD, HEIGHT - PAD, PAD
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {HEIGHT / 2:.1f})">{escape(ylabel)}</text>',
        f'<text x="{x0}" y="{y0 + 16}" font-size="10">{xlim[0]:.4g}</text>',
        f'<text x="{x1}" y="{y0 + 16}" text-anchor="end" font-size="10">{xlim[1]:.4g}</text>',
        f'<text x="{x0 - 4}" y="{y0}" text-anchor="end" font-size="10">{ylim[0]:.4g}</text>',
        f'<text x="{x0 - 4}" y="{y1 + 4}" text-anchor="end" font-size="10">{ylim[1]:.4g}</text>',
    ]


def _limits(arrays: Sequence[np.ndarray]) -> tuple[float, float]:
    values = np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays]) if arrays else np.zeros(1)
    return float(values.min()), float(values.max())


def line_chart(
    x: np.ndarray,
    lines: Sequence[np.ndarray],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    highlight: Sequence[int] = (),
) -> str:
    """Polylines sharing ``x``; indices in ``highlight`` are drawn thick in the accent color."""
    xlim = _limits([x])
    ylim = _limits(list(lines))
    sx = _scale(*xlim, PAD, WIDTH - PAD)
    sy = _scale(*ylim, HEIGHT - PAD, PAD)
    out = _frame(title, xlabel, ylabel, xlim, ylim)
    strong = set(highlight)
    for k, ys in enumerate(lines):
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, ys))
        if k in strong:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[1]}" stroke-width="3"/>')
        else:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{PALETTE[0]}" stroke-width="0.5" stroke-opacity="0.4"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter_chart(
    x: np.ndarray,
    y: np.ndarray,
    groups: Sequence[str] | None = None,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    """Points colored by group label, with a legend in first-seen order."""
    xlim, ylim = _limits([x]), _limits([y])
    sx = _scale(*xlim, PAD, WIDTH - PAD)
    sy = _scale(*ylim, HEIGHT - PAD, PAD)
    out = _frame(title, xlabel, ylabel, xlim, ylim)
    labels = list(groups) if groups is not None else [""] * len(x)
    order = list(dict.fromkeys(labels))
    color = {g: PALETTE[i % len(PALETTE)] for i, g in enumerate(order)}
    for a, b, g in zip(x, y, labels):
        out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="1.5" fill="{color[g]}" fill-opacity="0.6"/>')
    if groups is not None:
        for i, g in enumerate(order):
            ty = PAD + 14 * i
            out.append(f'<rect x="{WIDTH - PAD + 4}" y="{ty - 8}" width="8" height="8" fill="{color[g]}"/>')
            out.append(f'<text x="{WIDTH - PAD + 16}" y="{ty}" font-size="10">{escape(str(g))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
