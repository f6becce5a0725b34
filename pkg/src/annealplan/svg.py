"""Minimal deterministic SVG rendering of utility points and fitted curves.

A presentation layer only: the plot shows exactly the points and fitted
lines that appear in the CSV output, delta against log10 compute, with
the fitted line solid inside its compute range and dotted where it is
extrapolated. Hand-rolled so the bytes depend on nothing but the data.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

from .manifest import UtilityPoint
from .scaling import ScalingFit

__all__ = ["render_fit_svg"]

_WIDTH, _HEIGHT = 720, 480
_MARGIN_LEFT, _MARGIN_RIGHT, _MARGIN_TOP, _MARGIN_BOTTOM = 70, 160, 30, 50

_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)


def _fmt(value: float) -> str:
    return format(value, ".2f")


def render_fit_svg(points: Sequence[UtilityPoint], fits: Sequence[ScalingFit]) -> str:
    """Render points and per-source fitted lines as an SVG document."""
    if not points:
        raise ValueError("nothing to plot: no utility points")
    xs = [math.log10(p.compute) for p in points]
    ys = [p.delta.value for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_pad = max(0.05 * (x_hi - x_lo), 0.1)
    y_pad = max(0.05 * (y_hi - y_lo), 1e-6)
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = _HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM

    def sx(x: float) -> float:
        return _MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y: float) -> float:
        return _MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}"'
        f' viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{_MARGIN_LEFT}" y="{_MARGIN_TOP}" width="{plot_w}" height="{plot_h}"'
        ' fill="none" stroke="#cccccc"/>',
    ]

    for tick in range(math.ceil(x_lo), math.floor(x_hi) + 1):
        x = sx(tick)
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_MARGIN_TOP}" x2="{_fmt(x)}"'
            f' y2="{_MARGIN_TOP + plot_h}" stroke="#eeeeee"/>'
        )
        parts.append(
            f'<text x="{_fmt(x)}" y="{_MARGIN_TOP + plot_h + 18}" font-size="11"'
            f' text-anchor="middle" font-family="sans-serif">1e{tick}</text>'
        )
    for i in range(5):
        y_val = y_lo + (y_hi - y_lo) * i / 4
        y = sy(y_val)
        parts.append(
            f'<line x1="{_MARGIN_LEFT}" y1="{_fmt(y)}" x2="{_MARGIN_LEFT + plot_w}"'
            f' y2="{_fmt(y)}" stroke="#eeeeee"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_LEFT - 6}" y="{_fmt(y + 4)}" font-size="11"'
            f' text-anchor="end" font-family="sans-serif">{format(y_val, ".4g")}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN_LEFT + plot_w / 2}" y="{_HEIGHT - 12}" font-size="12"'
        ' text-anchor="middle" font-family="sans-serif">compute (FLOPs, log scale)</text>'
    )
    parts.append(
        f'<text x="16" y="{_MARGIN_TOP + plot_h / 2}" font-size="12" text-anchor="middle"'
        f' font-family="sans-serif" transform="rotate(-90 16 {_MARGIN_TOP + plot_h / 2})">'
        "utility delta</text>"
    )

    def line_points(fit: ScalingFit, lo: float, hi: float, segments: int = 32) -> str:
        coords = []
        for i in range(segments + 1):
            x = lo + (hi - lo) * i / segments
            y = fit.intercept + fit.slope * x * math.log(10)
            coords.append(f"{_fmt(sx(x))},{_fmt(sy(y))}")
        return " ".join(coords)

    for idx, fit in enumerate(sorted(fits, key=lambda f: f.source_id)):
        color = _PALETTE[idx % len(_PALETTE)]
        r_lo, r_hi = math.log10(fit.compute_range[0]), math.log10(fit.compute_range[1])
        # Solid inside the fitted range, dotted where extrapolated.
        if x_lo < r_lo:
            parts.append(
                f'<polyline points="{line_points(fit, x_lo, r_lo)}" fill="none"'
                f' stroke="{color}" stroke-width="1.5" stroke-dasharray="3,4"/>'
            )
        parts.append(
            f'<polyline points="{line_points(fit, max(x_lo, r_lo), min(x_hi, r_hi))}"'
            f' fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        if r_hi < x_hi:
            parts.append(
                f'<polyline points="{line_points(fit, r_hi, x_hi)}" fill="none"'
                f' stroke="{color}" stroke-width="1.5" stroke-dasharray="3,4"/>'
            )
        label_y = _MARGIN_TOP + 16 + 16 * idx
        parts.append(
            f'<line x1="{_WIDTH - _MARGIN_RIGHT + 10}" y1="{label_y - 4}"'
            f' x2="{_WIDTH - _MARGIN_RIGHT + 34}" y2="{label_y - 4}" stroke="{color}"'
            ' stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{_WIDTH - _MARGIN_RIGHT + 40}" y="{label_y}" font-size="11"'
            f' font-family="sans-serif">{fit.source_id}</text>'
        )
        for point in points:
            if point.source_id == fit.source_id:
                parts.append(
                    f'<circle cx="{_fmt(sx(math.log10(point.compute)))}"'
                    f' cy="{_fmt(sy(point.delta.value))}" r="3.5" fill="{color}"/>'
                )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
