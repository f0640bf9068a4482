"""Hand-rolled SVG charts for fitted share trajectories.

One figure per (country, method): three panels, one per sector, each
showing the posterior median with 80% and 95% bands plus the survey
observations with two-standard-error whiskers. Output is plain SVG
text with no external assets, so files render anywhere.
"""

from __future__ import annotations

import numpy as np

from .data import SECTOR_LABELS
from .diagnostics import QUANTILES
from .errors import ValidationError
from .sampler import PosteriorDraws

PANEL_W = 300
PANEL_H = 240
MARGIN_L = 42
MARGIN_R = 12
MARGIN_T = 46
MARGIN_B = 34
GAP = 18

BAND95_FILL = "#c6dbef"
BAND80_FILL = "#85bcdb"
MEDIAN_STROKE = "#08519c"
POINT_FILL = "#1a1a1a"
AXIS_STROKE = "#444444"
GRID_STROKE = "#dddddd"


def _fmt(x: float) -> str:
    return format(x, ".2f").rstrip("0").rstrip(".")


class _Panel:
    """Maps data coordinates into one panel's pixel box."""

    def __init__(self, index: int, y_min: float, y_max: float):
        self.x0 = MARGIN_L + index * (PANEL_W + GAP)
        self.y0 = MARGIN_T
        self.y_min = y_min
        self.y_max = y_max

    def x(self, year: float) -> float:
        f = (year - self.y_min) / (self.y_max - self.y_min)
        return self.x0 + f * PANEL_W

    def y(self, value: float) -> float:
        return self.y0 + (1.0 - value) * PANEL_H


def _polyline(points: list[tuple[float, float]]) -> str:
    return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)


def _band_path(panel: _Panel, years, lo, hi) -> str:
    forward = [(panel.x(t), panel.y(v)) for t, v in zip(years, hi)]
    back = [(panel.x(t), panel.y(v)) for t, v in zip(years[::-1], lo[::-1])]
    return "M" + " L".join(f"{_fmt(x)} {_fmt(y)}" for x, y in forward + back) + " Z"


def _year_ticks(y_min: float, y_max: float) -> list[float]:
    start = int(np.ceil(y_min / 10.0)) * 10
    return [float(t) for t in range(start, int(y_max) + 1, 10)]


def country_method_svg(draws: PosteriorDraws, country: str, method: str) -> str:
    """Render the three-sector trajectory figure as an SVG string."""
    ds = draws.dataset
    if country not in ds.countries:
        raise ValidationError(f"unknown country {country!r}")
    if method not in ds.methods:
        raise ValidationError(f"unknown method {method!r}")
    c = ds.countries.index(country)
    m = ds.methods.index(method)
    years = np.asarray(draws.bases[c].year_grid, dtype=float)
    phi = draws.phi(c)
    q = np.quantile(phi[:, :, m, :], QUANTILES, axis=0)  # (5, T, 3)

    width = MARGIN_L + 3 * PANEL_W + 2 * GAP + MARGIN_R
    height = MARGIN_T + PANEL_H + MARGIN_B
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{MARGIN_L}" y="20" font-family="sans-serif" font-size="15" '
        f'font-weight="bold" fill="#111111">{country} / {method}</text>',
    ]
    mask = (ds.country_idx == c) & (ds.method_idx == m)
    for s, label in enumerate(SECTOR_LABELS):
        panel = _Panel(s, years[0], years[-1])
        x0, y0 = panel.x0, panel.y0
        out.append(
            f'<text x="{x0}" y="{y0 - 8}" font-family="sans-serif" '
            f'font-size="12" fill="#333333">{label}</text>'
        )
        for frac in (0.25, 0.5, 0.75):
            gy = _fmt(panel.y(frac))
            out.append(
                f'<line x1="{x0}" y1="{gy}" x2="{x0 + PANEL_W}" y2="{gy}" '
                f'stroke="{GRID_STROKE}" stroke-width="1"/>'
            )
        out.append(
            f'<path d="{_band_path(panel, years, q[0, :, s], q[4, :, s])}" '
            f'fill="{BAND95_FILL}" stroke="none"/>'
        )
        out.append(
            f'<path d="{_band_path(panel, years, q[1, :, s], q[3, :, s])}" '
            f'fill="{BAND80_FILL}" stroke="none"/>'
        )
        median = [(panel.x(t), panel.y(v)) for t, v in zip(years, q[2, :, s])]
        out.append(
            f'<polyline points="{_polyline(median)}" fill="none" '
            f'stroke="{MEDIAN_STROKE}" stroke-width="1.5"/>'
        )
        rows = np.flatnonzero(mask & (ds.sector == s + 1))
        for i in rows:
            px = _fmt(panel.x(float(ds.year[i])))
            v = float(ds.value[i])
            lo = max(0.0, v - 2.0 * float(ds.se[i]))
            hi = min(1.0, v + 2.0 * float(ds.se[i]))
            out.append(
                f'<line x1="{px}" y1="{_fmt(panel.y(lo))}" x2="{px}" '
                f'y2="{_fmt(panel.y(hi))}" stroke="{POINT_FILL}" stroke-width="1"/>'
            )
            out.append(
                f'<circle cx="{px}" cy="{_fmt(panel.y(v))}" r="2.5" '
                f'fill="{POINT_FILL}"/>'
            )
        out.append(
            f'<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" '
            f'fill="none" stroke="{AXIS_STROKE}" stroke-width="1"/>'
        )
        for tick in _year_ticks(years[0], years[-1]):
            tx = _fmt(panel.x(tick))
            out.append(
                f'<line x1="{tx}" y1="{y0 + PANEL_H}" x2="{tx}" '
                f'y2="{y0 + PANEL_H + 4}" stroke="{AXIS_STROKE}" stroke-width="1"/>'
            )
            out.append(
                f'<text x="{tx}" y="{y0 + PANEL_H + 16}" font-family="sans-serif" '
                f'font-size="10" fill="#333333" text-anchor="middle">'
                f"{int(tick)}</text>"
            )
        if s == 0:
            for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
                ty = _fmt(panel.y(frac))
                out.append(
                    f'<text x="{x0 - 6}" y="{ty}" font-family="sans-serif" '
                    f'font-size="10" fill="#333333" text-anchor="end" '
                    f'dominant-baseline="middle">{_fmt(frac)}</text>'
                )
    out.append("</svg>")
    return "\n".join(out) + "\n"
