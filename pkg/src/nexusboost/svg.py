"""Minimal SVG 1.1 emitters for periodograms and clustered heat maps."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

LIGHT = (247, 251, 255)
DARK = (8, 48, 107)


def shade(fraction: float) -> str:
    """Blue ramp: 0 -> near white, 1 -> dark blue; luminance falls monotonically."""
    f = min(max(float(fraction), 0.0), 1.0)
    rgb = [round(lo + (hi - lo) * f) for lo, hi in zip(LIGHT, DARK)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _doc(width, height, body):
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )


def periodogram_svg(pg, title: str = "", detected=None, width: int = 640, height: int = 360) -> str:
    """Line chart of power against period (months), longest period on the left."""
    left, right, top, bottom = 60, 20, 40, 50
    w, h = width - left - right, height - top - bottom
    periods = pg.periods[::-1]
    power = pg.power[::-1]
    x_lo, x_hi = np.log(periods[0]), np.log(periods[-1])
    y_hi = float(power.max()) or 1.0

    def px(period):
        return left + w * (np.log(period) - x_lo) / ((x_hi - x_lo) or 1.0)

    def py(value):
        return top + h * (1.0 - value / y_hi)

    points = " ".join(f"{px(p):.2f},{py(v):.2f}" for p, v in zip(periods, power))
    body = [
        f'<text x="{width / 2:.0f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + h}" x2="{left + w}" y2="{top + h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + h}" stroke="black"/>',
        f'<polyline fill="none" stroke="#08519c" stroke-width="1.5" points="{points}"/>',
        f'<text x="{left + w / 2:.0f}" y="{height - 12}" text-anchor="middle" font-size="12">period (months, log scale)</text>',
        f'<text x="16" y="{top + h / 2:.0f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {top + h / 2:.0f})">power</text>',
    ]
    for tick in (2, 3, 4, 6, 12, 24, 60):
        if periods[-1] <= tick <= periods[0]:
            x = px(tick)
            body.append(f'<line x1="{x:.2f}" y1="{top + h}" x2="{x:.2f}" y2="{top + h + 5}" stroke="black"/>')
            body.append(f'<text x="{x:.2f}" y="{top + h + 18}" text-anchor="middle" font-size="11">{tick}</text>')
    if detected is not None:
        x = px(detected)
        body.append(f'<line x1="{x:.2f}" y1="{top}" x2="{x:.2f}" y2="{top + h}" stroke="#cb181d" stroke-dasharray="4 3"/>')
        body.append(f'<text x="{x + 4:.2f}" y="{top + 12}" font-size="11" fill="#cb181d">{detected}-month peak</text>')
    return _doc(width, height, body)


def heatmap_svg(entries, row_labels, col_labels, title: str = "", cell: int = 48) -> str:
    """Grid of shaded cells; darker means a larger value."""
    entries = np.asarray(entries, dtype=float)
    lo, hi = float(entries.min()), float(entries.max())
    span = hi - lo
    label_w = 12 + 7 * max((len(str(r)) for r in row_labels), default=0)
    top = 40 + 7 * max((len(str(c)) for c in col_labels), default=0)
    width = label_w + cell * entries.shape[1] + 20
    height = top + cell * entries.shape[0] + 20
    body = [f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="15">{escape(title)}</text>']
    for j, label in enumerate(col_labels):
        x = label_w + cell * j + cell / 2
        body.append(f'<text x="{x:.1f}" y="{top - 6}" font-size="11" '
                    f'transform="rotate(-60 {x:.1f} {top - 6})">{escape(str(label))}</text>')
    for i, label in enumerate(row_labels):
        y = top + cell * i
        body.append(f'<text x="{label_w - 6}" y="{y + cell / 2 + 4:.1f}" text-anchor="end" '
                    f'font-size="11">{escape(str(label))}</text>')
        for j in range(entries.shape[1]):
            value = entries[i, j]
            fraction = (value - lo) / span if span > 0 else 0.0
            body.append(
                f'<rect x="{label_w + cell * j}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{shade(fraction)}" stroke="white" data-value="{float(value)!r}"/>'
            )
    return _doc(width, height, body)
