"""Minimal SVG writers for the correlation heatmap and accuracy bar chart."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7")


def diverging_color(value: float) -> str:
    """Blue (-1) through white (0) to red (+1); |value| = 1 is full intensity."""
    v = float(np.clip(value, -1.0, 1.0))
    if v >= 0:
        r, g, b = 255, round(255 * (1 - v)), round(255 * (1 - v))
    else:
        r, g, b = round(255 * (1 + v)), round(255 * (1 + v)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def _doc(width, height, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n")


def heatmap_svg(matrix, labels, title="Pearson correlation", cell=34) -> str:
    m = np.asarray(matrix)
    n = m.shape[0]
    left, top = 260, 60
    width = left + n * cell + 40
    height = top + n * cell + 240
    body = [f'<text x="{width / 2}" y="30" text-anchor="middle" font-size="18">{escape(title)}</text>']
    for i in range(n):
        y = top + i * cell
        body.append(f'<text x="{left - 6}" y="{y + cell * 0.65:.1f}" text-anchor="end" font-size="11">'
                    f'{escape(labels[i])}</text>')
        for j in range(n):
            x = left + j * cell
            v = m[i, j]
            ink = "white" if abs(v) > 0.6 else "black"
            body.append(f'<rect class="cell" data-row="{i}" data-col="{j}" x="{x}" y="{y}" width="{cell}" '
                        f'height="{cell}" fill="{diverging_color(v)}" stroke="#dddddd"/>')
            body.append(f'<text x="{x + cell / 2}" y="{y + cell * 0.62:.1f}" text-anchor="middle" '
                        f'font-size="9" fill="{ink}">{v:.2f}</text>')
    base = top + n * cell + 8
    for j in range(n):
        x = left + j * cell + cell / 2
        body.append(f'<text x="{x}" y="{base}" font-size="11" text-anchor="end" '
                    f'transform="rotate(-60 {x} {base})">{escape(labels[j])}</text>')
    return _doc(width, height, body)


def grouped_bars_svg(groups, series, values, title="Accuracy vs train size",
                     y_label="Accuracy (%)", y_min=None) -> str:
    """``values[s][g]`` is the bar height for series s in group g (None = missing)."""
    flat = [v for row in values for v in row if v is not None]
    lo = y_min if y_min is not None else (max(0.0, 10 * np.floor(min(flat) / 10) - 10) if flat else 0.0)
    hi = 100.0
    left, top, plot_w, plot_h = 70, 50, 120 * max(len(groups), 1), 320
    width, height = left + plot_w + 180, top + plot_h + 70
    body = [f'<text x="{left + plot_w / 2}" y="28" text-anchor="middle" font-size="16">{escape(title)}</text>']

    def ypos(v):
        return top + plot_h * (1 - (v - lo) / (hi - lo))

    for tick in np.linspace(lo, hi, 6):
        y = ypos(tick)
        body.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + plot_w}" y2="{y:.1f}" stroke="#e0e0e0"/>')
        body.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{tick:.0f}</text>')
    body.append(f'<text x="18" y="{top + plot_h / 2}" font-size="12" text-anchor="middle" '
                f'transform="rotate(-90 18 {top + plot_h / 2})">{escape(y_label)}</text>')
    group_w = plot_w / max(len(groups), 1)
    bar_w = group_w * 0.8 / max(len(series), 1)
    for g, name in enumerate(groups):
        gx = left + g * group_w + group_w * 0.1
        for s in range(len(series)):
            v = values[s][g]
            if v is None:
                continue
            y = ypos(max(v, lo))
            body.append(f'<rect class="bar" x="{gx + s * bar_w:.1f}" y="{y:.1f}" width="{bar_w:.1f}" '
                        f'height="{top + plot_h - y:.1f}" fill="{PALETTE[s % len(PALETTE)]}">'
                        f'<title>{escape(series[s])} {escape(str(name))}: {v:.2f}</title></rect>')
        body.append(f'<text x="{left + g * group_w + group_w / 2:.1f}" y="{top + plot_h + 18}" '
                    f'text-anchor="middle" font-size="12">{escape(str(name))}</text>')
    body.append(f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="black"/>')
    for s, name in enumerate(series):
        y = top + 10 + s * 20
        body.append(f'<rect x="{left + plot_w + 20}" y="{y}" width="14" height="14" '
                    f'fill="{PALETTE[s % len(PALETTE)]}"/>')
        body.append(f'<text x="{left + plot_w + 40}" y="{y + 12}" font-size="12">{escape(name)}</text>')
    return _doc(width, height, body)
