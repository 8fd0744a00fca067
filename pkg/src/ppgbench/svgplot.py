"""Minimal deterministic SVG scatter/line plots.

Hand-rolled so figure files are byte-stable and need no rendering backend.
"""

from __future__ import annotations

import math

_WIDTH = 640
_HEIGHT = 480
_MARGIN = 60


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    magnitude = 10 ** math.floor(math.log10(step))
    step = math.ceil(step / magnitude) * magnitude
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9:
        if t >= lo - 1e-9:
            ticks.append(round(t, 10))
        t += step
    return ticks or [lo, hi]


class SvgPlot:
    def __init__(self, title: str, xlabel: str, ylabel: str):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.scatters: list[tuple[list, list, str]] = []
        self.lines: list[tuple[list, list, str]] = []
        self.annotations: list[str] = []

    def scatter(self, xs, ys, color: str = "#1f6fb2") -> None:
        self.scatters.append((list(xs), list(ys), color))

    def line(self, xs, ys, color: str = "#b23a1f") -> None:
        self.lines.append((list(xs), list(ys), color))

    def annotate(self, text: str) -> None:
        self.annotations.append(text)

    def _bounds(self):
        xs, ys = [], []
        for sx, sy, _ in self.scatters + self.lines:
            xs.extend(sx)
            ys.extend(sy)
        if not xs:
            xs, ys = [0.0, 1.0], [0.0, 1.0]
        lo_x, hi_x = min(xs), max(xs)
        lo_y, hi_y = min(ys), max(ys)
        pad_x = 0.05 * (hi_x - lo_x or 1.0)
        pad_y = 0.05 * (hi_y - lo_y or 1.0)
        return lo_x - pad_x, hi_x + pad_x, lo_y - pad_y, hi_y + pad_y

    def render(self) -> str:
        lo_x, hi_x, lo_y, hi_y = self._bounds()
        plot_w = _WIDTH - 2 * _MARGIN
        plot_h = _HEIGHT - 2 * _MARGIN

        def px(x: float) -> float:
            return _MARGIN + (x - lo_x) / (hi_x - lo_x) * plot_w

        def py(y: float) -> float:
            return _HEIGHT - _MARGIN - (y - lo_y) / (hi_y - lo_y) * plot_h

        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
            f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
            f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
            f'<text x="{_WIDTH // 2}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="16">{self.title}</text>',
        ]
        # axes
        parts.append(
            f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{plot_w}" height="{plot_h}" '
            'fill="none" stroke="black"/>'
        )
        for t in _ticks(lo_x, hi_x):
            x = px(t)
            parts.append(
                f'<line x1="{_fmt(x)}" y1="{_HEIGHT - _MARGIN}" x2="{_fmt(x)}" '
                f'y2="{_HEIGHT - _MARGIN + 5}" stroke="black"/>'
            )
            parts.append(
                f'<text x="{_fmt(x)}" y="{_HEIGHT - _MARGIN + 20}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11">{t:g}</text>'
            )
        for t in _ticks(lo_y, hi_y):
            y = py(t)
            parts.append(
                f'<line x1="{_MARGIN - 5}" y1="{_fmt(y)}" x2="{_MARGIN}" '
                f'y2="{_fmt(y)}" stroke="black"/>'
            )
            parts.append(
                f'<text x="{_MARGIN - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11">{t:g}</text>'
            )
        parts.append(
            f'<text x="{_WIDTH // 2}" y="{_HEIGHT - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{self.xlabel}</text>'
        )
        parts.append(
            f'<text x="18" y="{_HEIGHT // 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13" '
            f'transform="rotate(-90 18 {_HEIGHT // 2})">{self.ylabel}</text>'
        )
        for xs, ys, color in self.lines:
            points = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
            parts.append(
                f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        for xs, ys, color in self.scatters:
            for x, y in zip(xs, ys):
                parts.append(
                    f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="2.5" '
                    f'fill="{color}" fill-opacity="0.6"/>'
                )
        for i, text in enumerate(self.annotations):
            parts.append(
                f'<text x="{_MARGIN + 10}" y="{_MARGIN + 20 + 16 * i}" '
                f'font-family="sans-serif" font-size="12">{text}</text>'
            )
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
