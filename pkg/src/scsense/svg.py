"""Hand-emitted static SVG charts.

No plotting dependency: every chart is a deterministic string build, so the
byte-for-byte output is diffable and testable. Coordinates are formatted at
fixed precision and no timestamps or generated ids are embedded.
"""

from __future__ import annotations

import math

from .calibration import CoverageCurve
from .sensitivity import SensitivityReport

METRIC_COLORS = {
    "UnconstrainedWeight": "#1f77b4",
    "ConstrainedWeight": "#2ca02c",
    "ConstrainedError": "#d62728",
    "UnconstrainedWeightMulti": "#9467bd",
}
_FALLBACK_COLOR = "#7f7f7f"
_SERIES_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b")


def _f(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if not (hi > lo):
        hi = lo + 1.0
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if (hi - lo) / step <= target + 1:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


class Canvas:
    """A fixed-size chart frame with data-space helpers."""

    def __init__(self, width: int = 640, height: int = 420, title: str = ""):
        self.width = width
        self.height = height
        self.margin = (52.0, 16.0, 30.0, 42.0)  # left, right, top, bottom
        self.title = title
        self.parts: list[str] = []
        self.xlo = 0.0
        self.xhi = 1.0
        self.ylo = 0.0
        self.yhi = 1.0

    def set_range(self, xlo: float, xhi: float, ylo: float, yhi: float):
        if xhi <= xlo:
            xhi = xlo + 1.0
        if yhi <= ylo:
            yhi = ylo + 1.0
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def px(self, x: float) -> float:
        left, right = self.margin[0], self.margin[1]
        return left + (x - self.xlo) / (self.xhi - self.xlo) * (self.width - left - right)

    def py(self, y: float) -> float:
        top, bottom = self.margin[2], self.margin[3]
        return (
            self.height
            - bottom
            - (y - self.ylo) / (self.yhi - self.ylo) * (self.height - top - bottom)
        )

    def add(self, element: str):
        self.parts.append(element)

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0, dash=None, opacity=None):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        if opacity is not None:
            extra += f' stroke-opacity="{_f(opacity)}"'
        self.add(
            f'<line x1="{_f(self.px(x1))}" y1="{_f(self.py(y1))}" '
            f'x2="{_f(self.px(x2))}" y2="{_f(self.py(y2))}" '
            f'stroke="{stroke}" stroke-width="{_f(width)}"{extra}/>'
        )

    def polyline(self, points, stroke="#000000", width=1.5, dash=None):
        coords = " ".join(f"{_f(self.px(x))},{_f(self.py(y))}" for x, y in points)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
            f'stroke-width="{_f(width)}"{extra}/>'
        )

    def rect_data(self, x1, x2, y1, y2, fill, opacity=0.15):
        xa, xb = sorted((self.px(x1), self.px(x2)))
        ya, yb = sorted((self.py(y1), self.py(y2)))
        self.add(
            f'<rect x="{_f(xa)}" y="{_f(ya)}" width="{_f(xb - xa)}" height="{_f(yb - ya)}" '
            f'fill="{fill}" fill-opacity="{_f(opacity)}"/>'
        )

    def polygon_data(self, points, fill, opacity=0.25):
        coords = " ".join(f"{_f(self.px(x))},{_f(self.py(y))}" for x, y in points)
        self.add(f'<polygon points="{coords}" fill="{fill}" fill-opacity="{_f(opacity)}"/>')

    def text(self, x_px, y_px, s, size=11, anchor="start", color="#333333"):
        self.add(
            f'<text x="{_f(x_px)}" y="{_f(y_px)}" font-size="{size}" '
            f'text-anchor="{anchor}" fill="{color}" font-family="sans-serif">{_esc(s)}</text>'
        )

    def axes(self, xlabel: str = "", ylabel: str = "", x_ticks=None, y_ticks=None):
        left, right, top, bottom = self.margin
        x0, x1 = left, self.width - right
        y0, y1 = self.height - bottom, top
        self.add(
            f'<rect x="{_f(x0)}" y="{_f(y1)}" width="{_f(x1 - x0)}" height="{_f(y0 - y1)}" '
            f'fill="none" stroke="#999999" stroke-width="1.00"/>'
        )
        for t in x_ticks if x_ticks is not None else _ticks(self.xlo, self.xhi):
            if not self.xlo - 1e-9 <= t <= self.xhi + 1e-9:
                continue
            xp = self.px(t)
            self.add(
                f'<line x1="{_f(xp)}" y1="{_f(y0)}" x2="{_f(xp)}" y2="{_f(y0 + 4)}" '
                f'stroke="#999999" stroke-width="1.00"/>'
            )
            self.text(xp, y0 + 16, f"{t:g}", anchor="middle")
        for t in y_ticks if y_ticks is not None else _ticks(self.ylo, self.yhi):
            if not self.ylo - 1e-9 <= t <= self.yhi + 1e-9:
                continue
            yp = self.py(t)
            self.add(
                f'<line x1="{_f(x0 - 4)}" y1="{_f(yp)}" x2="{_f(x0)}" y2="{_f(yp)}" '
                f'stroke="#999999" stroke-width="1.00"/>'
            )
            self.text(x0 - 7, yp + 4, f"{t:g}", anchor="end")
        if xlabel:
            self.text((x0 + x1) / 2, self.height - 8, xlabel, anchor="middle")
        if ylabel:
            cx, cy = 14.0, (y0 + y1) / 2
            self.add(
                f'<text x="{_f(cx)}" y="{_f(cy)}" font-size="11" text-anchor="middle" '
                f'fill="#333333" font-family="sans-serif" '
                f'transform="rotate(-90 {_f(cx)} {_f(cy)})">{_esc(ylabel)}</text>'
            )
        if self.title:
            self.text(self.width / 2, 18, self.title, size=13, anchor="middle", color="#111111")

    def legend(self, entries, x_px=None, y_px=None):
        x = self.margin[0] + 10 if x_px is None else x_px
        y = self.margin[2] + 14 if y_px is None else y_px
        for label, color in entries:
            self.add(
                f'<line x1="{_f(x)}" y1="{_f(y - 3)}" x2="{_f(x + 18)}" y2="{_f(y - 3)}" '
                f'stroke="{color}" stroke-width="2.00"/>'
            )
            self.text(x + 24, y, label)
            y += 15

    def render(self) -> str:
        body = "\n".join(self.parts)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="#ffffff"/>\n'
            f"{body}\n</svg>\n"
        )


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def trend_chart(
    periods,
    series: list[tuple[str, list[float], str]],
    vlines: list[float] = (),
    band=None,
    title: str = "",
    ylabel: str = "outcome",
) -> str:
    """Outcome trends over periods. series = [(label, values, color)];
    band = optional (lo_values, hi_values) envelope."""
    canvas = Canvas(title=title)
    ys = [v for _, values, _ in series for v in values]
    if band is not None:
        ys += list(band[0]) + list(band[1])
    ylo, yhi = min(ys), max(ys)
    pad = 0.06 * (yhi - ylo or 1.0)
    canvas.set_range(min(periods), max(periods), ylo - pad, yhi + pad)
    if band is not None:
        lo_pts = list(zip(periods, band[0]))
        hi_pts = list(zip(periods, band[1]))[::-1]
        canvas.polygon_data(lo_pts + hi_pts, fill="#bbbbbb", opacity=0.45)
    for x in vlines:
        canvas.line(x, canvas.ylo, x, canvas.yhi, stroke="#888888", dash="5,4")
    for label, values, color in series:
        canvas.polyline(list(zip(periods, values)), stroke=color, width=1.8)
    canvas.axes(xlabel="period", ylabel=ylabel)
    canvas.legend([(label, color) for label, values, color in series])
    return canvas.render()


def bounds_chart(reports: list[SensitivityReport], title: str = "") -> str:
    """Per-rank bound intervals against placebo-error percentile ranks.

    Dotted horizontal line: the point estimate. Solid gray line: zero.
    Shaded band per report: ranks between which a zero effect first becomes
    plausible. Infinite intervals are unplottable and skipped, like the
    extreme-unit footnotes in the source figures.
    """
    canvas = Canvas(title=title)
    finite = [
        v
        for r in reports
        for row in r.placebo
        if row.plottable
        for v in (row.lo, row.hi)
    ]
    for r in reports:
        finite.append(r.tau_hat)
    finite.append(0.0)
    ylo, yhi = min(finite), max(finite)
    pad = 0.06 * (yhi - ylo or 1.0)
    canvas.set_range(0.0, 1.0, ylo - pad, yhi + pad)
    for r in reports:
        color = METRIC_COLORS.get(r.metric.kind, _FALLBACK_COLOR)
        n = r.n_controls
        nu_hi = min(r.nu + 1.0 / n, 1.0)
        canvas.rect_data(r.nu, nu_hi, canvas.ylo, canvas.yhi, fill=color, opacity=0.15)
    canvas.line(0.0, 0.0, 1.0, 0.0, stroke="#666666", width=1.0)
    for r in reports:
        canvas.line(0.0, r.tau_hat, 1.0, r.tau_hat, stroke="#333333", width=1.0, dash="2,3")
        color = METRIC_COLORS.get(r.metric.kind, _FALLBACK_COLOR)
        for row in r.placebo:
            if not row.plottable:
                continue
            x = row.percentile_rank
            canvas.line(x, row.lo, x, row.hi, stroke=color, width=1.6)
            for y in (row.lo, row.hi):
                xp, yp = canvas.px(x), canvas.py(y)
                canvas.add(
                    f'<circle cx="{_f(xp)}" cy="{_f(yp)}" r="1.80" fill="{color}"/>'
                )
    canvas.axes(xlabel="placebo error percentile rank", ylabel="effect bound")
    canvas.legend(
        [(r.metric.kind, METRIC_COLORS.get(r.metric.kind, _FALLBACK_COLOR)) for r in reports]
    )
    return canvas.render()


def coverage_chart(curves: list[CoverageCurve], title: str = "") -> str:
    """Coverage against cutoff rank with the dashed 45-degree reference."""
    canvas = Canvas(title=title)
    canvas.set_range(0.0, 1.0, 0.0, 1.0)
    canvas.polyline([(0.0, 0.0), (1.0, 1.0)], stroke="#000000", width=1.0, dash="5,4")
    for i, curve in enumerate(curves):
        color = METRIC_COLORS.get(curve.metric.kind, _SERIES_COLORS[i % len(_SERIES_COLORS)])
        pts = [(0.0, 0.0)] + list(curve.points)
        step_pts = []
        for k in range(1, len(pts)):
            step_pts.append((pts[k][0], pts[k - 1][1]))
            step_pts.append(pts[k])
        canvas.polyline([pts[0]] + step_pts, stroke=color, width=1.8)
    canvas.axes(xlabel="percentile-rank cutoff", ylabel="share covering zero")
    canvas.legend([(c.metric.kind, METRIC_COLORS.get(c.metric.kind, _FALLBACK_COLOR)) for c in curves])
    return canvas.render()
