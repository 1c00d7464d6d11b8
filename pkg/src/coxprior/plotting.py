"""Prior density curves as CSV rows or a minimal standalone SVG."""
from __future__ import annotations

import csv
import io
from xml.sax.saxutils import escape

from .priors import Kind, LogHrPrior, density_curve

INFORMATIVE_COLORS = ("#1f4e9c", "#3a78d6", "#6fa8f0")
NONINFORMATIVE_COLORS = ("#c0392b", "#e0663f", "#f29a7a")


def curves(priors: list[LogHrPrior], hr_min: float, hr_max: float, points: int):
    return [(p, density_curve(p, hr_min, hr_max, points)) for p in priors]


def curves_csv(priors, hr_min, hr_max, points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["prior_label", "hr", "density"])
    for prior, pts in curves(priors, hr_min, hr_max, points):
        for hr, dens in pts:
            w.writerow([prior.label, repr(hr), repr(dens)])
    return buf.getvalue()


def curves_svg(priors, hr_min, hr_max, points, width: int = 720, height: int = 420) -> str:
    """Informative priors in blues, non-informative in reds."""
    data = curves(priors, hr_min, hr_max, points)
    left, right, top, bottom = 60, 190, 20, 45
    pw, ph = width - left - right, height - top - bottom
    y_max = max((d for _, pts in data for _, d in pts), default=1.0) or 1.0
    y_max *= 1.05

    def sx(x):
        return left + (x - hr_min) / (hr_max - hr_min) * pw

    def sy(y):
        return top + ph - y / y_max * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for i in range(6):
        x = hr_min + i * (hr_max - hr_min) / 5
        out.append(f'<line x1="{sx(x):.2f}" y1="{top + ph}" x2="{sx(x):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(x):.2f}" y="{top + ph + 18}" text-anchor="middle">{x:.2f}</text>')
        y = i * y_max / 5
        out.append(f'<text x="{left - 6}" y="{sy(y) + 4:.2f}" text-anchor="end">{y:.2f}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 8}" text-anchor="middle">Hazard ratio</text>')
    out.append(
        f'<text x="14" y="{top + ph / 2}" text-anchor="middle" transform="rotate(-90 14 {top + ph / 2})">Density</text>'
    )
    n_inf = n_non = 0
    for k, (prior, pts) in enumerate(data):
        if prior.kind is Kind.INFORMATIVE:
            color, dash = INFORMATIVE_COLORS[n_inf % 3], ""
            n_inf += 1
        else:
            color, dash = NONINFORMATIVE_COLORS[n_non % 3], ' stroke-dasharray="6 3"'
            n_non += 1
        path = " ".join(f"{sx(x):.2f},{sy(min(d, y_max)):.2f}" for x, d in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{path}"/>')
        ly = top + 14 + 18 * k
        out.append(
            f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 36}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>'
        )
        out.append(f'<text x="{left + pw + 42}" y="{ly + 4}">{escape(prior.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
