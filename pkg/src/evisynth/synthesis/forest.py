"""Hand-rolled forest-plot SVG.

No plotting library: the layout is a few hundred floats and determinism
matters more than styling. Every element that a test (or the review UI)
needs to find carries a stable id: study-<pmid>-marker, study-<pmid>-ci,
pooled-diamond, ref-line, axis. Coordinates are formatted to two decimals
so identical inputs yield byte-identical documents.
"""

from __future__ import annotations

import math
from html import escape

from .effects import PooledResult, StudyEffect, Z95

_PLOT_X0 = 230.0
_PLOT_X1 = 570.0
_ROW_H = 28.0
_TOP = 46.0
_WIDTH = 780.0
_TICK_CANDIDATES = (0.1, 0.2, 0.25, 0.5, 1.0, 2.0, 4.0, 5.0, 10.0)
_MAX_SIDE = 16.0
_MIN_SIDE = 5.0


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def render_forest(
    effects: list[StudyEffect] | tuple[StudyEffect, ...],
    pooled: PooledResult,
    labels: dict[str, str] | None = None,
    title: str = "",
) -> str:
    """Render studies plus the pooled diamond. ``effects`` must be the rows
    the pooled result was computed from (same pmids, same order)."""
    if [e.pmid for e in effects] != [p for p, _ in pooled.weights]:
        raise ValueError("effects do not match pooled.weights")
    labels = labels or {}
    weight_of = dict(pooled.weights)

    los = [e.log_effect - Z95 * e.se for e in effects] + [pooled.ci_low, 0.0]
    his = [e.log_effect + Z95 * e.se for e in effects] + [pooled.ci_high, 0.0]
    lo, hi = min(los), max(his)
    pad = 0.05 * (hi - lo) or 0.5
    lo, hi = lo - pad, hi + pad

    def x(value: float) -> float:
        return _PLOT_X0 + (value - lo) / (hi - lo) * (_PLOT_X1 - _PLOT_X0)

    k = len(effects)
    axis_y = _TOP + (k + 1) * _ROW_H + 14.0
    height = axis_y + 40.0

    parts: list[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH:g}" height="{height:g}" '
        f'viewBox="0 0 {_WIDTH:g} {height:g}" font-family="sans-serif" font-size="12">'
    )
    parts.append(f'<rect width="{_WIDTH:g}" height="{height:g}" fill="white"/>')
    if title:
        parts.append(
            f'<text x="{_fmt(_WIDTH / 2)}" y="20" text-anchor="middle" '
            f'font-size="14" font-weight="bold">{escape(title)}</text>'
        )
    parts.append(
        f'<text x="10" y="{_fmt(_TOP - 10)}" font-weight="bold">Study</text>'
        f'<text x="{_fmt(_PLOT_X1 + 16)}" y="{_fmt(_TOP - 10)}" font-weight="bold">'
        f"RR (95% CI)</text>"
        f'<text x="{_fmt(_WIDTH - 10)}" y="{_fmt(_TOP - 10)}" text-anchor="end" '
        f'font-weight="bold">Weight</text>'
    )

    # reference line at effect 1 (log 0)
    parts.append(
        f'<line id="ref-line" x1="{_fmt(x(0.0))}" y1="{_fmt(_TOP - 4)}" '
        f'x2="{_fmt(x(0.0))}" y2="{_fmt(axis_y)}" stroke="#999" stroke-dasharray="4 3"/>'
    )

    for i, effect in enumerate(effects):
        mid = _TOP + i * _ROW_H + _ROW_H / 2
        ci_lo = effect.log_effect - Z95 * effect.se
        ci_hi = effect.log_effect + Z95 * effect.se
        weight = weight_of[effect.pmid]
        side = _MIN_SIDE + math.sqrt(weight) * (_MAX_SIDE - _MIN_SIDE)
        cx = x(effect.log_effect)
        label = labels.get(effect.pmid, effect.pmid)
        parts.append(f'<g id="study-{escape(effect.pmid)}">')
        parts.append(
            f'<text id="study-{escape(effect.pmid)}-label" x="10" y="{_fmt(mid + 4)}">'
            f"{escape(label)}</text>"
        )
        parts.append(
            f'<line id="study-{escape(effect.pmid)}-ci" x1="{_fmt(x(ci_lo))}" '
            f'y1="{_fmt(mid)}" x2="{_fmt(x(ci_hi))}" y2="{_fmt(mid)}" stroke="black"/>'
        )
        parts.append(
            f'<rect id="study-{escape(effect.pmid)}-marker" '
            f'x="{_fmt(cx - side / 2)}" y="{_fmt(mid - side / 2)}" '
            f'width="{_fmt(side)}" height="{_fmt(side)}" fill="#444"/>'
        )
        parts.append(
            f'<text x="{_fmt(_PLOT_X1 + 16)}" y="{_fmt(mid + 4)}">'
            f"{math.exp(effect.log_effect):.2f} "
            f"({math.exp(ci_lo):.2f}, {math.exp(ci_hi):.2f})</text>"
        )
        parts.append(
            f'<text x="{_fmt(_WIDTH - 10)}" y="{_fmt(mid + 4)}" text-anchor="end">'
            f"{weight * 100:.1f}%</text>"
        )
        parts.append("</g>")

    # pooled diamond: horizontal extent is the CI, waist at the estimate
    mid = _TOP + k * _ROW_H + _ROW_H / 2
    half = 7.0
    diamond = (
        f"{_fmt(x(pooled.ci_low))},{_fmt(mid)} "
        f"{_fmt(x(pooled.estimate))},{_fmt(mid - half)} "
        f"{_fmt(x(pooled.ci_high))},{_fmt(mid)} "
        f"{_fmt(x(pooled.estimate))},{_fmt(mid + half)}"
    )
    method_label = "fixed effect" if pooled.method == "fixed_iv" else "random effects"
    parts.append(
        f'<text x="10" y="{_fmt(mid + 4)}" font-weight="bold">Pooled ({method_label})</text>'
    )
    parts.append(f'<polygon id="pooled-diamond" points="{diamond}" fill="#1a4f8a"/>')
    parts.append(
        f'<text x="{_fmt(_PLOT_X1 + 16)}" y="{_fmt(mid + 4)}" font-weight="bold">'
        f"{pooled.exp_estimate:.2f} ({pooled.exp_ci_low:.2f}, {pooled.exp_ci_high:.2f})</text>"
    )
    parts.append(
        f'<text x="{_fmt(_WIDTH - 10)}" y="{_fmt(mid + 4)}" text-anchor="end">100.0%</text>'
    )

    # axis with ticks at round effect values inside the domain
    parts.append(f'<g id="axis" stroke="black">')
    parts.append(
        f'<line x1="{_fmt(_PLOT_X0)}" y1="{_fmt(axis_y)}" '
        f'x2="{_fmt(_PLOT_X1)}" y2="{_fmt(axis_y)}"/>'
    )
    for tick in _TICK_CANDIDATES:
        log_tick = math.log(tick)
        if lo <= log_tick <= hi:
            tx = x(log_tick)
            parts.append(
                f'<line x1="{_fmt(tx)}" y1="{_fmt(axis_y)}" x2="{_fmt(tx)}" '
                f'y2="{_fmt(axis_y + 5)}"/>'
            )
            parts.append(
                f'<text x="{_fmt(tx)}" y="{_fmt(axis_y + 18)}" text-anchor="middle" '
                f'stroke="none">{tick:g}</text>'
            )
    parts.append("</g>")
    parts.append(
        f'<text x="{_fmt((_PLOT_X0 + _PLOT_X1) / 2)}" y="{_fmt(axis_y + 34)}" '
        f'text-anchor="middle" fill="#555" stroke="none">risk ratio (log scale)</text>'
    )
    parts.append("</svg>")
    return "".join(parts) + "\n"
