"""Deterministic SVG drawing of the combined graph of a 3-system."""

from __future__ import annotations

from .numbers import to_float
from .three_system import ThreeSystem, change_points, eval_pl

COLORS = ("#1f77b4", "#2ca02c", "#d62728")
STROKE = "1.5"
MARGIN = 40


def _num(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _dedup(items: list[str]) -> list[str]:
    out: list[str] = []
    for it in items:
        if not out or out[-1] != it:
            out.append(it)
    return out


def render_svg(system: ThreeSystem, width: int = 800, height: int = 500,
               q_lo=None, q_hi=None) -> str:
    """Combined graph of P1, P2, P3 over [q_lo, q_hi] (default: the whole domain)."""
    if width <= 0 or height <= 0:
        raise ValueError("width and height must be positive")
    lo = system.q0 if q_lo is None else max(q_lo, system.q0)
    hi = system.horizon if q_hi is None else min(q_hi, system.horizon)
    if not lo < hi:
        raise ValueError("empty q range")
    qs = [lo] + [q for q in system.breakpoints() if lo < q < hi] + [hi]
    x0, x1 = to_float(lo), to_float(hi)
    top = to_float(eval_pl(system.components[2], hi)) or 1.0
    pw, ph = width - 2 * MARGIN, height - 2 * MARGIN

    def xy(q, v) -> str:
        x = MARGIN + (to_float(q) - x0) / (x1 - x0) * pw
        y = height - MARGIN - to_float(v) / top * ph
        return f"{_num(x)},{_num(y)}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<line x1="{MARGIN}" y1="{height - MARGIN}" x2="{width - MARGIN}" y2="{height - MARGIN}" '
        'stroke="#000000" stroke-width="1"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{height - MARGIN}" '
        'stroke="#000000" stroke-width="1"/>',
    ]
    for j, comp in enumerate(system.components):
        pts = " ".join(_dedup([xy(q, eval_pl(comp, q)) for q in qs]))
        out.append(f'<polyline id="P{j + 1}" fill="none" stroke="{COLORS[j]}" '
                   f'stroke-width="{STROKE}" points="{pts}"/>')
    for j, comp in enumerate(system.components):
        marks = _dedup([xy(q, eval_pl(comp, q)) for q in change_points(comp) if lo <= q <= hi])
        for m in marks:
            x, y = m.split(",")
            out.append(f'<circle cx="{x}" cy="{y}" r="2.5" fill="{COLORS[j]}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
