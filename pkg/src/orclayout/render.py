"""JSON and SVG output for solved layouts."""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any
from xml.sax.saxutils import escape, quoteattr

from .engine import SolvedLayout, Viewport

DECIMALS = 6


def _num(x: float) -> float | int:
    x = round(float(x), DECIMALS)
    if x == 0:
        return 0  # no "-0.0"
    if x.is_integer() and abs(x) < 2 ** 53:
        return int(x)
    return x


def _plain(v: Any) -> Any:
    if isinstance(v, (tuple, list)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, (int, float)) or hasattr(v, "__float__"):
        f = float(v)
        return _num(f) if math.isfinite(f) else str(f)
    return str(v)


def to_dict(solved: SolvedLayout, include_time: bool = True) -> dict:
    vp = solved.viewport
    widgets = [{"name": name, "left": _num(r[0]), "top": _num(r[1]),
                "width": _num(r[2]), "height": _num(r[3])}
               for name, r in solved.rects.items()]
    st = solved.stats
    return {
        "viewport": {"width": _num(vp.width), "height": _num(vp.height)},
        "totalLoss": _plain(solved.loss),
        "widgets": widgets,
        "omitted": sorted(solved.omitted),
        "choices": _plain(solved.choices),
        "stats": {"nodes": st.nodes, "qpCalls": st.qp_calls,
                  "ms": _num(st.wall_time * 1000.0) if include_time else None},
    }


def emit_json(solved: SolvedLayout, include_time: bool = True) -> str:
    """Serialize geometry, loss and search statistics.

    Key order is fixed and numbers carry at most six decimals. Pass
    ``include_time=False`` for byte-reproducible output (``stats.ms`` is null).
    """
    return json.dumps(to_dict(solved, include_time), indent=2) + "\n"


def widget_color(name: str) -> str:
    """Stable pastel fill derived from the widget name."""
    h = hashlib.sha1(name.encode("utf-8")).digest()
    hue = int.from_bytes(h[:2], "big") % 360
    sat = 45 + h[2] % 25
    light = 72 + h[3] % 12
    return f"hsl({hue},{sat}%,{light}%)"


def _fmt(x: float) -> str:
    v = _num(x)
    return str(v)


def render_svg(solved: SolvedLayout, viewport: Viewport | None = None) -> str:
    vp = viewport or solved.viewport
    w, h = _fmt(vp.width), _fmt(vp.height)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
           f'  <rect x="0" y="0" width="{w}" height="{h}" fill="white" stroke="none"/>']
    for name, (x, y, rw, rh) in solved.rects.items():
        label = escape(name)
        out.append(f'  <rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(rw)}" height="{_fmt(rh)}" '
                   f'fill={quoteattr(widget_color(name))} stroke="#333" stroke-width="1"/>')
        size = max(6.0, min(14.0, rh * 0.5))
        out.append(f'  <text x="{_fmt(x + rw / 2)}" y="{_fmt(y + rh / 2)}" font-family="sans-serif" '
                   f'font-size="{_fmt(size)}" text-anchor="middle" dominant-baseline="central">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
