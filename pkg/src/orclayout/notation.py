"""ORC layout trees: data types, text grammar, validation and Pivot expansion.

A layout is a tree of widgets and containers::

    Column(HorizontalFlow(a, b, c), Row(VerticalFlow(d, e), TextBox))

Attributes go in square brackets after any node::

    w[min=50x20, pref=100x40, max=150x60, weight=2, optional=true, priority=3]
    HF[balanced=true](a, b, c, d)      # attrs may also follow the ")"

Container-only attributes: ``id``, ``balanced``, ``group`` (connected flows),
``hole=WxH@X:Y`` (fixed area inside a flow). Any node may carry
``alt=<container id>`` and ``altpenalty=<num>`` to declare an alternative
position.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

MAX_SENTINEL = 1e7

WIDGET = "Widget"
ROW = "Row"
COLUMN = "Column"
HFLOW = "HorizontalFlow"
VFLOW = "VerticalFlow"
PIVOT = "Pivot"

KIND_ALIASES = {
    "Row": ROW,
    "Column": COLUMN,
    "HorizontalFlow": HFLOW,
    "HF": HFLOW,
    "VerticalFlow": VFLOW,
    "VF": VFLOW,
    "Pivot": PIVOT,
}
CONTAINERS = (ROW, COLUMN, HFLOW, VFLOW, PIVOT)
FLOWS = (HFLOW, VFLOW)
LINEAR = (ROW, COLUMN)


@dataclass(frozen=True)
class SizeSpec:
    min_w: float = 0.0
    pref_w: float = 100.0
    max_w: float = MAX_SENTINEL
    min_h: float = 0.0
    pref_h: float = 30.0
    max_h: float = MAX_SENTINEL
    weight: float = 1.0
    optional: bool = False
    priority: float = 0.0

    def violations(self) -> list[str]:
        out = []
        for axis, lo, p, hi in (("width", self.min_w, self.pref_w, self.max_w),
                                ("height", self.min_h, self.pref_h, self.max_h)):
            if not (0 <= lo <= p <= hi):
                out.append(f"{axis} bounds must satisfy 0 <= min <= pref <= max "
                           f"(got min={lo:g}, pref={p:g}, max={hi:g})")
        if not self.weight > 0 or not math.isfinite(self.weight):
            out.append(f"weight must be a positive finite number (got {self.weight:g})")
        if self.priority < 0:
            out.append(f"priority must be >= 0 (got {self.priority:g})")
        return out

    def main(self, horizontal: bool) -> tuple[float, float, float]:
        """(min, pref, max) along the x axis if ``horizontal`` else along y."""
        if horizontal:
            return self.min_w, self.pref_w, self.max_w
        return self.min_h, self.pref_h, self.max_h


DEFAULT_SIZE = SizeSpec()


@dataclass(frozen=True)
class Hole:
    """Fixed rectangular area inside a flow region (flow-local coordinates)."""

    x: float
    y: float
    w: float
    h: float


@dataclass(frozen=True)
class AltPosition:
    target: str
    penalty: float = 0.0


@dataclass(frozen=True)
class LayoutNode:
    kind: str
    name: Optional[str] = None
    children: tuple["LayoutNode", ...] = ()
    size: SizeSpec = DEFAULT_SIZE
    alt: Optional[AltPosition] = None
    node_id: Optional[str] = None
    balanced: bool = False
    group: Optional[str] = None
    hole: Optional[Hole] = None
    # parse location (line, col); ignored by equality
    loc: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)

    @property
    def is_widget(self) -> bool:
        return self.kind == WIDGET

    @property
    def is_flow(self) -> bool:
        return self.kind in FLOWS

    def widgets(self) -> Iterator["LayoutNode"]:
        if self.kind == WIDGET:
            yield self
        for c in self.children:
            yield from c.widgets()

    def walk(self, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], "LayoutNode"]]:
        yield path, self
        for i, c in enumerate(self.children):
            yield from c.walk(path + (i,))

    def at(self, path: tuple[int, ...]) -> "LayoutNode":
        node = self
        for i in path:
            node = node.children[i]
        return node

    def label(self) -> str:
        return self.name if self.kind == WIDGET else (self.node_id or self.kind)


def widget(name: str, **size) -> LayoutNode:
    return LayoutNode(WIDGET, name=name, size=SizeSpec(**size))


def container(kind: str, *children: LayoutNode, **attrs) -> LayoutNode:
    return LayoutNode(KIND_ALIASES.get(kind, kind), children=tuple(children), **attrs)


# ---------------------------------------------------------------- diagnostics

@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    location: str

    def __str__(self) -> str:
        return f"{self.location}: {self.severity}: {self.message}"


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


def _where(path: tuple[int, ...], node: LayoutNode) -> str:
    if node.loc is not None:
        return f"{node.loc[0]}:{node.loc[1]}"
    return "root" + "".join(f"/{i}" for i in path)


def validate(node: LayoutNode) -> list[Diagnostic]:
    """Return one diagnostic per invariant violation; empty when the tree is valid."""
    diags: list[Diagnostic] = []
    seen: dict[str, str] = {}
    ids: dict[str, LayoutNode] = {}
    for path, n in node.walk():
        where = _where(path, n)
        if n.kind not in (WIDGET,) + CONTAINERS:
            diags.append(Diagnostic("error", f"unknown layout type {n.kind!r}", where))
            continue
        for msg in n.size.violations():
            diags.append(Diagnostic("error", msg, where))
        if n.kind == WIDGET:
            if n.children:
                diags.append(Diagnostic("error", "a widget cannot have children", where))
            if not n.name:
                diags.append(Diagnostic("error", "widget without a name", where))
            elif n.name in seen:
                diags.append(Diagnostic("error", f"duplicate widget name {n.name!r} "
                                        f"(first at {seen[n.name]})", where))
            else:
                seen[n.name] = where
        elif n.kind == PIVOT:
            if len(n.children) != 1:
                diags.append(Diagnostic("error", f"Pivot takes exactly 1 child, got {len(n.children)}",
                                        where))
            elif n.children[0].kind not in LINEAR:
                diags.append(Diagnostic("error", "Pivot child must be a Row or Column", where))
        elif not n.children:
            diags.append(Diagnostic("error", f"{n.kind} needs at least one child", where))
        if (n.balanced or n.group or n.hole) and n.kind not in FLOWS:
            diags.append(Diagnostic("error", "balanced/group/hole apply to flows only", where))
        if n.hole is not None and (n.balanced or n.group):
            diags.append(Diagnostic("error", "a flow with a hole cannot be balanced or grouped",
                                    where))
        if n.hole is not None and min(n.hole.x, n.hole.y, n.hole.w, n.hole.h) < 0:
            diags.append(Diagnostic("error", "hole geometry must be non-negative", where))
        if n.node_id is not None:
            if n.node_id in ids:
                diags.append(Diagnostic("error", f"duplicate id {n.node_id!r}", where))
            ids[n.node_id] = n
        if n.is_flow:
            for c in n.children:
                if c.kind != WIDGET:
                    diags.append(Diagnostic("error", "flow children must be widgets", where))
                    break
                if c.alt is not None:
                    diags.append(Diagnostic("error", "widgets inside flows cannot have "
                                            "alternative positions", where))
                    break
    groups: dict[str, int] = {}
    for path, n in node.walk():
        if n.group:
            groups[n.group] = groups.get(n.group, 0) + 1
        if n.alt is not None:
            where = _where(path, n)
            tgt = ids.get(n.alt.target)
            if tgt is None:
                diags.append(Diagnostic("error", f"alt target {n.alt.target!r} not found", where))
            elif tgt.kind not in LINEAR:
                diags.append(Diagnostic("error", "alt target must be a Row or Column", where))
            elif any(x is n for x in tgt.children) or _contains(n, tgt):
                diags.append(Diagnostic("error", "alt target must be outside the node's "
                                        "current parent", where))
            if not path:
                diags.append(Diagnostic("error", "the root cannot have an alternative position",
                                        where))
            if any(m.kind in FLOWS + (PIVOT,) for _, m in n.walk()):
                diags.append(Diagnostic("error", "nodes with alternative positions cannot "
                                        "contain flows or Pivots", where))
            if n.alt.penalty < 0:
                diags.append(Diagnostic("error", "altpenalty must be >= 0", where))
    for g, count in groups.items():
        if count != 2:
            diags.append(Diagnostic("error", f"connected-flow group {g!r} must contain exactly "
                                    f"2 flows, found {count}", "root"))
    return diags


def _contains(outer: LayoutNode, inner: LayoutNode) -> bool:
    return any(m is inner for _, m in outer.walk())


# ---------------------------------------------------------------- pivot

_TRANSPOSE = {ROW: COLUMN, COLUMN: ROW, HFLOW: VFLOW, VFLOW: HFLOW}


def transpose(node: LayoutNode) -> LayoutNode:
    """Swap Row<->Column on ``node`` and HF<->VF on its direct flow children."""
    if node.kind not in LINEAR:
        raise ValueError(f"cannot transpose a {node.kind}")
    kids = tuple(replace(c, kind=_TRANSPOSE[c.kind]) if c.kind in FLOWS else c
                 for c in node.children)
    return replace(node, kind=_TRANSPOSE[node.kind], children=kids)


def expand_pivot(node: LayoutNode) -> list[LayoutNode]:
    """The two alternatives of a Pivot: its child as declared, then transposed."""
    if node.kind != PIVOT:
        raise ValueError(f"expected a Pivot, got {node.kind}")
    if len(node.children) != 1 or node.children[0].kind not in LINEAR:
        raise ValueError("Pivot must wrap exactly one Row or Column")
    child = node.children[0]
    return [child, transpose(child)]


# ---------------------------------------------------------------- lexer / parser

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<size>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?x(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_\-]*)
  | (?P<punct>[()\[\],=@:])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return t

    def parse(self) -> LayoutNode:
        node = self.layout()
        t = self.peek()
        if t.kind != "eof":
            raise ParseError(f"unexpected {t.text!r} after layout", t.line, t.col)
        return node

    def layout(self) -> LayoutNode:
        t = self.next()
        if t.kind != "ident":
            raise ParseError(f"expected a layout or widget name, found {t.text or 'end of input'!r}",
                             t.line, t.col)
        attrs: dict = {}
        if self.peek().text == "[":
            attrs = self.attrs()
        if self.peek().text == "(":
            if t.text not in KIND_ALIASES:
                raise ParseError(f"unknown layout type {t.text!r}", t.line, t.col)
            self.next()
            kids = [self.layout()]
            while self.peek().text == ",":
                self.next()
                kids.append(self.layout())
            self.expect(")")
            if self.peek().text == "[":
                if attrs:
                    p = self.peek()
                    raise ParseError("attributes given twice", p.line, p.col)
                attrs = self.attrs()
            return self._build(KIND_ALIASES[t.text], None, tuple(kids), attrs, t)
        if t.text in KIND_ALIASES:
            raise ParseError(f"{t.text} needs a parenthesised list of children", t.line, t.col)
        return self._build(WIDGET, t.text, (), attrs, t)

    def _build(self, kind, name, kids, attrs, tok) -> LayoutNode:
        size_keys = {k: attrs.pop(k) for k in list(attrs) if k.startswith("_s_")}
        size = DEFAULT_SIZE
        if size_keys:
            size = replace(DEFAULT_SIZE, **{k[3:]: v for k, v in size_keys.items()})
            bad = size.violations()
            if bad:
                raise ParseError(f"attribute out of range: {bad[0]}", tok.line, tok.col)
        alt = None
        if "alt" in attrs:
            alt = AltPosition(attrs.pop("alt"), attrs.pop("altpenalty", 0.0))
        elif "altpenalty" in attrs:
            raise ParseError("altpenalty without alt", tok.line, tok.col)
        if kind == WIDGET:
            for k in ("node_id", "balanced", "group", "hole"):
                if k in attrs:
                    raise ParseError(f"attribute {k.replace('node_', '')!r} is not valid on a widget",
                                     tok.line, tok.col)
        return LayoutNode(kind, name=name, children=kids, size=size, alt=alt,
                          loc=(tok.line, tok.col), **attrs)

    def num(self) -> float:
        t = self.next()
        if t.kind != "num":
            raise ParseError(f"expected a number, found {t.text!r}", t.line, t.col)
        return float(t.text)

    def size_pair(self) -> tuple[float, float]:
        t = self.next()
        if t.kind != "size":
            raise ParseError(f"expected WxH, found {t.text!r}", t.line, t.col)
        w, h = t.text.split("x")
        return float(w), float(h)

    def attrs(self) -> dict:
        self.expect("[")
        out: dict = {}
        while True:
            key = self.next()
            if key.kind != "ident":
                raise ParseError(f"expected an attribute name, found {key.text!r}", key.line, key.col)
            self.expect("=")
            k = key.text
            if k in ("min", "pref", "max"):
                w, h = self.size_pair()
                out[f"_s_{k}_w"], out[f"_s_{k}_h"] = w, h
            elif k == "weight":
                out["_s_weight"] = self.num()
            elif k == "priority":
                out["_s_priority"] = self.num()
            elif k in ("optional", "balanced"):
                v = self.next()
                if v.text not in ("true", "false"):
                    raise ParseError(f"{k} must be true or false", v.line, v.col)
                out["_s_optional" if k == "optional" else "balanced"] = v.text == "true"
            elif k in ("id", "group", "alt"):
                v = self.next()
                if v.kind != "ident":
                    raise ParseError(f"{k} must be an identifier", v.line, v.col)
                out[{"id": "node_id"}.get(k, k)] = v.text
            elif k == "altpenalty":
                out["altpenalty"] = self.num()
            elif k == "hole":
                w, h = self.size_pair()
                self.expect("@")
                x = self.num()
                self.expect(":")
                y = self.num()
                out["hole"] = Hole(x, y, w, h)
            else:
                raise ParseError(f"unknown attribute {k!r}", key.line, key.col)
            if k in ("min", "pref", "max") and (out[f"_s_{k}_w"] < 0 or out[f"_s_{k}_h"] < 0):
                raise ParseError(f"attribute out of range: {k} must be non-negative",
                                 key.line, key.col)
            sep = self.next()
            if sep.text == "]":
                return out
            if sep.text != ",":
                raise ParseError(f"expected ',' or ']', found {sep.text!r}", sep.line, sep.col)


def parse(text: str) -> LayoutNode:
    """Parse ORC layout text into a tree. Raises :class:`ParseError` with a location."""
    return _Parser(text).parse()


# ---------------------------------------------------------------- serializer

_SHORT = {v: k for k, v in KIND_ALIASES.items() if k not in ("HF", "VF")}


def _fmt(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _attr_text(node: LayoutNode) -> str:
    s, d = node.size, DEFAULT_SIZE
    parts = []
    for key in ("min", "pref", "max"):
        w, h = getattr(s, f"{key}_w"), getattr(s, f"{key}_h")
        if (w, h) != (getattr(d, f"{key}_w"), getattr(d, f"{key}_h")):
            parts.append(f"{key}={_fmt(w)}x{_fmt(h)}")
    if s.weight != d.weight:
        parts.append(f"weight={_fmt(s.weight)}")
    if s.optional:
        parts.append("optional=true")
    if s.priority != d.priority:
        parts.append(f"priority={_fmt(s.priority)}")
    if node.node_id:
        parts.append(f"id={node.node_id}")
    if node.balanced:
        parts.append("balanced=true")
    if node.group:
        parts.append(f"group={node.group}")
    if node.hole:
        hl = node.hole
        parts.append(f"hole={_fmt(hl.w)}x{_fmt(hl.h)}@{_fmt(hl.x)}:{_fmt(hl.y)}")
    if node.alt:
        parts.append(f"alt={node.alt.target}")
        if node.alt.penalty:
            parts.append(f"altpenalty={_fmt(node.alt.penalty)}")
    return f"[{', '.join(parts)}]" if parts else ""


def serialize(node: LayoutNode) -> str:
    """Canonical text form; default attributes are omitted."""
    if node.kind == WIDGET:
        return f"{node.name}{_attr_text(node)}"
    inner = ", ".join(serialize(c) for c in node.children)
    return f"{_SHORT[node.kind]}({inner}){_attr_text(node)}"
