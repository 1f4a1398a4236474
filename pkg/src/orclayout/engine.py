"""Branch-and-bound search over the discrete choices of a layout.

Choices are Pivot alternatives, flow row counts (or the junction row count of
a connected flow group), and at the leaves the alternative positions of
movable nodes. Flow sub-layouts are resolved by the heuristics in
``flow`` and frozen into hard constraints; every leaf is finished by one
quadratic program per combination of alternative positions.

The search walks sub-layouts in firm-edge order. A flow's row count starts
at its preferred value and moves down, then up, for as long as each step
lowers the best loss found so far. A node whose accumulated loss already
reaches that best loss is pruned.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

from . import _kernels as K
from .flow import (FlowAssignment, FlowInfeasible, FlowInstance, balanced_factors, balanced_flow,
                   connected_flow, flow_around_fixed, greedy_flow, optional_prune, refine_breaks,
                   row_range)
from .notation import (COLUMN, FLOWS, HFLOW, LINEAR, PIVOT, ROW, VFLOW, WIDGET, LayoutNode, SizeSpec,
                       expand_pivot, validate)
from .qp import (OMEGA, W_MINMAX, ConstraintSystem, QPIterationLimit, QuadraticProgram, add_size_constraints,
                 lower_soft, solve_qp)

log = logging.getLogger(__name__)

EDGES = ("left", "top", "right", "bottom")
ALL_FIRM = frozenset(EDGES)


class InfeasibleLayout(RuntimeError):
    """No leaf of the search admits a layout, even with soft min/max sizes."""

    def __init__(self, message: str, sublayout: Optional[str] = None):
        super().__init__(message)
        self.sublayout = sublayout


@dataclass(frozen=True)
class Viewport:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"viewport must be positive, got {self.width}x{self.height}")


@dataclass
class SolveConfig:
    omega: float = OMEGA
    minmax_weight: float = W_MINMAX
    max_residual_or: int = 8
    pruning: bool = True
    literal_alg1: bool = False
    ragged_last: bool = False
    uniform_fill: bool = False
    refine_breaks: bool = True  # local break shifts after the greedy pass
    pivot_penalty: float = 0.0
    soft_minmax_retry: bool = True
    keep_qp: bool = False
    seed: Optional[int] = None  # only consumed by benchmarks

    def flow_kw(self) -> dict:
        return dict(literal=self.literal_alg1, ragged_last=self.ragged_last, minmax_weight=self.minmax_weight,
                    uniform_fill=self.uniform_fill)


@dataclass
class TraceEntry:
    node_id: int
    parent_id: int
    label: str
    choice: object
    partial_loss: float
    pruned: bool = False
    infeasible: bool = False
    loss: float = math.inf  # best leaf loss found below this node
    improved: bool = False  # whether the global best dropped while exploring it


@dataclass
class SolveStats:
    nodes: int = 0
    leaves: int = 0
    pruned: int = 0
    qp_calls: int = 0
    wall_time: float = 0.0
    soft_minmax: bool = False


Rect = tuple[float, float, float, float]


@dataclass
class SolvedLayout:
    viewport: Viewport
    rects: dict[str, Rect]
    omitted: frozenset[str]
    choices: dict[str, object]
    loss: float
    stats: SolveStats
    trace: list[TraceEntry] = field(default_factory=list)
    boxes: dict[str, Rect] = field(default_factory=dict)
    structure: list[tuple[str, str, tuple[str, ...]]] = field(default_factory=list)  # (parent, kind, children)
    specs: dict[str, SizeSpec] = field(default_factory=dict)
    qp: Optional[QuadraticProgram] = None
    qp_x: Optional[np.ndarray] = None
    flow_rows: list[tuple[tuple[str, ...], float, bool, bool]] = field(default_factory=list)  # names, width, horizontal, exact


# ---------------------------------------------------------------- firm edges

def _main_is_x(kind: str) -> bool:
    return kind in (ROW, HFLOW)


def child_firm_edges(parent: Optional[LayoutNode], index: int = 0,
                     parent_firm: Iterable[str] = ALL_FIRM, processed: Iterable[int] = ()) -> frozenset[str]:
    """Edges of ``parent.children[index]`` that are already fixed."""
    parent_firm = frozenset(parent_firm)
    if parent is None or parent.kind == PIVOT:
        return parent_firm
    processed = set(processed)
    n = len(parent.children)
    lo, hi, side_a, side_b = (("left", "right", "top", "bottom") if _main_is_x(parent.kind)
                              else ("top", "bottom", "left", "right"))
    firm = {e for e in (side_a, side_b) if e in parent_firm}
    if (index == 0 and lo in parent_firm) or (index > 0 and index - 1 in processed):
        firm.add(lo)
    if (index == n - 1 and hi in parent_firm) or (index < n - 1 and index + 1 in processed):
        firm.add(hi)
    return frozenset(firm)


def firm_edge_count(parent: Optional[LayoutNode], index: int = 0,
                    parent_firm: Iterable[str] = ALL_FIRM, processed: Iterable[int] = ()) -> int:
    return len(child_firm_edges(parent, index, parent_firm, processed))


def order_sublayouts(node: LayoutNode, parent_firm: Iterable[str] = ALL_FIRM) -> list[int]:
    """Child indices by descending firm-edge count, document order on ties."""
    counts = [firm_edge_count(node, i, parent_firm) for i in range(len(node.children))]
    return sorted(range(len(counts)), key=lambda i: (-counts[i], i))


# ---------------------------------------------------------------- size estimates

def _pref_extent(node: LayoutNode) -> tuple[float, float]:
    if node.kind == WIDGET:
        return node.size.pref_w, node.size.pref_h
    if node.kind == PIVOT:
        return _pref_extent(node.children[0])
    ext = [_pref_extent(c) for c in node.children] or [(0.0, 0.0)]
    if node.kind in (ROW, HFLOW):
        return sum(w for w, _ in ext), max(h for _, h in ext)
    return max(w for w, _ in ext), sum(h for _, h in ext)


def _min_extent(node: LayoutNode) -> tuple[float, float]:
    if node.kind == WIDGET:
        return node.size.min_w, node.size.min_h
    if node.kind == PIVOT:
        return _min_extent(node.children[0])
    ext = [_min_extent(c) for c in node.children if not c.size.optional] or [(0.0, 0.0)]
    if node.kind == ROW:
        return sum(w for w, _ in ext), max(h for _, h in ext)
    if node.kind == COLUMN:
        return max(w for w, _ in ext), sum(h for _, h in ext)
    return max(w for w, _ in ext), max(h for _, h in ext)


def _has_flow(node: LayoutNode) -> bool:
    return any(n.kind in FLOWS for _, n in node.walk())


def _flow_depth(node: LayoutNode, row_width: float) -> float:
    """Expected cross extent of a flow laid out at its preferred row count."""
    horizontal = node.kind == HFLOW
    specs = [c.size for c in node.children]
    if not specs:
        return 0.0
    main = np.array([s.main(horizontal)[1] for s in specs])
    cross = np.array([s.main(not horizontal)[1] for s in specs])
    rows = K.first_fit_rows(np.minimum(main, row_width), max(row_width, 1e-9))
    return float(rows * cross.mean())


def _child_boxes(node: LayoutNode, box: tuple[float, float]) -> list[tuple[float, float]]:
    """Split ``box`` among the children of a Row or Column."""
    along_x = node.kind == ROW
    main_total, cross = (box[0], box[1]) if along_x else (box[1], box[0])
    wants: list[Optional[float]] = []
    floors: list[float] = []
    for c in node.children:
        floors.append(_min_extent(c)[0 if along_x else 1])
        if c.kind in FLOWS:
            if _main_is_x(c.kind) == along_x:
                wants.append(None)
            else:
                wants.append(max(_flow_depth(c, cross), floors[-1]))
        elif _has_flow(c):
            wants.append(None)
        else:
            wants.append(_pref_extent(c)[0 if along_x else 1])
    fixed = sum(w for w in wants if w is not None)
    elastic = [i for i, w in enumerate(wants) if w is None]
    if elastic:
        share = (main_total - fixed) / len(elastic)
        mains = [max(share, floors[i]) if w is None else w for i, w in enumerate(wants)]
    elif fixed > 0:
        mains = [w * main_total / fixed for w in wants]
    else:
        mains = [main_total / max(len(wants), 1)] * len(wants)
    return [(m, cross) if along_x else (cross, m) for m in mains]


# ---------------------------------------------------------------- compiled tree

@dataclass
class _Node:
    key: tuple
    node: LayoutNode
    box: tuple[float, float]
    firm: frozenset[str]
    kids: list["_Node"] = field(default_factory=list)
    order: list[int] = field(default_factory=list)

    @property
    def label(self) -> str:
        if self.node.kind == WIDGET:
            return self.node.name
        path = ".".join(str(k) for k in self.key) or "root"
        return f"{self.node.node_id or self.node.kind}@{path}"

    @property
    def row_width(self) -> float:
        w = self.box[0] if self.node.kind == HFLOW else self.box[1]
        floor = max((c.size.main(self.node.kind == HFLOW)[0] for c in self.node.children), default=0.0)
        return max(w, floor, 1e-9)


def _compile(node: LayoutNode, box, key=(), firm=ALL_FIRM) -> _Node:
    n = _Node(key, node, box, firm)
    if node.kind == PIVOT:
        n.kids = [_compile(alt, box, key + (f"a{i}",), firm) for i, alt in enumerate(expand_pivot(node))]
    elif node.kind in LINEAR:
        boxes = _child_boxes(node, box)
        n.kids = [_compile(c, b, key + (i,), child_firm_edges(node, i, firm))
                  for i, (c, b) in enumerate(zip(node.children, boxes))]
        n.order = order_sublayouts(node, firm)
    elif node.kind in FLOWS:
        n.kids = [_Node(key + (i,), c, c.size.main(True)[1:2] + c.size.main(False)[1:2], frozenset())
                  for i, c in enumerate(node.children)]
    return n


# ---------------------------------------------------------------- search state

@dataclass(frozen=True)
class _Frozen:
    """A flow resolved by a heuristic: widget offsets relative to the flow box."""

    placements: tuple[tuple[str, float, float, float, float], ...]
    omitted: tuple[str, ...]
    extent: tuple[float, float]
    loss: float
    choice: object
    penalty: float = 0.0  # omission part of ``loss``
    rows: Optional[tuple[tuple[str, ...], ...]] = None  # None when rows have no common origin
    row_width: float = 0.0
    horizontal: bool = True
    spans: tuple[tuple[tuple[str, ...], float], ...] = ()  # every non-empty row with its target width


def _freeze(fa: FlowAssignment, names: list[str], choice, penalty: float = 0.0, stacked: bool = True) -> _Frozen:
    placed = tuple((names[g], float(fa.x[i]), float(fa.y[i]), float(fa.widths[i]), float(fa.heights[i]))
                   for i, g in enumerate(fa.indices) if i not in fa.omitted)
    omitted = tuple(names[fa.indices[i]] for i in sorted(fa.omitted))
    rows = None
    if stacked:
        rows = tuple(tuple(names[fa.indices[i]] for i in range(a, b + 1) if i not in fa.omitted)
                     for a, b in fa.rows)
    rw = fa.row_widths[0] if fa.row_widths else 0.0
    spans = []
    for (a, b), width in zip(fa.rows, fa.row_widths):
        members = tuple(names[fa.indices[i]] for i in range(a, b + 1) if i not in fa.omitted)
        if members:
            spans.append((members, float(width)))
    return _Frozen(placed, omitted, fa.extent, float(fa.loss), choice, penalty, rows, float(rw), fa.horizontal,
                   tuple(spans))


@dataclass
class _State:
    partial: float = 0.0
    pivots: dict = field(default_factory=dict)
    frozen: dict = field(default_factory=dict)

    def child(self, extra: float = 0.0, pivots=None, frozen=None) -> "_State":
        return _State(self.partial + extra, {**self.pivots, **(pivots or {})}, {**self.frozen, **(frozen or {})})


@dataclass
class _Built:
    system: ConstraintSystem
    widgets: list[str]
    structure: list[tuple[str, str, tuple[str, ...]]]


def _owner(n: _Node) -> str:
    return n.label


class _Search:
    """One pass of the search. Strategies subclass it to swap flow handling or leaves."""

    def __init__(self, root: LayoutNode, viewport: Viewport, cfg: SolveConfig, soft_minmax: bool = False):
        self.root = root
        self.viewport = viewport
        self.cfg = cfg
        self.soft = soft_minmax
        self.tree = _compile(root, (viewport.width, viewport.height))
        self.best = math.inf
        self.result: Optional[SolvedLayout] = None
        self.trace: list[TraceEntry] = []
        self.stats = SolveStats(soft_minmax=soft_minmax)
        self._ids = itertools.count(1)
        self.specs = {w.name: w.size for w in root.widgets()}
        self.groups = self._collect_groups()

    def _collect_groups(self) -> dict[str, list[_Node]]:
        groups: dict[str, list[_Node]] = {}

        def walk(n: _Node, in_pivot: bool):
            if n.node.kind in FLOWS and n.node.group:
                if in_pivot:
                    raise ValueError(f"grouped flow {n.label} may not sit inside a Pivot")
                groups.setdefault(n.node.group, []).append(n)
            for k in n.kids:
                walk(k, in_pivot or n.node.kind == PIVOT)

        walk(self.tree, False)
        for name, members in groups.items():
            if len(members) != 2 or members[0].node.kind != members[1].node.kind:
                raise ValueError(f"group {name!r} needs two flows of the same direction")
        return groups

    def run(self) -> None:
        self._search((self.tree,), _State(), 0)

    # -- tree walk

    def _search(self, agenda: tuple, state: _State, parent_id: int) -> float:
        while agenda:
            head, agenda = agenda[0], agenda[1:]
            kind = head.node.kind
            if kind in LINEAR:
                agenda = tuple(head.kids[i] for i in head.order) + agenda
            elif kind == PIVOT:
                return self._pivot(head, agenda, state, parent_id)
            elif kind in FLOWS and head.key not in state.frozen:
                return self._flow(head, agenda, state, parent_id)
        return self._leaf(state)

    def _branch(self, label: str, choice, state: _State, agenda: tuple, parent_id: int) -> TraceEntry:
        e = TraceEntry(next(self._ids), parent_id, label, choice, state.partial)
        self.trace.append(e)
        self.stats.nodes += 1
        if self.cfg.pruning and state.partial >= self.best:
            e.pruned = True
            self.stats.pruned += 1
            return e
        before = self.best
        e.loss = self._search(agenda, state, e.node_id)
        e.improved = self.best < before
        return e

    def _dead_end(self, label: str, choice, state: _State, parent_id: int, why: Exception) -> None:
        log.debug("infeasible %s=%s: %s", label, choice, why)
        self.trace.append(TraceEntry(next(self._ids), parent_id, label, choice, state.partial, infeasible=True))
        self.stats.nodes += 1

    def _pivot(self, head: _Node, agenda: tuple, state: _State, parent_id: int) -> float:
        best = math.inf
        for i, alt in enumerate(head.kids):
            st = state.child(self.cfg.pivot_penalty if i else 0.0, pivots={head.key: i})
            best = min(best, self._branch(head.label, i, st, (alt,) + agenda, parent_id).loss)
        return best

    def _flow(self, head: _Node, agenda: tuple, state: _State, parent_id: int) -> float:
        try:
            values, start, make = self._flow_options(head)
        except FlowInfeasible as exc:
            self._dead_end(head.label, None, state, parent_id, exc)
            return math.inf
        return self._gradient(head.label, values, start, make, agenda, state, parent_id)

    def _gradient(self, label, values, start, make, agenda, state, parent_id) -> float:
        """Preferred value first, then walk down and up while the best loss keeps dropping."""
        def run(i):
            try:
                frozen = make(values[i])
            except FlowInfeasible as exc:
                self._dead_end(label, values[i], state, parent_id, exc)
                return None
            st = state.child(sum(f.loss for f in frozen.values()), frozen=frozen)
            return self._branch(label, values[i], st, agenda, parent_id)

        if not values:
            return math.inf
        first = run(start)
        best = first.loss if first else math.inf
        for seq in (range(start - 1, -1, -1), range(start + 1, len(values))):
            for i in seq:
                e = run(i)
                if e is None:
                    continue
                best = min(best, e.loss)
                if not (e.improved or self.best == math.inf):
                    break
        return best

    # -- flow options: (ordered values, index of the preferred one, value -> {flow key: _Frozen})

    def _flow_options(self, head: _Node):
        node = head.node
        names = [c.name for c in node.children]
        specs = [c.size for c in node.children]
        horizontal = node.kind == HFLOW
        rw = head.row_width
        kw = self.cfg.flow_kw()
        if node.group:
            return self._connected_options(node.group)
        if node.hole is not None and node.hole.w > 0 and node.hole.h > 0:
            cross = head.box[1] if horizontal else head.box[0]

            def around(_):
                fa = flow_around_fixed(specs, rw, node.hole, region_h=cross, horizontal=horizontal, **kw)
                return {head.key: _freeze(fa, names, fa.num_rows, stacked=False)}
            return ["around"], 0, around
        if not specs:
            return [0], 0, lambda _: {head.key: _Frozen((), (), (0.0, 0.0), 0.0, 0)}
        # with soft bounds a min size no longer limits how few rows a flow may use
        lo, pref, hi = row_range([replace(s, min_w=0.0, min_h=0.0) for s in specs] if self.soft else specs,
                                 rw, horizontal)
        if self.soft:
            lo = 1
        if node.balanced:
            n = len(specs)
            values = sorted(n // d for d in balanced_factors(n))
            start = min(range(len(values)), key=lambda i: (abs(values[i] - pref), values[i]))
            return values, start, lambda v: {head.key: _freeze(
                balanced_flow(specs, rw, v, horizontal, soft_min=self.soft, **kw), names, v)}
        optional = any(s.optional for s in specs)
        if optional and not self.soft:
            required = [s for s in specs if not s.optional]
            lo = row_range(required, rw, horizontal)[0] if required else 1
        values = list(range(max(lo, 1), hi + 1))

        def make(v):
            inst = FlowInstance(tuple(specs), rw, v, horizontal)
            if optional:
                fa = optional_prune(inst, omega=self.cfg.omega, **kw)
                penalty = self.cfg.omega * sum(specs[i].priority for i in fa.omitted)
                return {head.key: _freeze(fa, names, v, penalty)}
            fa = greedy_flow(inst, check_range=False, **kw)
            if self.cfg.refine_breaks:
                depth = head.box[1] if horizontal else head.box[0]
                fa = refine_breaks(inst, fa, max_depth=depth, **kw)
            return {head.key: _freeze(fa, names, v)}
        return values, values.index(pref) if pref in values else 0, make

    def _connected_options(self, group: str):
        first, second = self.groups[group]
        horizontal = first.node.kind == HFLOW
        s1 = [c.size for c in first.node.children]
        s2 = [c.size for c in second.node.children]
        names = [c.name for c in first.node.children] + [c.name for c in second.node.children]
        rw1, rw2 = first.row_width, second.row_width
        mains = np.array([s.main(horizontal)[1] for s in s1 + s2])
        cap = int(K.first_fit_rows(np.minimum(mains, rw1), rw1)) if len(mains) else 0
        pref = min(row_range(s1, rw1, horizontal)[1], cap)
        kw = self.cfg.flow_kw()

        def make(r):
            fa1, fa2 = connected_flow(s1, s2, r, rw1, rw2, horizontal, **kw)
            return {first.key: _freeze(fa1, names, r), second.key: _freeze(fa2, names, fa2.num_rows)}
        return list(range(cap + 1)), pref, make

    # -- leaves

    def _resolved(self, n: _Node, state: _State) -> Iterable[tuple[_Node, Optional[_Node]]]:
        """(node, parent) pairs of the tree with Pivot choices applied."""
        stack = [(n, None)]
        while stack:
            m, parent = stack.pop()
            yield m, parent
            if m.node.kind == PIVOT:
                stack.append((m.kids[state.pivots[m.key]], parent))
            elif m.node.kind in LINEAR:
                stack.extend((k, m) for k in reversed(m.kids))

    def _residual_alts(self, state: _State) -> list[tuple[_Node, _Node]]:
        nodes = list(self._resolved(self.tree, state))
        targets = {m.node.node_id: m for m, _ in nodes if m.node.node_id and m.node.kind in LINEAR}
        out = []
        for m, parent in nodes:
            alt = m.node.alt
            if alt and parent is not None and alt.target in targets:
                t = targets[alt.target]
                if t is not parent and not any(k is t for k, _ in self._resolved(m, state)):
                    out.append((m, t))
        return out

    def _leaf(self, state: _State) -> float:
        best, pack = self._finish(state)
        if best < self.best:
            self.best = best
            self.result = self._record(state, pack, best)
        return best

    def _solve(self, built: _Built):
        qp = lower_soft(built.system)
        self.stats.qp_calls += 1
        try:
            return qp, solve_qp(qp)
        except QPIterationLimit as exc:
            log.warning("leaf QP gave up: %s", exc)
            return qp, None

    def _finish(self, state: _State):
        """Best (loss, pack) over the alternative-position combinations of a leaf."""
        self.stats.leaves += 1
        alts = self._residual_alts(state)
        if len(alts) > self.cfg.max_residual_or:
            raise ValueError(f"{len(alts)} alternative positions exceed the limit of {self.cfg.max_residual_or}")
        best, pack = math.inf, None
        for combo in itertools.product((False, True), repeat=len(alts)):
            moves = {m.key: t for (m, t), on in zip(alts, combo) if on}
            penalty = sum(m.node.alt.penalty for (m, _), on in zip(alts, combo) if on)
            qp, sol = self._solve(self._build(state, moves))
            if sol is None or sol.status != "optimal":
                continue
            loss = state.partial + sol.objective + penalty
            if loss < best:
                best, pack = loss, (self._last_built, sol, qp, moves, penalty)
        return best, pack

    def _build(self, state: _State, moves: dict, relaxed: bool = False) -> _Built:
        sys = ConstraintSystem()
        built = _Built(sys, [], [])
        self._relaxed = relaxed
        self._last_built = built
        moved_in: dict[int, list[_Node]] = {}
        for m, t in self._residual_alts(state):
            if m.key in moves:
                moved_in.setdefault(id(t), []).append(m)
        self._moves = (set(moves), moved_in)
        owner = _owner(self.tree)
        b = sys.box(owner)
        for var, val in ((b.left, 0.0), (b.top, 0.0), (b.right, self.viewport.width), (b.bottom, self.viewport.height)):
            sys.add([(1.0, var)], "=", val)
        if self._nonempty(self.tree, state):
            self._emit(self.tree, owner, state, built)
        return built

    def _effective_kids(self, n: _Node, state: _State) -> list[_Node]:
        moved, moved_in = self._moves
        kids = moved_in.get(id(n), []) + [k for k in n.kids if k.key not in moved]
        return [k for k in kids if self._nonempty(k, state)]

    def _nonempty(self, n: _Node, state: _State) -> bool:
        kind = n.node.kind
        if kind == PIVOT:
            return self._nonempty(n.kids[state.pivots[n.key]], state)
        if kind in LINEAR:
            return bool(self._effective_kids(n, state))
        return True

    def _emit(self, n: _Node, owner: str, state: _State, built: _Built) -> None:
        sys = built.system
        b = sys.box(owner)
        kind = n.node.kind
        if kind == PIVOT:
            return self._emit(n.kids[state.pivots[n.key]], owner, state, built)
        sys.add(b.width(), ">=", 0.0)
        sys.add(b.height(), ">=", 0.0)
        if kind == WIDGET:
            add_size_constraints(sys, owner, n.node.size, soft_minmax=self.soft,
                                 minmax_weight=self.cfg.minmax_weight)
            built.widgets.append(owner)
            return
        if kind in FLOWS:
            fr = state.frozen[n.key]
            if self._relaxed and fr.rows is not None:
                self._emit_rows(n, b, owner, fr, built)
            else:
                self._emit_flow(n, b, owner, state, built)
            return
        kids = self._effective_kids(n, state)
        along_x = kind == ROW
        lo, hi, s1, s2 = ("left", "right", "top", "bottom") if along_x else ("top", "bottom", "left", "right")
        boxes = []
        for k in kids:
            kb = sys.box(_owner(k))
            boxes.append(kb)
            for side in (s1, s2):
                sys.add([(1.0, getattr(kb, side)), (-1.0, getattr(b, side))], "=", 0.0)
        sys.add([(1.0, getattr(boxes[0], lo)), (-1.0, getattr(b, lo))], "=", 0.0)
        for a, c in zip(boxes, boxes[1:]):
            sys.add([(1.0, getattr(c, lo)), (-1.0, getattr(a, hi))], "=", 0.0)
        sys.add([(1.0, getattr(b, hi)), (-1.0, getattr(boxes[-1], hi))], "=", 0.0)
        built.structure.append((owner, kind, tuple(_owner(k) for k in kids)))
        for k in kids:
            self._emit(k, _owner(k), state, built)

    def _emit_flow(self, n: _Node, b, owner: str, state: _State, built: _Built) -> None:
        sys = built.system
        fr: _Frozen = state.frozen[n.key]
        for name, x, y, w, h in fr.placements:
            c = sys.box(name)
            sys.add([(1.0, c.left), (-1.0, b.left)], "=", x)
            sys.add([(1.0, c.top), (-1.0, b.top)], "=", y)
            sys.add(c.width(), "=", w)
            sys.add(c.height(), "=", h)
            built.widgets.append(name)
        sys.add(b.width(), ">=", fr.extent[0])
        sys.add(b.height(), ">=", fr.extent[1])
        built.structure.append((owner, n.node.kind, tuple(p[0] for p in fr.placements)))

    def _emit_rows(self, n: _Node, b, owner: str, fr: _Frozen, built: _Built) -> None:
        """Flow with fixed row membership but widget sizes left to the QP (soft min/max)."""
        sys = built.system
        lo, hi, s_lo, s_hi = ("left", "right", "top", "bottom") if fr.horizontal else ("top", "bottom", "left", "right")

        def eq(a, c, rhs=0.0):
            sys.add([(1.0, a), (-1.0, c)], "=", rhs)

        prev = getattr(b, s_lo)
        for row in fr.rows:
            boxes = [sys.box(name) for name in row]
            eq(getattr(boxes[0], lo), getattr(b, lo))
            for a, c in zip(boxes, boxes[1:]):
                eq(getattr(c, lo), getattr(a, hi))
            eq(getattr(boxes[-1], hi), getattr(b, lo), fr.row_width)
            eq(getattr(boxes[0], s_lo), prev)
            for c in boxes[1:]:
                eq(getattr(c, s_lo), getattr(boxes[0], s_lo))
                eq(getattr(c, s_hi), getattr(boxes[0], s_hi))
            for name in row:
                add_size_constraints(sys, name, self.specs[name], soft_minmax=True,
                                     minmax_weight=self.cfg.minmax_weight)
                built.widgets.append(name)
            prev = getattr(boxes[0], s_hi)
        sys.add([(1.0, getattr(b, hi)), (-1.0, getattr(b, lo))], ">=", fr.row_width)
        sys.add([(1.0, getattr(b, s_hi)), (-1.0, prev)], ">=", 0.0)
        built.structure.append((owner, HFLOW if fr.horizontal else VFLOW, tuple(p[0] for p in fr.placements)))

    def _record(self, state: _State, pack, loss: float) -> SolvedLayout:
        built, sol, qp, moves, _ = pack
        x = sol.assignment

        def rect(owner):
            b = built.system.boxes[owner]
            return (float(x[b.left]), float(x[b.top]), float(x[b.right] - x[b.left]), float(x[b.bottom] - x[b.top]))

        omitted = frozenset(name for f in state.frozen.values() for name in f.omitted)
        choices: dict[str, object] = {}
        for m, _ in self._resolved(self.tree, state):
            if m.node.kind == PIVOT:
                choices[m.label] = state.pivots[m.key]
            elif m.key in state.frozen:
                choices[m.label] = state.frozen[m.key].choice
            if m.node.alt:
                choices[m.label] = m.node.alt.target if m.key in moves else None
        flow_rows = []
        for f in state.frozen.values():
            for j, (members, width) in enumerate(f.spans):
                exact = not (self.cfg.ragged_last and j == len(f.spans) - 1)
                flow_rows.append((members, width, f.horizontal, exact))
        return SolvedLayout(
            flow_rows=flow_rows,
            viewport=self.viewport, rects={w: rect(w) for w in built.widgets}, omitted=omitted,
            choices=choices, loss=loss, stats=self.stats,
            boxes={o: rect(o) for o in built.system.boxes}, structure=built.structure,
            specs=self.specs, qp=qp if self.cfg.keep_qp else None,
            qp_x=x if self.cfg.keep_qp else None)


# ---------------------------------------------------------------- entry points

def _tightest(tree: _Node) -> tuple[str, str]:
    worst, where, text = -1.0, tree.label, ""
    stack = [tree]
    while stack:
        n = stack.pop()
        mw, mh = _min_extent(n.node)
        ratio = max(mw / max(n.box[0], 1e-9), mh / max(n.box[1], 1e-9))
        if ratio > worst:
            worst, where = ratio, n.label
            text = f"needs at least {mw:g}x{mh:g} but gets about {n.box[0]:g}x{n.box[1]:g}"
        stack.extend(reversed(n.kids[:1] if n.node.kind == PIVOT else n.kids))
    return where, text


def run_search(search_cls, root: LayoutNode, viewport: Viewport, cfg: SolveConfig) -> SolvedLayout:
    """Run ``search_cls`` with hard min/max, then once more with soft min/max if nothing fit."""
    errors = validate(root)
    if errors:
        raise ValueError("invalid layout: " + "; ".join(d.message for d in errors))
    for p in (cfg.pivot_penalty, *(w.alt.penalty for _, w in root.walk() if w.alt)):
        if p < 0:
            raise ValueError("choice penalties must be non-negative")
    t0 = time.perf_counter()
    search = search_cls(root, viewport, cfg, soft_minmax=False)
    search.run()
    trace, nodes = list(search.trace), search.stats.nodes
    if search.result is None and cfg.soft_minmax_retry:
        log.info("no layout with hard min/max sizes; retrying with soft bounds")
        search = search_cls(root, viewport, cfg, soft_minmax=True)
        search._ids = itertools.count(len(trace) + 1)
        search.run()
        search.stats.nodes += nodes
        trace += search.trace
    if search.result is None:
        where, text = _tightest(search.tree)
        raise InfeasibleLayout(f"no feasible layout; tightest sub-layout {where} {text}", where)
    out = search.result
    out.stats = search.stats
    out.stats.wall_time = time.perf_counter() - t0
    out.trace = trace
    return out


def solve(root: LayoutNode, viewport: Viewport, config: Optional[SolveConfig] = None) -> SolvedLayout:
    """Best layout found by the pruned discrete search."""
    return run_search(_Search, root, viewport, config or SolveConfig())


def check_geometry(layout: SolvedLayout, tol: float = 1e-6) -> list[str]:
    """Problems with containment, overlap and row spans; empty when the geometry is sound.

    Rows marked exact must fill their target width to within 1e-9 of it (relative).
    """
    problems = []
    vw, vh = layout.viewport.width, layout.viewport.height
    rects = {**layout.boxes, **layout.rects}

    def inside(inner, outer):
        return (inner[0] >= outer[0] - tol and inner[1] >= outer[1] - tol
                and inner[0] + inner[2] <= outer[0] + outer[2] + tol
                and inner[1] + inner[3] <= outer[1] + outer[3] + tol)

    def overlap(a, b):
        return (min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0]) > tol
                and min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1]) > tol)

    for name, r in rects.items():
        if r[2] < -tol or r[3] < -tol:
            problems.append(f"{name} has negative size")
        if not inside(r, (0.0, 0.0, vw, vh)):
            problems.append(f"{name} leaves the viewport")
    for parent, _, kids in layout.structure:
        for k in kids:
            if not inside(rects[k], rects[parent]):
                problems.append(f"{k} leaves its parent {parent}")
        for a, b in itertools.combinations(kids, 2):
            if overlap(rects[a], rects[b]):
                problems.append(f"{a} overlaps {b}")
    for members, width, horizontal, exact in layout.flow_rows:
        if not exact:
            continue
        total = sum(rects[m][2] if horizontal else rects[m][3] for m in members)
        if abs(total - width) > 1e-9 * max(width, 1.0):
            problems.append(f"row {members[0]}..{members[-1]} spans {total!r}, expected {width!r}")
    return problems
