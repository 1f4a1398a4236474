"""Flow heuristics: turn a flow's widget sequence into rows with concrete sizes.

All functions work in flow coordinates: *main* is the axis rows run along
(width for horizontal flows, height for vertical ones) and *cross* is the
other axis. Assignments are reported back in physical width/height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .notation import Hole, SizeSpec
from .qp import OMEGA, W_MINMAX


class FlowInfeasible(ValueError):
    """No assignment exists, e.g. a widget cannot shrink to the row width."""


class EmptyRow(FlowInfeasible):
    """The greedy pass left a row without widgets."""

    def __init__(self, row: int, num_rows: int):
        super().__init__(f"row {row} of {num_rows} came out empty")
        self.row = row


class RowCountOutOfRange(FlowInfeasible):
    pass


@dataclass(frozen=True)
class FlowInstance:
    specs: tuple[SizeSpec, ...]
    row_width: float
    num_rows: int
    horizontal: bool = True
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.num_rows < 1:
            raise ValueError("num_rows must be at least 1")
        if not self.row_width > 0:
            raise ValueError("row_width must be positive")


@dataclass
class FlowAssignment:
    """Rows hold inclusive local index ranges; arrays are indexed locally.

    ``indices`` maps local positions back to the caller's widget sequence.
    Omitted widgets have NaN geometry. ``x``/``y`` are offsets from the flow
    region's top-left corner.
    """

    rows: list[tuple[int, int]]
    widths: np.ndarray
    heights: np.ndarray
    x: np.ndarray
    y: np.ndarray
    row_widths: list[float]
    omitted: frozenset[int]
    loss: float
    extent: tuple[float, float]
    horizontal: bool = True
    indices: np.ndarray = field(default=None)
    steps: int = 0

    def __post_init__(self):
        if self.indices is None:
            self.indices = np.arange(len(self.widths))

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def main_sizes(self) -> np.ndarray:
        return self.widths if self.horizontal else self.heights

    def cross_sizes(self) -> np.ndarray:
        return self.heights if self.horizontal else self.widths

    def rects(self, names: Sequence[str]) -> dict[str, tuple[float, float, float, float]]:
        """Physical (left, top, width, height) per placed widget, keyed by ``names[indices[i]]``."""
        out = {}
        for i, g in enumerate(self.indices):
            if i not in self.omitted:
                out[names[g]] = (float(self.x[i]), float(self.y[i]), float(self.widths[i]), float(self.heights[i]))
        return out


class _Axes:
    """Per-widget arrays in flow coordinates."""

    def __init__(self, specs: Sequence[SizeSpec], horizontal: bool):
        def col(f):
            return np.array([f(s) for s in specs], dtype=float)

        if horizontal:
            self.min_m, self.pref_m, self.max_m = col(lambda s: s.min_w), col(lambda s: s.pref_w), col(lambda s: s.max_w)
            self.min_c, self.pref_c, self.max_c = col(lambda s: s.min_h), col(lambda s: s.pref_h), col(lambda s: s.max_h)
        else:
            self.min_m, self.pref_m, self.max_m = col(lambda s: s.min_h), col(lambda s: s.pref_h), col(lambda s: s.max_h)
            self.min_c, self.pref_c, self.max_c = col(lambda s: s.min_w), col(lambda s: s.pref_w), col(lambda s: s.max_w)
        self.weight = col(lambda s: s.weight)
        self.priority = col(lambda s: s.priority)

    def take(self, idx: np.ndarray) -> "_Axes":
        new = object.__new__(_Axes)
        for k, v in self.__dict__.items():
            setattr(new, k, v[idx])
        return new

    def __len__(self):
        return len(self.pref_m)


def _loss(ax: _Axes, main: np.ndarray, cross: np.ndarray, mm: float) -> float:
    # size_loss is symmetric in the two axes, so flow coordinates are fine
    return float(K.size_loss(main, cross, ax.min_m, ax.pref_m, ax.max_m,
                             ax.min_c, ax.pref_c, ax.max_c, ax.weight, mm))


def _ends_to_rows(ends: np.ndarray) -> list[tuple[int, int]]:
    rows, start = [], 0
    for e in ends:
        rows.append((start, int(e)))
        start = int(e) + 1
    return rows


def _place(rows, main, cross, origins):
    """Offsets in flow coordinates; ``origins[r]`` is the (main, cross) corner of row r."""
    off_m = np.full(len(main), np.nan)
    off_c = np.full(len(main), np.nan)
    for (a, b), (om, oc) in zip(rows, origins):
        off_m[a:b + 1] = om + np.concatenate(([0.0], np.cumsum(main[a:b])))
        off_c[a:b + 1] = oc
    return off_m, off_c


def _stacked_origins(rows, cross, main0=0.0, cross0=0.0):
    origins, c = [], cross0
    for a, _ in rows:
        origins.append((main0, c))
        c += cross[a]
    return origins, c - cross0


def _assemble(rows, main, cross, origins, row_widths, omitted, loss, extent_mc,
              horizontal, indices=None, steps=0) -> FlowAssignment:
    off_m, off_c = _place(rows, main, cross, origins)
    if horizontal:
        w, h, x, y = main, cross, off_m, off_c
        extent = (float(extent_mc[0]), float(extent_mc[1]))
    else:
        w, h, x, y = cross, main, off_c, off_m
        extent = (float(extent_mc[1]), float(extent_mc[0]))
    return FlowAssignment(rows=rows, widths=w, heights=h, x=x, y=y, row_widths=list(row_widths),
                          omitted=frozenset(omitted), loss=loss, extent=extent,
                          horizontal=horizontal, indices=indices, steps=steps)


def _empty(row_width: float, horizontal: bool, indices=None) -> FlowAssignment:
    z = np.zeros(0)
    return _assemble([], z, z, [], [], (), 0.0, (row_width, 0.0), horizontal,
                     np.zeros(0, dtype=int) if indices is None else indices)


def row_range(specs: Sequence[SizeSpec], row_width: float, horizontal: bool = True) -> tuple[int, int, int]:
    """(minRows, prefRows, maxRows) by first-fit packing at min, preferred and max main sizes."""
    if not specs:
        return (0, 0, 0)
    ax = _Axes(specs, horizontal)
    if ax.min_m.max() > row_width:
        raise FlowInfeasible(f"a widget's minimum size {ax.min_m.max():g} exceeds row width {row_width:g}")
    # packing at pref/max is capped by row_width so an oversized widget still takes one row
    return tuple(int(K.first_fit_rows(np.minimum(a, row_width), row_width))
                 for a in (ax.min_m, ax.pref_m, ax.max_m))


def _fill(ax: _Axes, ends: np.ndarray, row_widths: np.ndarray, ragged_last: bool, uniform: bool, mm: float):
    return K.fill_rows(ax.pref_m, ax.pref_c, ax.min_m, ax.max_m, ax.min_c, ax.max_c, ax.weight,
                       ends, row_widths, bool(ragged_last), bool(uniform), float(mm))


def _greedy(ax: _Axes, row_width: float, num_rows: int, literal: bool, ragged_last: bool, mm: float,
            uniform: bool = False):
    ends, status, steps = K.greedy_breaks(ax.pref_m, float(row_width), int(num_rows), bool(literal))
    if status:
        raise EmptyRow(int(status), num_rows)
    row_widths = np.full(num_rows, float(row_width))
    main, cross = _fill(ax, ends, row_widths, ragged_last, uniform, mm)
    rows = _ends_to_rows(ends)
    return rows, main, cross, _loss(ax, main, cross, mm), steps + len(main)


def greedy_flow(inst: FlowInstance, *, literal: bool = False, ragged_last: bool = False,
                minmax_weight: float = W_MINMAX, check_range: bool = True,
                uniform_fill: bool = False) -> FlowAssignment:
    """Single linear pass: choose row breaks, then stretch each row to span ``row_width``.

    ``literal`` counts only the rows after the current one as available space
    when estimating the per-widget slack. ``uniform_fill`` spreads each row's
    leftover evenly instead of minimising the loss under min/max penalties.
    """
    if not inst.specs:
        return _empty(inst.row_width, inst.horizontal)
    if check_range:
        lo, _, hi = row_range(inst.specs, inst.row_width, inst.horizontal)
        if not lo <= inst.num_rows <= hi:
            raise RowCountOutOfRange(f"{inst.num_rows} rows outside feasible range [{lo}, {hi}]")
    ax = _Axes(inst.specs, inst.horizontal)
    rows, main, cross, loss, steps = _greedy(ax, inst.row_width, inst.num_rows, literal, ragged_last,
                                             minmax_weight, uniform_fill)
    origins, depth = _stacked_origins(rows, cross)
    return _assemble(rows, main, cross, origins, [inst.row_width] * len(rows), (), loss,
                     (inst.row_width, depth), inst.horizontal, steps=steps)


def refine_breaks(inst: FlowInstance, fa: FlowAssignment, *, ragged_last: bool = False,
                  minmax_weight: float = W_MINMAX, uniform_fill: bool = False, max_depth: float = math.inf,
                  max_passes: int = 3, **_) -> FlowAssignment:
    """Move single row breaks by one widget while that lowers the loss.

    Each trial re-fills only the two rows next to the break, so a pass costs
    O(numWidgets). Moves that would push the stacked depth past ``max_depth``
    are refused. Returns ``fa`` itself when no move helps.
    """
    if len(fa.rows) < 2 or fa.omitted:
        return fa
    ax = _Axes(inst.specs, inst.horizontal)
    mm, rw = float(minmax_weight), float(inst.row_width)
    ends = np.array([b for _, b in fa.rows], dtype=np.int64)
    last = len(ends) - 1

    def pair(j, e):
        a = int(e[j - 1]) + 1 if j else 0
        sub = slice(a, int(e[j + 1]) + 1)
        part = ax.take(np.arange(sub.start, sub.stop))
        local = np.array([e[j] - a, e[j + 1] - a], dtype=np.int64)
        main, cross = _fill(part, local, np.full(2, rw), ragged_last and j + 1 == last, uniform_fill, mm)
        return _loss(part, main, cross, mm), cross[0] + cross[-1]

    depth = float(fa.extent[1] if inst.horizontal else fa.extent[0])
    moved = False
    for _ in range(max_passes):
        changed = False
        for j in range(last):
            base, base_d = pair(j, ends)
            for step in (-1, 1):
                cand = ends.copy()
                cand[j] += step
                lo = int(ends[j - 1]) + 1 if j else 0
                if not lo <= cand[j] < ends[j + 1]:
                    continue
                loss, d = pair(j, cand)
                if loss < base - 1e-12 * max(1.0, base) and depth - base_d + d <= max_depth + 1e-9:
                    ends, base, depth = cand, loss, depth - base_d + d
                    base_d = d
                    changed = moved = True
        if not changed:
            break
    if not moved:
        return fa
    main, cross = _fill(ax, ends, np.full(len(ends), rw), ragged_last, uniform_fill, mm)
    rows = _ends_to_rows(ends)
    origins, total = _stacked_origins(rows, cross)
    return _assemble(rows, main, cross, origins, [rw] * len(rows), (), _loss(ax, main, cross, mm),
                     (rw, total), inst.horizontal, steps=fa.steps)


def best_greedy(specs: Sequence[SizeSpec], row_width: float, horizontal: bool = True,
                max_cross: float = np.inf, **kw) -> Optional[FlowAssignment]:
    """Greedy flow at the loss-minimizing row count within the feasible range (ties: fewer rows)."""
    if not specs:
        return _empty(row_width, horizontal)
    lo, _, hi = row_range(specs, row_width, horizontal)
    best = None
    for r in range(lo, hi + 1):
        try:
            fa = greedy_flow(FlowInstance(tuple(specs), row_width, r, horizontal), check_range=False, **kw)
        except EmptyRow:
            continue
        depth = fa.extent[1] if horizontal else fa.extent[0]
        if depth <= max_cross * (1 + 1e-12) and (best is None or fa.loss < best.loss):
            best = fa
    return best


def _reindex(fa: FlowAssignment, offset: int) -> FlowAssignment:
    fa.indices = fa.indices + offset
    return fa


def connected_flow(specs1: Sequence[SizeSpec], specs2: Sequence[SizeSpec], r: int,
                   row_width1: float, row_width2: float, horizontal: bool = True,
                   **kw) -> tuple[FlowAssignment, FlowAssignment]:
    """Fill ``r`` rows of the first region, spill the rest into the second region.

    Both assignments index into the concatenated sequence ``specs1 + specs2``.
    """
    allspecs = list(specs1) + list(specs2)
    n = len(allspecs)
    ax = _Axes(allspecs, horizontal) if allspecs else None
    cap = int(K.first_fit_rows(np.minimum(ax.pref_m, row_width1), row_width1)) if n else 0
    if not 0 <= r <= cap:
        raise RowCountOutOfRange(f"r={r} outside [0, {cap}]")
    k = int(K.prefix_in_rows(np.minimum(ax.pref_m, row_width1), row_width1, r)) if n else 0
    if k:
        fa1 = greedy_flow(FlowInstance(tuple(allspecs[:k]), row_width1, r, horizontal), check_range=False, **kw)
    else:
        fa1 = _empty(row_width1, horizontal)
    fa2 = best_greedy(allspecs[k:], row_width2, horizontal, **kw)
    if fa2 is None:
        raise FlowInfeasible("second region has no feasible row count")
    return fa1, _reindex(fa2, k)


def _split_hole(region_w: float, hole: Hole, horizontal: bool):
    """Hole rectangle in flow coordinates: (main offset, cross offset, main size, cross size)."""
    if horizontal:
        return hole.x, hole.y, hole.w, hole.h
    return hole.y, hole.x, hole.h, hole.w


def flow_around_fixed(specs: Sequence[SizeSpec], region_w: float, hole: Hole,
                      region_h: float = np.inf, horizontal: bool = True,
                      num_rows: Optional[int] = None, **kw) -> FlowAssignment:
    """Flow around a fixed block via Upper, Middle and Lower regions chained together.

    ``region_w`` is the row width (main axis) and ``region_h`` bounds the cross
    axis. The middle region is the wider gap beside the block. Every pair of
    (upper rows, middle rows) is tried, with the number of widgets per region
    ranging from a preferred-size to a minimum-size packing; the lowest total
    loss wins.
    A degenerate block falls back to a plain greedy flow at ``num_rows``
    (default: preferred row count).
    """
    hm, hc, hw, hh = _split_hole(region_w, hole, horizontal)
    if hw <= 0 or hh <= 0:
        r = num_rows or row_range(specs, region_w, horizontal)[1]
        return greedy_flow(FlowInstance(tuple(specs), region_w, r, horizontal), **kw)
    if hm < 0 or hc < 0 or hm + hw > region_w * (1 + 1e-12) or hc + hh > region_h * (1 + 1e-12):
        raise FlowInfeasible("fixed area does not fit inside the flow region")
    n = len(specs)
    ax = _Axes(specs, horizontal)
    left, right = hm, region_w - hm - hw
    mid_w = max(left, right)
    mid_m = 0.0 if left >= right else hm + hw
    lower_c = hc + hh
    lower_cap = region_h - lower_c

    def fill(lo_idx, width, cap):
        """Greedy rows for widgets starting at lo_idx; yields (k, rows, main, cross, loss, depth).

        For each row count, every prefix between first-fit at preferred sizes
        and first-fit at minimum sizes is tried, so a region may take squeezed
        widgets.
        """
        rest = ax.pref_m[lo_idx:]
        yield 0, [], None, None, 0.0, 0.0
        if width <= 0 or not len(rest):
            return
        clipped = np.minimum(rest, width)
        tight = np.minimum(ax.min_m[lo_idx:], width)
        top = int(K.first_fit_rows(clipped, width))
        for r in range(1, top + 1):
            k_pref = int(K.prefix_in_rows(clipped, width, r))
            k_min = int(K.prefix_in_rows(tight, width, r))
            for k in range(k_pref, max(k_pref, k_min) + 1):
                sub = ax.take(np.arange(lo_idx, lo_idx + k))
                if sub.min_m.max() > width:
                    return
                try:
                    rows, main, cross, loss, _ = _greedy(sub, width, r, kw.get("literal", False),
                                                         kw.get("ragged_last", False),
                                                         kw.get("minmax_weight", W_MINMAX),
                                                         kw.get("uniform_fill", False))
                except EmptyRow:
                    continue
                depth = sum(cross[a] for a, _ in rows)
                if depth <= cap * (1 + 1e-12):
                    yield k, rows, main, cross, loss, depth

    best = None
    for ku, rows_u, main_u, cross_u, loss_u, _ in fill(0, region_w, hc):
        for km, rows_m, main_m, cross_m, loss_m, _ in fill(ku, mid_w, hh):
            start = ku + km
            if start < n:
                low = best_greedy(list(specs[start:]), region_w, horizontal, max_cross=lower_cap,
                                  **{k: v for k, v in kw.items() if k != "check_range"})
                if low is None:
                    continue
                loss_l = low.loss
            else:
                low, loss_l = None, 0.0
            total = loss_u + loss_m + loss_l
            if best is None or total < best[0] - 1e-12:
                best = (total, (ku, rows_u, main_u, cross_u), (km, rows_m, main_m, cross_m), low)
    if best is None:
        raise FlowInfeasible("no row split fits around the fixed area")
    total, (ku, rows_u, main_u, cross_u), (km, rows_m, main_m, cross_m), low = best
    rows, main, cross, origins, widths = [], np.zeros(n), np.zeros(n), [], []
    for base, rws, m, c, om, oc0, wd in ((0, rows_u, main_u, cross_u, 0.0, 0.0, region_w),
                                        (ku, rows_m, main_m, cross_m, mid_m, hc, mid_w)):
        oc = oc0
        for a, b in rws:
            rows.append((base + a, base + b))
            main[base + a:base + b + 1] = m[a:b + 1]
            cross[base + a:base + b + 1] = c[a:b + 1]
            origins.append((om, oc))
            widths.append(wd)
            oc += c[a]
    depth = lower_c
    if low is not None:
        base = ku + km
        lm, lc = low.main_sizes(), low.cross_sizes()
        oc = lower_c
        for a, b in low.rows:
            rows.append((base + a, base + b))
            main[base + a:base + b + 1] = lm[a:b + 1]
            cross[base + a:base + b + 1] = lc[a:b + 1]
            origins.append((0.0, oc))
            widths.append(region_w)
            oc += lc[a]
        depth = oc
    return _assemble(rows, main, cross, origins, widths, (), total, (region_w, depth), horizontal)


def balanced_factors(n: int) -> list[int]:
    if n < 1:
        raise ValueError("n must be positive")
    small = [d for d in range(1, int(n ** 0.5) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


def balanced_flow(specs: Sequence[SizeSpec], row_width: float, num_rows: int,
                  horizontal: bool = True, minmax_weight: float = W_MINMAX,
                  uniform_fill: bool = False, soft_min: bool = False, **_) -> FlowAssignment:
    """Every row holds the same number of widgets; ``num_rows`` must divide the count.

    ``soft_min`` lets rows squeeze below their widgets' minimum sizes (penalised in the loss).
    """
    n = len(specs)
    if n % num_rows:
        raise FlowInfeasible(f"{num_rows} rows do not divide {n} widgets")
    k = n // num_rows
    ax = _Axes(specs, horizontal)
    if not soft_min and ax.min_m.reshape(num_rows, k).sum(axis=1).max() > row_width * (1 + 1e-12):
        raise FlowInfeasible("a balanced row cannot shrink to the row width")
    ends = np.arange(k - 1, n, k, dtype=np.int64)
    main, cross = _fill(ax, ends, np.full(num_rows, float(row_width)), False, uniform_fill, minmax_weight)
    rows = _ends_to_rows(ends)
    origins, depth = _stacked_origins(rows, cross)
    return _assemble(rows, main, cross, origins, [row_width] * num_rows, (), _loss(ax, main, cross, minmax_weight),
                     (row_width, depth), horizontal)


def optional_prune(inst: FlowInstance, omega: float = OMEGA, **kw) -> FlowAssignment:
    """Drop optional widgets (lowest priority first) while space is short and the loss improves."""
    specs = inst.specs
    n = len(specs)
    order = sorted((i for i in range(n) if specs[i].optional), key=lambda i: (specs[i].priority, -i))
    pref = np.array([s.main(inst.horizontal)[1] for s in specs], dtype=float)
    capacity = inst.num_rows * inst.row_width

    def evaluate(removed: list[int]) -> Optional[FlowAssignment]:
        keep = [i for i in range(n) if i not in removed]
        if not keep:
            return None
        try:
            fa = greedy_flow(FlowInstance(tuple(specs[i] for i in keep), inst.row_width, inst.num_rows,
                                          inst.horizontal), check_range=False, **kw)
        except FlowInfeasible:
            return None
        fa.loss += omega * sum(specs[i].priority for i in removed)
        return fa, keep

    def loss_of(res):
        return np.inf if res is None else res[0].loss

    removed: list[int] = []
    current = evaluate(removed)
    remaining = [i for i in order]

    def delta():
        keep = [i for i in range(n) if i not in removed]
        return (capacity - pref[keep].sum()) / max(len(keep), 1)

    while remaining and delta() < 0:
        cand = evaluate(removed + [remaining[0]])
        if loss_of(cand) < loss_of(current):
            removed.append(remaining.pop(0))
            current = cand
        else:
            break
    if removed and delta() >= 0:
        for i in sorted(removed, key=lambda i: (-specs[i].priority, i)):
            trial = [j for j in removed if j != i]
            cand = evaluate(trial)
            if loss_of(cand) <= loss_of(current):
                removed, current = trial, cand
            else:
                break
    if current is None:
        raise FlowInfeasible("required widgets do not fit in the given rows")
    fa, keep = current
    return _expand(fa, keep, n)


def _expand(fa: FlowAssignment, keep: list[int], n: int) -> FlowAssignment:
    """Lift an assignment over the retained widgets back to the full index space."""
    keep_arr = np.array(keep, dtype=int)
    full = {}
    for name in ("widths", "heights", "x", "y"):
        arr = np.full(n, np.nan)
        arr[keep_arr] = getattr(fa, name)
        full[name] = arr
    rows = [(keep[a], keep[b]) for a, b in fa.rows]
    omitted = frozenset(set(range(n)) - set(keep))
    return FlowAssignment(rows=rows, row_widths=fa.row_widths, omitted=omitted, loss=fa.loss,
                          extent=fa.extent, horizontal=fa.horizontal, steps=fa.steps, **full)
