"""Alternative solving strategies and random test layouts.

``solve_pure_bnb`` branches over every way to break each flow into rows and
finishes every row with its own small QP, so it finds the best layout the
model admits at exponential cost. ``solve_qp_for_flows`` keeps the greedy row
breaks but lets the leaf QP size flow widgets instead of fixing their sizes.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterator, Optional

import numpy as np

from .engine import (SolveConfig, SolvedLayout, Viewport, _Built, _Frozen, _Node, _Search, _State,
                     run_search, solve)
from .notation import HFLOW, MAX_SENTINEL, AltPosition, Hole, LayoutNode, SizeSpec, container
from .qp import ConstraintSystem
from . import _kernels as K
from .flow import _Axes

PURE_BNB_GUARD = 25

PATTERNS = ("simple-flow", "connected-flow", "flow-around-fixed", "balanced-flow",
            "optional-widgets", "alternative-positions")


class GuardExceeded(ValueError):
    """The instance is too large for an exhaustive strategy."""


# ---------------------------------------------------------------- pure branch and bound

class _Row:
    __slots__ = ("names", "main", "cross", "loss")

    def __init__(self, names, main, cross, loss):
        self.names, self.main, self.cross, self.loss = names, main, cross, loss


class _ExhaustiveSearch(_Search):
    def _row_fit(self, items: list[tuple[str, SizeSpec]], rw: float, horizontal: bool) -> _Row:
        """Least-loss sizes for one row spanning ``rw`` with a shared cross size.

        This is the row QP with soft min/max, solved in closed form.
        """
        ax = _Axes([s for _, s in items], horizontal)
        mm = self.cfg.minmax_weight
        main = np.empty(len(items))
        K.fit_sum(ax.pref_m, ax.min_m, ax.max_m, ax.weight, float(rw), mm, main)
        cross = float(K.fit_common(ax.pref_c, ax.min_c, ax.max_c, ax.weight, mm))
        loss = float(K.size_loss(main, np.full(len(items), cross), ax.min_m, ax.pref_m, ax.max_m,
                                 ax.min_c, ax.pref_c, ax.max_c, ax.weight, mm))
        self.stats.qp_calls += 1
        return _Row(tuple(n for n, _ in items), main.tolist(), cross, loss)

    def _compositions(self, items, rw, horizontal, base, fixed_len=None) -> Iterator[tuple[list[_Row], float]]:
        """Every split of ``items`` into consecutive rows whose partial loss stays below the best."""
        n = len(items)

        def rec(start, rows, acc):
            if start == n:
                yield list(rows), acc
                return
            ends = [start + fixed_len - 1] if fixed_len else range(start, n)
            for end in ends:
                if end >= n:
                    continue
                row = self._row_fit(items[start:end + 1], rw, horizontal)
                total = acc + row.loss
                if self.cfg.pruning and base + total >= self.best:
                    self.stats.pruned += 1
                    continue
                rows.append(row)
                yield from rec(end + 1, rows, total)
                rows.pop()

        if n == 0:
            yield [], 0.0
        else:
            yield from rec(0, [], 0.0)

    @staticmethod
    def _stack(rows: list[_Row], rw: float, horizontal: bool, loss: float, penalty: float,
               omitted: tuple[str, ...], choice) -> _Frozen:
        placed, depth = [], 0.0
        for row in rows:
            off = 0.0
            for name, m in zip(row.names, row.main):
                if horizontal:
                    placed.append((name, off, depth, m, row.cross))
                else:
                    placed.append((name, depth, off, row.cross, m))
                off += m
            depth += row.cross
        extent = (rw, depth) if horizontal else (depth, rw)
        return _Frozen(tuple(placed), omitted, extent, loss, choice, penalty,
                       tuple(r.names for r in rows), rw, horizontal, tuple((r.names, rw) for r in rows if r.names))

    def _flow(self, head: _Node, agenda: tuple, state: _State, parent_id: int) -> float:
        node = head.node
        if node.hole is not None and node.hole.w > 0 and node.hole.h > 0:
            return super()._flow(head, agenda, state, parent_id)
        best = math.inf
        for choice, frozen in self._candidates(head, state.partial):
            st = state.child(sum(f.loss for f in frozen.values()), frozen=frozen)
            best = min(best, self._branch(head.label, choice, st, agenda, parent_id).loss)
        return best

    def _candidates(self, head: _Node, base: float) -> Iterator[tuple[object, dict]]:
        node = head.node
        horizontal = node.kind == HFLOW
        items = [(c.name, c.size) for c in node.children]
        if node.group:
            first, second = self.groups[node.group]
            items = [(c.name, c.size) for c in first.node.children + second.node.children]
            for k in range(len(items) + 1):
                for rows1, l1 in self._compositions(items[:k], first.row_width, horizontal, base):
                    for rows2, l2 in self._compositions(items[k:], second.row_width, horizontal, base + l1):
                        choice = (len(rows1), tuple(len(r.names) for r in rows1 + rows2))
                        yield choice, {first.key: self._stack(rows1, first.row_width, horizontal, l1, 0.0, (), choice),
                                       second.key: self._stack(rows2, second.row_width, horizontal, l2, 0.0, (),
                                                               len(rows2))}
            return
        rw = head.row_width
        if node.balanced:
            n = len(items)
            for d in sorted(set(n // k for k in range(1, n + 1) if n % k == 0)):
                for rows, loss in self._compositions(items, rw, horizontal, base, fixed_len=n // d):
                    yield d, {head.key: self._stack(rows, rw, horizontal, loss, 0.0, (), d)}
            return
        optional = [i for i, (_, s) in enumerate(items) if s.optional]
        for mask in itertools.product((False, True), repeat=len(optional)):
            dropped = {i for i, on in zip(optional, mask) if on}
            keep = [it for i, it in enumerate(items) if i not in dropped]
            if not keep:
                continue
            penalty = self.cfg.omega * sum(items[i][1].priority for i in dropped)
            omitted = tuple(items[i][0] for i in sorted(dropped))
            for rows, loss in self._compositions(keep, rw, horizontal, base + penalty):
                choice = tuple(len(r.names) for r in rows)
                yield choice, {head.key: self._stack(rows, rw, horizontal, loss + penalty, penalty, omitted,
                                                     len(rows))}


def solve_pure_bnb(root: LayoutNode, viewport: Viewport, config: Optional[SolveConfig] = None,
                   guard: int = PURE_BNB_GUARD) -> SolvedLayout:
    """Exhaustive search over all row breaks; exponential in the number of flow widgets."""
    n = sum(1 for _ in root.widgets())
    if n > guard:
        raise GuardExceeded(f"{n} widgets exceed the exhaustive-search limit of {guard}")
    return run_search(_ExhaustiveSearch, root, viewport, config or SolveConfig())


# ---------------------------------------------------------------- QP for flows

class _RelaxedSearch(_Search):
    """Same tree and pruning as the default search; leaves re-solve flows with free widget sizes."""

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.relaxed_best = math.inf

    def _flow_options(self, head: _Node):
        values, start, make = super()._flow_options(head)

        def make_local(v):
            frozen = make(v)
            for key, fr in frozen.items():
                if fr.rows is not None and fr.rows:
                    self._local_qp(fr)
            return frozen
        return values, start, make_local

    def _local_qp(self, fr: _Frozen) -> float:
        """QP over one flow in isolation, as solved at every branch by this strategy."""
        sys = ConstraintSystem()
        built = _Built(sys, [], [])
        b = sys.box("flow")
        sys.add([(1.0, b.left)], "=", 0.0)
        sys.add([(1.0, b.top)], "=", 0.0)
        self._emit_rows(None, b, "flow", fr, built)
        _, sol = self._solve(built)
        return sol.objective if sol is not None else math.inf

    def _leaf(self, state: _State) -> float:
        best, pack = self._finish(state)
        self.best = min(self.best, best)
        if pack is None:
            return best
        moves, alt_penalty = pack[3], pack[4]
        qp, sol = self._solve(self._build(state, moves, relaxed=True))
        if sol is not None and sol.status == "optimal":
            relaxed = [f for f in state.frozen.values() if f.rows is not None]
            fixed = state.partial - sum(f.loss - f.penalty for f in relaxed)
            loss = fixed + sol.objective + alt_penalty
            if loss < self.relaxed_best:
                self.relaxed_best = loss
                self.result = self._record(state, (self._last_built, sol, qp, moves, alt_penalty), loss)
        return best


def solve_qp_for_flows(root: LayoutNode, viewport: Viewport, config: Optional[SolveConfig] = None) -> SolvedLayout:
    """Greedy row breaks with widget sizes chosen by the leaf QP."""
    return run_search(_RelaxedSearch, root, viewport, config or SolveConfig())


STRATEGIES: dict[str, Callable[..., SolvedLayout]] = {
    "orcsolver": solve,
    "pure-bnb": solve_pure_bnb,
    "qp-for-flows": solve_qp_for_flows,
}


# ---------------------------------------------------------------- random layouts

def _random_widget(rng: np.random.Generator, name: str, optional: bool = False, priority: float = 0.0,
                   stretchy: bool = False) -> LayoutNode:
    pw = round(float(rng.uniform(40, 160)), 1)
    ph = round(float(rng.uniform(20, 60)), 1)
    top_w, top_h = (MAX_SENTINEL, MAX_SENTINEL) if stretchy else (round(1.5 * pw, 2), round(1.5 * ph, 2))
    spec = SizeSpec(min_w=round(pw / 2, 2), pref_w=pw, max_w=top_w,
                    min_h=round(ph / 2, 2), pref_h=ph, max_h=top_h,
                    optional=optional, priority=priority)
    return LayoutNode("Widget", name=name, size=spec)


def gen_random_layout(pattern: str, n: int, seed: int) -> LayoutNode:
    """Deterministic random layout of ``n`` widgets following one of ``PATTERNS``."""
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}; choose from {', '.join(PATTERNS)}")
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng([seed, PATTERNS.index(pattern), n])

    def widgets(count, prefix="w", optional_share=0.0):
        out = []
        for i in range(count):
            opt = bool(rng.random() < optional_share)
            out.append(_random_widget(rng, f"{prefix}{i}", opt, float(rng.integers(1, 4)) if opt else 0.0))
        return out

    if pattern == "simple-flow":
        return container("HF", *widgets(n))
    if pattern == "balanced-flow":
        return container("HF", *widgets(n), balanced=True)
    if pattern == "optional-widgets":
        return container("HF", *widgets(n, optional_share=0.3))
    if pattern == "flow-around-fixed":
        return container("HF", *widgets(n), hole=Hole(0.0, 40.0, 120.0, 80.0))
    if pattern == "connected-flow":
        ws = widgets(n)
        if n == 1:
            return container("HF", *ws)
        k = int(rng.integers(1, n))
        return container("Row", container("HF", *ws[:k], group="g"), container("HF", *ws[k:], group="g"))
    # alternative-positions
    # the two panels fill whatever the flow leaves, so they carry no max
    toolbar = _random_widget(rng, "toolbar", stretchy=True)
    toolbar = LayoutNode("Widget", name="toolbar", size=toolbar.size, alt=AltPosition("body", 0.0))
    main = _random_widget(rng, "main", stretchy=True)
    body = container("Row", container("VF", *widgets(max(n - 2, 1))), main, node_id="body")
    return container("Column", toolbar, body)


def random_viewport(root: LayoutNode, seed: int) -> Viewport:
    """Viewport whose width is 30-60% of the summed preferred widths, clamped to [300, 1200].

    Height leaves 20-60% slack over the preferred area, plus a 60px band.

    Flows then wrap into a few rows instead of stretching one row past its maxima.
    """
    rng = np.random.default_rng([seed, 7919])
    specs = [w.size for w in root.widgets()]
    total = sum(s.pref_w for s in specs)
    width = float(round(min(1200.0, max(300.0, rng.uniform(0.3, 0.6) * total))))
    area = sum(s.pref_w * s.pref_h for s in specs)
    height = rng.uniform(1.2, 1.6) * area / width + 60.0
    return Viewport(width, float(round(max(200.0, height))))
