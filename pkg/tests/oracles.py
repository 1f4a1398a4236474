"""Independent reference computations used by the tests.

Nothing here calls the package's solvers: rows are solved with cvxpy and
row breaks are enumerated exhaustively.
"""

import itertools
import math

import cvxpy as cp
import numpy as np

from orclayout.notation import MAX_SENTINEL

W_MM = 1e6


def _axis(specs, horizontal):
    if horizontal:
        return ([s.min_w for s in specs], [s.pref_w for s in specs], [s.max_w for s in specs],
                [s.min_h for s in specs], [s.pref_h for s in specs], [s.max_h for s in specs])
    return ([s.min_h for s in specs], [s.pref_h for s in specs], [s.max_h for s in specs],
            [s.min_w for s in specs], [s.pref_w for s in specs], [s.max_w for s in specs])


def _penalised(x, lo, p, hi, wt, mm):
    terms = cp.multiply(wt, cp.square(x - p) + mm * cp.square(cp.pos(lo - x)))
    bounded = [i for i, v in enumerate(hi) if v < MAX_SENTINEL]
    out = cp.sum(terms)
    if bounded:
        idx = np.array(bounded)
        out = out + mm * cp.sum(cp.multiply(wt[idx], cp.square(cp.pos(x[idx] - hi[idx]))))
    return out


def row_oracle(specs, row_width, horizontal=True, mm=W_MM):
    """Best sizes for one row spanning ``row_width`` with a shared cross size."""
    lo_m, p_m, hi_m, lo_c, p_c, hi_c = (np.array(a, dtype=float) for a in _axis(specs, horizontal))
    wt = np.array([s.weight for s in specs], dtype=float)
    k = len(specs)
    # rescale to keep the conic solver well conditioned
    sc = max(1.0, float(np.max(p_m)))
    x = cp.Variable(k)
    h = cp.Variable()
    obj = (_penalised(x, lo_m / sc, p_m / sc, hi_m / sc, wt, mm)
           + _penalised(h * np.ones(k), lo_c / sc, p_c / sc, hi_c / sc, wt, mm))
    prob = cp.Problem(cp.Minimize(obj), [cp.sum(x) == row_width / sc])
    prob.solve(solver=cp.CLARABEL)
    main = np.asarray(x.value) * sc
    cross = float(h.value) * sc
    return main, cross, row_loss(specs, main, cross, horizontal, mm)


def row_loss(specs, main, cross, horizontal=True, mm=W_MM):
    total = 0.0
    for s, m in zip(specs, main):
        w, h = (m, cross) if horizontal else (cross, m)
        dev = (w - s.pref_w) ** 2 + (h - s.pref_h) ** 2
        viol = (max(0, s.min_w - w) ** 2 + max(0, w - s.max_w) ** 2
                + max(0, s.min_h - h) ** 2 + max(0, h - s.max_h) ** 2)
        total += s.weight * (dev + mm * viol)
    return total


def compositions(n):
    """Every way to cut ``range(n)`` into consecutive non-empty rows."""
    for cuts in itertools.product((False, True), repeat=max(n - 1, 0)):
        rows, start = [], 0
        for i, cut in enumerate(cuts, start=1):
            if cut:
                rows.append((start, i))
                start = i
        rows.append((start, n))
        yield rows


_ROWS = {}


def cached_row(specs, row_width, horizontal=True, mm=W_MM):
    key = (tuple(specs), float(row_width), horizontal, mm)
    if key not in _ROWS:
        _ROWS[key] = row_oracle(list(specs), row_width, horizontal, mm)
    return _ROWS[key]


def best_flow(specs, row_width, cross_limit=math.inf, horizontal=True, mm=W_MM):
    """Minimum loss over all row breaks whose stacked depth fits ``cross_limit``."""
    specs = tuple(specs)

    def row(a, b):
        return cached_row(specs[a:b], row_width, horizontal, mm)

    best, arg = math.inf, None
    for rows in compositions(len(specs)):
        solved = [row(a, b) for a, b in rows]
        if sum(r[1] for r in solved) > cross_limit + 1e-6:
            continue
        loss = sum(r[2] for r in solved)
        if loss < best:
            best, arg = loss, rows
    return best, arg


def qp_oracle(qp):
    """Solve a lowered QuadraticProgram with cvxpy; returns (objective, x)."""
    x = cp.Variable(qp.n)
    cons = []
    for c in qp.constraints:
        expr = sum(co * x[v] for co, v in c.terms)
        cons.append({"=": expr == c.rhs, "<=": expr <= c.rhs, ">=": expr >= c.rhs}[c.relation])
    obj = sum(w * cp.square(x[v]) for v, w in qp.objective.items()) if qp.objective else cp.Constant(0)
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.status, prob.value, x.value


def best_around(specs, region_w, region_h, hole, horizontal=True, mm=W_MM):
    """Exhaustive split of a flow into upper / beside / lower regions around ``hole``.

    Upper spans the full width above the hole, the beside region uses the wider
    gap next to it, lower spans the full width below. Every split point and
    every row break inside each region is tried.
    """
    hm, hc, hw, hh = (hole.x, hole.y, hole.w, hole.h) if horizontal else (hole.y, hole.x, hole.h, hole.w)
    mid_w = max(hm, region_w - hm - hw)
    regions = [(region_w, hc), (mid_w, hh), (region_w, region_h - hc - hh)]
    n = len(specs)
    best = math.inf
    for a in range(n + 1):
        for b in range(a, n + 1):
            total = 0.0
            for (w, depth), part in zip(regions, (specs[:a], specs[a:b], specs[b:])):
                if not part:
                    continue
                if w <= 0:
                    total = math.inf
                    break
                loss, _ = best_flow(part, w, depth, horizontal, mm)
                total += loss
                if total >= best:
                    break
            best = min(best, total)
    return best
