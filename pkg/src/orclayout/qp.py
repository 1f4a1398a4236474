"""Linear constraint systems with soft terms, lowered to convex QPs and solved in-house.

Soft terms become equalities with one slack each (``expr + d = target``) and the
objective is ``sum(weight * d**2)``. One-sided soft terms (soft min/max) add a
non-negative surplus variable so the slack only picks up the violation.

:func:`solve_qp` first collapses difference equalities (``x - y = c``, ``x = c``)
with a weighted union-find, which removes nearly every variable of a typical
layout, then runs a primal active-set method on the small dense remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np
from scipy.linalg import null_space, qr
from scipy.optimize import nnls

from .notation import MAX_SENTINEL, SizeSpec

W_MINMAX = 1e6
OMEGA = 1000.0
FEAS_TOL = 1e-7
OPT_TOL = 1e-6

Terms = tuple[tuple[float, int], ...]


class QPIterationLimit(RuntimeError):
    """The active-set method did not converge within its iteration budget."""


@dataclass(frozen=True)
class Variable:
    id: int
    role: str  # left/right/top/bottom/slack/surplus/aux
    owner: str


@dataclass(frozen=True)
class LinearConstraint:
    terms: Terms
    relation: str  # "=", "<=", ">="
    rhs: float

    def __post_init__(self):
        if self.relation not in ("=", "<=", ">="):
            raise ValueError(f"bad relation {self.relation!r}")
        if not any(c != 0 for c, _ in self.terms):
            raise ValueError("constraint needs at least one nonzero coefficient")

    def value(self, x: np.ndarray) -> float:
        return sum(c * x[v] for c, v in self.terms)


@dataclass(frozen=True)
class SoftTerm:
    terms: Terms
    target: float
    weight: float
    relation: str = "="  # "=" two-sided, ">=" / "<=" penalise one side only
    owner: str = ""

    def __post_init__(self):
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError(f"soft term weight must be positive and finite, got {self.weight}")


class Box(NamedTuple):
    left: int
    right: int
    top: int
    bottom: int

    def width(self) -> Terms:
        return ((1.0, self.right), (-1.0, self.left))

    def height(self) -> Terms:
        return ((1.0, self.bottom), (-1.0, self.top))


class ConstraintSystem:
    """Variables, hard linear constraints and soft terms for one layout candidate."""

    def __init__(self):
        self.variables: list[Variable] = []
        self.constraints: list[LinearConstraint] = []
        self.soft: list[SoftTerm] = []
        self.boxes: dict[str, Box] = {}
        self._sized: set[str] = set()

    def clone(self) -> "ConstraintSystem":
        c = ConstraintSystem()
        c.variables = list(self.variables)
        c.constraints = list(self.constraints)
        c.soft = list(self.soft)
        c.boxes = dict(self.boxes)
        c._sized = set(self._sized)
        return c

    def new_var(self, role: str, owner: str) -> int:
        v = len(self.variables)
        self.variables.append(Variable(v, role, owner))
        return v

    def box(self, owner: str) -> Box:
        b = self.boxes.get(owner)
        if b is None:
            b = Box(*(self.new_var(r, owner) for r in ("left", "right", "top", "bottom")))
            self.boxes[owner] = b
        return b

    def add(self, terms: Iterable[tuple[float, int]], relation: str, rhs: float) -> None:
        self.constraints.append(LinearConstraint(tuple(terms), relation, float(rhs)))

    def add_soft(self, terms: Iterable[tuple[float, int]], target: float, weight: float,
                 relation: str = "=", owner: str = "") -> None:
        self.soft.append(SoftTerm(tuple(terms), float(target), float(weight), relation, owner))


def add_size_constraints(system: ConstraintSystem, owner: str, spec: SizeSpec,
                         soft_minmax: bool = False, minmax_weight: float = W_MINMAX) -> None:
    """Attach preferred-size soft terms and min/max bounds to ``owner``'s box."""
    if owner not in system.boxes:
        raise KeyError(f"no boundary variables for {owner!r}")
    if owner in system._sized:
        raise ValueError(f"size constraints already attached to {owner!r}")
    system._sized.add(owner)
    b = system.boxes[owner]
    w, h = b.width(), b.height()
    system.add_soft(w, spec.pref_w, spec.weight, "=", owner)
    system.add_soft(h, spec.pref_h, spec.weight, "=", owner)
    bounds = [(w, ">=", spec.min_w), (h, ">=", spec.min_h)]
    # a max at the sentinel means unbounded; a 1e7 target would only cost precision
    bounds += [(t, "<=", v) for t, v in ((w, spec.max_w), (h, spec.max_h)) if v < MAX_SENTINEL]
    for terms, rel, val in bounds:
        if soft_minmax:
            system.add_soft(terms, val, spec.weight * minmax_weight, rel, owner)
        else:
            system.add(terms, rel, val)


# ---------------------------------------------------------------- lowering

class SoftRow(NamedTuple):
    slack: int
    weight: float
    others: Terms  # slack = target - sum(others)
    target: float


@dataclass
class QuadraticProgram:
    variables: list[Variable]
    constraints: list[LinearConstraint]
    objective: dict[int, float]  # slack id -> weight; objective = sum w * x**2
    soft_rows: list[SoftRow] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.variables)

    def objective_value(self, x: np.ndarray) -> float:
        return float(sum(w * x[v] ** 2 for v, w in self.objective.items()))

    def dump(self) -> str:
        """Plain-text listing for bug reports."""
        lines = [f"# {self.n} variables, {len(self.constraints)} constraints, "
                 f"{len(self.objective)} objective terms"]
        for v in self.variables:
            lines.append(f"var x{v.id} {v.role} {v.owner}")
        for c in self.constraints:
            expr = " ".join(f"{co:+g}*x{v}" for co, v in c.terms)
            lines.append(f"st {expr} {c.relation} {c.rhs:g}")
        lines.append("min " + " ".join(f"{w:+g}*x{v}^2" for v, w in self.objective.items()))
        return "\n".join(lines) + "\n"


def lower_soft(system: ConstraintSystem) -> QuadraticProgram:
    """Replace every soft term by a slack equality and a weighted squared slack."""
    variables = list(system.variables)
    constraints = list(system.constraints)
    objective: dict[int, float] = {}
    rows: list[SoftRow] = []
    for k, st in enumerate(system.soft):
        d = len(variables)
        variables.append(Variable(d, "slack", st.owner or f"soft{k}"))
        terms = list(st.terms)
        others = list(st.terms)
        if st.relation != "=":
            s = len(variables)
            variables.append(Variable(s, "surplus", st.owner or f"soft{k}"))
            # >=: expr + d - s = t ; <=: expr + d + s = t ; s >= 0
            sc = -1.0 if st.relation == ">=" else 1.0
            terms.append((sc, s))
            others.append((sc, s))
            constraints.append(LinearConstraint(((-1.0, s),), "<=", 0.0))
        terms.append((1.0, d))
        constraints.append(LinearConstraint(tuple(terms), "=", st.target))
        objective[d] = st.weight
        rows.append(SoftRow(d, st.weight, tuple(others), st.target))
    return QuadraticProgram(variables, constraints, objective, rows)


# ---------------------------------------------------------------- solving

@dataclass
class QPSolution:
    status: str  # "optimal" | "infeasible"
    assignment: Optional[np.ndarray]
    objective: float
    iterations: int = 0
    reduced_size: int = 0

    def __getitem__(self, var: int) -> float:
        return float(self.assignment[var])


def _infeasible(size: int = 0) -> QPSolution:
    return QPSolution("infeasible", None, math.inf, 0, size)


class _UnionFind:
    """x_v = x_root + offset; index ``n`` is the constant zero."""

    def __init__(self, n: int):
        self.parent = list(range(n + 1))
        self.off = [0.0] * (n + 1)
        self.zero = n

    def find(self, v: int) -> tuple[int, float]:
        parent, off = self.parent, self.off
        path = []
        while parent[v] != v:
            path.append(v)
            v = parent[v]
        tot = 0.0
        for u in reversed(path):
            tot += off[u]
            off[u] = tot
            parent[u] = v
        return v, (off[path[0]] if path else 0.0)

    def union(self, x: int, y: int, d: float) -> bool:
        """Impose x - y = d. False when it contradicts earlier equalities."""
        rx, ox = self.find(x)
        ry, oy = self.find(y)
        if rx == ry:
            return abs(ox - oy - d) <= FEAS_TOL * max(1.0, abs(d))
        # the zero constant always stays a root; otherwise the lower index does
        if ry == self.zero or (rx != self.zero and ry < rx):
            self.parent[rx] = ry
            self.off[rx] = d - ox + oy
        else:
            self.parent[ry] = rx
            self.off[ry] = ox - oy - d
        return True


def _merge(terms: Iterable[tuple[float, int]]) -> dict[int, float]:
    out: dict[int, float] = {}
    for c, v in terms:
        out[v] = out.get(v, 0.0) + c
    return {v: c for v, c in out.items() if c != 0.0}


def solve_qp(qp: QuadraticProgram, max_iter: Optional[int] = None) -> QPSolution:
    """Minimise the diagonal objective subject to all hard constraints.

    Returns status ``infeasible`` when no point satisfies the constraints and
    raises :class:`QPIterationLimit` if the active-set loop does not converge.
    """
    n = qp.n
    uf = _UnionFind(n)
    slack_ids = {r.slack for r in qp.soft_rows}
    general_eq: list[tuple[dict[int, float], float]] = []
    ineq: list[tuple[dict[int, float], float]] = []
    for con in qp.constraints:
        terms = _merge(con.terms)
        if con.relation == "=":
            if any(v in slack_ids for v in terms):
                continue  # slack rows are substituted into the objective
            items = list(terms.items())
            if len(items) == 1:
                (v, a), = items
                if not uf.union(v, uf.zero, con.rhs / a):
                    return _infeasible()
                continue
            if len(items) == 2:
                (v1, a1), (v2, a2) = items
                if abs(a1 + a2) <= 1e-12 * abs(a1):
                    if not uf.union(v1, v2, con.rhs / a1):
                        return _infeasible()
                    continue
            general_eq.append((terms, con.rhs))
        elif con.relation == "<=":
            ineq.append((terms, con.rhs))
        else:
            ineq.append(({v: -c for v, c in terms.items()}, -con.rhs))

    cls_of = [0] * n
    cls_off = [0.0] * n
    roots: dict[int, int] = {}
    for v in range(n):
        if v in slack_ids:
            cls_of[v] = -2
            continue
        r, o = uf.find(v)
        cls_off[v] = o
        if r == uf.zero:
            cls_of[v] = -1
        else:
            k = roots.get(r)
            if k is None:
                k = roots[r] = len(roots)
            cls_of[v] = k
    m = len(roots)

    def reduce(terms: Mapping[int, float]) -> tuple[dict[int, float], float]:
        coefs: dict[int, float] = {}
        const = 0.0
        for v, c in terms.items():
            const += c * cls_off[v]
            k = cls_of[v]
            if k >= 0:
                coefs[k] = coefs.get(k, 0.0) + c
        return coefs, const

    def dense(rows: list[tuple[dict[int, float], float]]) -> tuple[np.ndarray, np.ndarray]:
        mat = np.zeros((len(rows), m))
        rhs = np.zeros(len(rows))
        for i, (coefs, b) in enumerate(rows):
            for k, c in coefs.items():
                mat[i, k] = c
            rhs[i] = b
        return mat, rhs

    eq_rows, in_rows = [], []
    for terms, rhs in general_eq:
        coefs, const = reduce(terms)
        coefs = {k: c for k, c in coefs.items() if abs(c) > 1e-14}
        if not coefs:
            if abs(rhs - const) > FEAS_TOL * max(1.0, abs(rhs)):
                return _infeasible()
            continue
        eq_rows.append((coefs, rhs - const))
    for terms, rhs in ineq:
        coefs, const = reduce(terms)
        coefs = {k: c for k, c in coefs.items() if abs(c) > 1e-14}
        if not coefs:
            if const - rhs > FEAS_TOL * max(1.0, abs(rhs)):
                return _infeasible()
            continue
        in_rows.append((coefs, rhs - const))
    obj_rows, weights = [], []
    for r in qp.soft_rows:
        coefs, const = reduce(_merge(r.others))
        obj_rows.append((coefs, r.target - const))
        weights.append(r.weight)

    E, e = dense(eq_rows)
    G, h = dense(in_rows)
    A, t = dense(obj_rows)
    # objective |B y - d|^2; kept in least-squares form so the 1e6 min/max
    # weights are not squared into normal equations
    root_w = np.sqrt(np.asarray(weights, dtype=float))
    B = A * root_w[:, None]
    d = t * root_w

    if max_iter is None:
        max_iter = 20 * (m + len(in_rows)) + 200
    E, e, ok = _independent_rows(E, e)
    if not ok:
        return _infeasible(m)
    y, iters = _solve_reduced(B, d, E, e, G, h, max_iter)
    if y is None:
        return _infeasible(m)

    x = np.empty(n)
    for v in range(n):
        k = cls_of[v]
        if k == -2:
            continue
        x[v] = cls_off[v] + (y[k] if k >= 0 else 0.0)
    for r in qp.soft_rows:
        x[r.slack] = r.target - sum(co * x[v] for co, v in r.others)
    return QPSolution("optimal", x, qp.objective_value(x), iters, m)


def _independent_rows(E: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    if E.shape[0] == 0:
        return E, e, True
    _, R, piv = qr(E.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-10 * max(1.0, diag[0] if diag.size else 1.0)))
    keep = np.sort(piv[:rank])
    sol = np.linalg.lstsq(E[keep], e[keep], rcond=None)[0]
    if np.max(np.abs(E @ sol - e)) > FEAS_TOL * max(1.0, np.max(np.abs(e))):
        return E, e, False
    return E[keep], e[keep], True


RCOND = 1e-12


def _ls_step(B, d, y, Aw):
    """Step minimising |B(y+p) - d|^2 with Aw p = 0, and multipliers at y+p."""
    m = B.shape[1]
    Z = null_space(Aw) if Aw.shape[0] else np.eye(m)
    if Z.shape[1]:
        # B @ Z is often rank deficient or all but zero (phase 1 ignores most variables), so
        # singular values are cut relative to B itself; round-off would otherwise give huge steps
        U, s, Vt = np.linalg.svd(B @ Z, full_matrices=False)
        keep = s > RCOND * max(1.0, float(np.abs(B).max()) if B.size else 1.0)
        z = Vt[keep].T @ ((U[:, keep].T @ (d - B @ y)) / s[keep])
        p = Z @ z
    else:
        p = np.zeros(m)
    g = 2.0 * B.T @ (B @ (y + p) - d)
    lam = np.linalg.lstsq(Aw.T, -g, rcond=RCOND)[0] if Aw.shape[0] else np.zeros(0)
    return p, lam, g


def _active_set(B, d, E, e, G, h, y, working, max_iter):
    """Primal active-set method from a feasible ``y``. Returns (y, working, iterations)."""
    me = E.shape[0]
    W = list(working)
    gnorm = np.linalg.norm(G, axis=1) if G.shape[0] else np.zeros(0)
    for it in range(1, max_iter + 1):
        Aw = np.vstack([E, G[W]]) if W else E
        p, lam, g = _ls_step(B, d, y, Aw)
        scale = max(1.0, float(np.max(np.abs(y))) if y.size else 1.0)
        if not p.size or np.max(np.abs(p)) <= 1e-11 * scale:
            lam_in = lam[me:]
            tol = 1e-9 * max(1.0, float(np.max(np.abs(g))) if g.size else 1.0)
            if not W or lam_in.min() >= -tol:
                return y, W, it
            # most negative multiplier; ties go to the lowest constraint index
            worst = min(range(len(W)), key=lambda j: (lam_in[j], W[j]))
            W.pop(worst)
            continue
        if G.shape[0]:
            Gp = G @ p
            slack = np.maximum(h - G @ y, 0.0)
            pn = np.max(np.abs(p))
            cand = Gp > 1e-12 * gnorm * pn
            if W:
                cand[W] = False
            alpha, block = 1.0, None
            if cand.any():
                idx = np.nonzero(cand)[0]
                ratios = slack[idx] / Gp[idx]
                j = int(np.argmin(ratios))  # argmin returns the first, i.e. lowest index
                if ratios[j] < 1.0:
                    alpha, block = float(ratios[j]), int(idx[j])
            y = y + alpha * p
            if block is not None:
                W.append(block)
        else:
            y = y + p
    raise QPIterationLimit(f"active-set method exceeded {max_iter} iterations")


def _row_tol(G, h, y):
    """Feasibility tolerance per inequality row, relative to the magnitudes involved."""
    if not G.shape[0]:
        return np.zeros(0)
    scale = np.maximum(np.abs(h), np.abs(G) @ np.abs(y))
    return FEAS_TOL * np.maximum(1.0, scale)


def _solve_reduced(B, d, E, e, G, h, max_iter):
    m = B.shape[1]
    if m == 0:
        return np.zeros(0), 0
    # equality-constrained minimiser first; when it is feasible it is optimal
    yp = np.linalg.lstsq(E, e, rcond=None)[0] if E.shape[0] else np.zeros(m)
    p, _, _ = _ls_step(B, d, yp, E)
    y0 = yp + p
    viol = G @ y0 - h if G.shape[0] else np.zeros(0)
    tol = _row_tol(G, h, y0)
    if not viol.size or (viol <= tol).all():
        return y0, 1
    # phase 1: minimise 0.5*|v|^2 with G_i y - v_i <= h_i over the violated rows
    bad = np.nonzero(viol > tol)[0]
    nv = len(bad)
    B1 = np.hstack([np.zeros((nv, m)), np.eye(nv)])
    d1 = np.zeros(nv)
    E1 = np.hstack([E, np.zeros((E.shape[0], nv))])
    G1 = np.zeros((G.shape[0] + nv, m + nv))
    G1[:G.shape[0], :m] = G
    G1[bad, m + np.arange(nv)] = -1.0
    G1[G.shape[0]:, m:] = -np.eye(nv)
    h1 = np.concatenate([h, np.zeros(nv)])
    z0 = np.concatenate([y0, viol[bad]])
    z, W1, it1 = _active_set(B1, d1, E1, e, G1, h1, z0, [], max_iter)
    y = z[:m]
    tol = _row_tol(G, h, y)
    if (G @ y - h > tol).any():
        return None, it1
    # warm working set: original rows active at the phase-1 point, kept independent
    working: list[int] = []
    basis = E.copy()
    for i in sorted(j for j in W1 if j < G.shape[0]):
        if abs(G[i] @ y - h[i]) > tol[i]:
            continue
        cand = np.vstack([basis, G[i]])
        if np.linalg.matrix_rank(cand) == cand.shape[0]:
            basis = cand
            working.append(i)
    y, _, it2 = _active_set(B, d, E, e, G, h, y, working, max_iter)
    return y, it1 + it2


# ---------------------------------------------------------------- verification

def kkt_residuals(qp: QuadraticProgram, x: np.ndarray, active_tol: float = 1e-6) -> dict[str, float]:
    """First-order optimality residuals computed directly from the problem data.

    Multipliers are recovered by non-negative least squares over the active
    constraints, independently of the solver. Stationarity is reported relative
    to ``max(1, |grad f|_inf)``.
    """
    n = qp.n
    grad = np.zeros(n)
    for v, w in qp.objective.items():
        grad[v] = 2.0 * w * x[v]
    primal = 0.0
    eq_cols = []
    cols = []
    acts = []
    for con in qp.constraints:
        row = np.zeros(n)
        for co, v in con.terms:
            row[v] += co
        val = row @ x
        if con.relation == "=":
            primal = max(primal, abs(val - con.rhs))
            eq_cols += [row, -row]
            continue
        if con.relation == ">=":
            row, rhs = -row, -con.rhs
            val = -val
        else:
            rhs = con.rhs
        primal = max(primal, val - rhs)
        if val >= rhs - active_tol * max(1.0, abs(rhs)):
            cols.append(row)
            acts.append(rhs - val)
    scale = max(1.0, float(np.max(np.abs(grad))) if n else 1.0)
    cols = eq_cols + cols
    if cols:
        M = np.array(cols).T
        lam, _ = nnls(M, -grad, maxiter=50 * M.shape[1] + 100)
        stat = float(np.max(np.abs(grad + M @ lam))) / scale
        comp = max((abs(l * s) for l, s in zip(lam[len(eq_cols):], acts)), default=0.0)
    else:
        stat = float(np.max(np.abs(grad))) / scale if n else 0.0
        comp = 0.0
    return {"primal": max(primal, 0.0), "stationarity": stat, "complementarity": comp}


def size_penalty(w: float, h: float, spec: SizeSpec, minmax_weight: float = W_MINMAX) -> float:
    """Weighted squared deviation from the preferred size plus min/max violation terms."""
    dev = (w - spec.pref_w) ** 2 + (h - spec.pref_h) ** 2
    viol = (max(0.0, spec.min_w - w) ** 2 + max(0.0, w - spec.max_w) ** 2
            + max(0.0, spec.min_h - h) ** 2 + max(0.0, h - spec.max_h) ** 2)
    return spec.weight * (dev + minmax_weight * viol)


def evaluate_loss(rects: Mapping[str, Sequence[float]], specs: Mapping[str, SizeSpec],
                  omitted: Iterable[str] = (), omega: float = OMEGA,
                  minmax_weight: float = W_MINMAX) -> float:
    """Layout loss from final geometry.

    ``rects`` maps widget name to ``(left, top, width, height)``; every widget
    in ``specs`` must either have a rect or be listed in ``omitted``.
    """
    omitted = set(omitted)
    total = 0.0
    for name, spec in specs.items():
        if name in omitted:
            total += spec.priority * omega
            continue
        r = rects[name]
        total += size_penalty(r[2], r[3], spec, minmax_weight)
    return total
