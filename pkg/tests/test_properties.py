import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from orclayout import SolveConfig, check_geometry, gen_random_layout, parse, serialize, solve
from orclayout.flow import EmptyRow, FlowInstance, balanced_factors, greedy_flow, row_range
from orclayout.notation import SizeSpec, container, widget
from orclayout.strategies import PATTERNS, random_viewport, solve_qp_for_flows

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

size_st = st.builds(
    lambda pw, ph, lo, hi, wt: SizeSpec(round(pw * lo, 2), pw, round(pw * hi, 2), round(ph * lo, 2), ph,
                                        round(ph * hi, 2), wt),
    st.integers(20, 200).map(float), st.integers(10, 80).map(float), st.floats(0.3, 1.0), st.floats(1.0, 2.0),
    st.sampled_from([1.0, 2.0, 0.5]))


@st.composite
def flow_case(draw):
    specs = tuple(draw(st.lists(size_st, min_size=1, max_size=40)))
    rw = draw(st.floats(max(s.min_w for s in specs), 1500.0))
    lo, pref, hi = row_range(specs, rw)
    rows = draw(st.integers(lo, hi))
    try:
        greedy_flow(FlowInstance(specs, rw, rows))
    except EmptyRow:
        assume(False)
    return specs, rw, rows


@SETTINGS
@given(flow_case())
def test_rows_fill_exactly_and_keep_order(case):
    specs, rw, rows = case
    fa = greedy_flow(FlowInstance(specs, rw, rows))
    flat = [i for a, b in fa.rows for i in range(a, b + 1)]
    assert flat == list(range(len(specs)))
    for a, b in fa.rows:
        assert abs(fa.widths[a:b + 1].sum() - rw) <= 1e-9 * rw
        assert np.ptp(fa.heights[a:b + 1]) == 0
        np.testing.assert_allclose(np.diff(fa.x[a:b + 1]), fa.widths[a:b])
    assert np.isfinite(fa.loss) and fa.loss >= 0


@SETTINGS
@given(flow_case())
def test_greedy_work_is_linear(case):
    specs, rw, rows = case
    fa = greedy_flow(FlowInstance(specs, rw, rows))
    assert fa.steps <= 4 * len(specs) + rows


@SETTINGS
@given(st.lists(size_st, min_size=1, max_size=30), st.floats(100, 1500))
def test_row_range_is_ordered(specs, rw):
    assume(max(s.min_w for s in specs) <= rw)
    lo, pref, hi = row_range(specs, rw)
    assert 1 <= hi <= pref <= lo <= len(specs) or 1 <= lo <= pref <= hi <= len(specs)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5000))
def test_balanced_factors_are_divisors(n):
    f = balanced_factors(n)
    assert f == sorted(set(f)) and f[0] == 1 and f[-1] == n
    assert all(n % d == 0 for d in f)
    assert len(f) == sum(1 for d in range(1, n + 1) if n % d == 0)


def _tree(draw_shape, counter):
    if not isinstance(draw_shape[0], str):
        size = draw_shape
        return widget(f"w{next(counter)}", min_w=size[0], pref_w=size[1], max_w=size[2], pref_h=size[3])
    kind, kids = draw_shape
    if kind in ("HF", "VF"):
        return container(kind, *(widget(f"w{next(counter)}") for _ in kids))
    return container(kind, *(_tree(k, counter) for k in kids))


leaf_st = st.tuples(st.integers(0, 50).map(float), st.integers(50, 200).map(float),
                    st.integers(200, 400).map(float), st.integers(10, 60).map(float))
shape_st = st.recursive(leaf_st, lambda inner: st.tuples(st.sampled_from(["Row", "Column", "HF", "VF"]),
                                                         st.lists(inner, min_size=1, max_size=4)), max_leaves=12)


@SETTINGS
@given(shape_st)
def test_serialize_parse_round_trip(shape):
    root = _tree(shape, itertools.count())
    if root.kind == "Widget":
        root = container("Row", root)
    assert parse(serialize(root)) == root


_CASES = [(p, n, s) for p in PATTERNS for n in (4, 6) for s in range(4)]


@pytest.mark.parametrize("pattern,n,seed", _CASES[::2])
def test_pruning_is_safe_on_random_layouts(pattern, n, seed):
    root = gen_random_layout(pattern, n, seed)
    vp = random_viewport(root, seed)
    on = solve(root, vp)
    off = solve(root, vp, SolveConfig(pruning=False))
    assert on.loss == pytest.approx(off.loss, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("pattern,n,seed", _CASES[1::2])
def test_solutions_are_sound_and_dominated(pattern, n, seed):
    root = gen_random_layout(pattern, n, seed)
    vp = random_viewport(root, seed)
    s = solve(root, vp)
    assert check_geometry(s) == []
    assert solve_qp_for_flows(root, vp).loss <= s.loss + 1e-6


@pytest.mark.parametrize("seed", range(6))
def test_gradient_walk_is_contiguous(seed):
    root = gen_random_layout("simple-flow", 14, seed)
    s = solve(root, random_viewport(root, seed), SolveConfig(pruning=False))
    values = [t.choice for t in s.trace]
    start = values[0]
    down = [v for v in values if v <= start]
    up = [v for v in values if v > start]
    assert down == list(range(start, start - len(down), -1))
    assert up == list(range(start + 1, start + 1 + len(up)))
    # walking on past a non-improving step never happens
    for seq in (s.trace[:len(down)], s.trace[len(down):]):
        assert all(t.improved for t in seq[:-1][1:]) or len(seq) <= 2
