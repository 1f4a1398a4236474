import numpy as np
import pytest

from oracles import best_around, best_flow, row_oracle
from orclayout import gen_random_layout
from orclayout.flow import (EmptyRow, FlowInfeasible, FlowInstance, RowCountOutOfRange, balanced_factors, balanced_flow,
                            connected_flow, flow_around_fixed, greedy_flow, optional_prune, refine_breaks,
                            row_range)
from orclayout.notation import Hole, SizeSpec


def uniform(n, w=100.0, h=50.0, **kw):
    return tuple(SizeSpec(pref_w=w, pref_h=h, **kw) for _ in range(n))


def widths(*ws, h=50.0):
    return tuple(SizeSpec(pref_w=w, pref_h=h) for w in ws)


# ------------------------------------------------------------------ row_range

def test_row_range_min_pref_max():
    specs = uniform(5, min_w=50, max_w=150)
    assert row_range(specs, 300) == (1, 2, 3)


def test_row_range_single_and_full_width():
    assert row_range(uniform(1), 300) == (1, 1, 1)
    assert row_range(uniform(4, w=300), 300)[1] == 4


# ------------------------------------------------------------------ greedy_flow

def test_four_uniform_two_rows():
    fa = greedy_flow(FlowInstance(uniform(4), 250, 2))
    assert fa.rows == [(0, 1), (2, 3)]
    np.testing.assert_allclose(fa.widths, 125.0)
    np.testing.assert_allclose(fa.heights, 50.0)
    assert fa.loss == pytest.approx(2500.0, abs=1e-6)


def test_exact_fit_single_row():
    fa = greedy_flow(FlowInstance(uniform(3), 300, 1))
    assert fa.rows == [(0, 2)]
    np.testing.assert_allclose(fa.widths, 100.0)
    assert fa.loss == pytest.approx(0.0, abs=1e-9)


def test_uneven_widths_two_rows():
    fa = greedy_flow(FlowInstance(widths(120, 80, 100), 150, 2))
    assert fa.rows == [(0, 0), (1, 2)]
    np.testing.assert_allclose(fa.widths, [150, 65, 85])
    assert fa.loss == pytest.approx(30 ** 2 + 15 ** 2 + 15 ** 2, abs=1e-6)


def test_uniform_fill_matches_default_without_binding_bounds():
    inst = FlowInstance(widths(120, 80, 100), 150, 2)
    a, b = greedy_flow(inst), greedy_flow(inst, uniform_fill=True)
    np.testing.assert_allclose(a.widths, b.widths)
    assert a.loss == pytest.approx(b.loss)


def test_literal_line_four_leaves_a_row_empty():
    with pytest.raises(EmptyRow) as err:
        greedy_flow(FlowInstance(uniform(4), 250, 2), literal=True)
    assert err.value.row == 2


def test_row_count_outside_range_rejected():
    with pytest.raises(RowCountOutOfRange):
        greedy_flow(FlowInstance(uniform(3, min_w=50), 300, 5))


def test_bound_aware_fill_beats_even_spread():
    specs = (SizeSpec(min_w=50, pref_w=100, max_w=150, pref_h=30),
             SizeSpec(min_w=20, pref_w=40, max_w=60, pref_h=30))
    even = greedy_flow(FlowInstance(specs, 300, 1), uniform_fill=True)
    exact = greedy_flow(FlowInstance(specs, 300, 1))
    ref = row_oracle(specs, 300)[2]
    assert exact.loss == pytest.approx(ref, rel=1e-6)
    assert exact.loss < even.loss


def test_ragged_last_row_keeps_preferred_widths():
    fa = greedy_flow(FlowInstance(uniform(5), 300, 2), ragged_last=True)
    last = fa.rows[-1]
    np.testing.assert_allclose(fa.widths[last[0]:last[1] + 1], 100.0)


def test_vertical_flow_uses_heights_as_main_axis():
    specs = tuple(SizeSpec(pref_w=50, pref_h=100) for _ in range(4))
    fa = greedy_flow(FlowInstance(specs, 250, 2, horizontal=False))
    np.testing.assert_allclose(fa.heights, 125.0)
    np.testing.assert_allclose(fa.widths, 50.0)
    assert fa.extent == pytest.approx((100.0, 250.0))


def test_uniform_greedy_is_optimal_for_its_row_count():
    specs = uniform(6, min_w=50, max_w=150, min_h=25, max_h=75)
    for r in (2, 3):
        fa = greedy_flow(FlowInstance(specs, 250, r))
        ref, rows = best_flow(specs, 250)
        if len(rows) == r:
            assert fa.loss == pytest.approx(ref, rel=1e-6)


# ------------------------------------------------------------------ connected

def test_connected_splits_after_r_rows():
    fa1, fa2 = connected_flow(uniform(3), uniform(3), 1, 300, 300)
    assert list(fa1.indices) == [0, 1, 2] and list(fa2.indices) == [3, 4, 5]
    assert fa1.loss + fa2.loss == pytest.approx(0.0, abs=1e-9)


def test_connected_zero_rows_sends_everything_on():
    fa1, fa2 = connected_flow(uniform(2), uniform(2), 0, 300, 300)
    assert fa1.num_rows == 0 and list(fa2.indices) == [0, 1, 2, 3]


def test_connected_degenerate_equals_greedy():
    specs = uniform(4)
    pref = row_range(specs, 250)[1]
    fa1, fa2 = connected_flow(specs, (), pref, 250, 250)
    ref = greedy_flow(FlowInstance(specs, 250, pref))
    assert fa1.loss == pytest.approx(ref.loss) and len(fa2.indices) == 0


def test_connected_rejects_bad_r():
    with pytest.raises(RowCountOutOfRange):
        connected_flow(uniform(2), uniform(2), 9, 300, 300)


# ------------------------------------------------------------------ around a fixed area

def test_zero_area_hole_is_plain_greedy():
    specs = uniform(5)
    fa = flow_around_fixed(specs, 300, Hole(10, 10, 0, 0))
    ref = greedy_flow(FlowInstance(specs, 300, row_range(specs, 300)[1]))
    assert fa.loss == pytest.approx(ref.loss)
    np.testing.assert_allclose(fa.widths, ref.widths)


def test_full_height_hole_on_the_right_uses_middle_only():
    specs = uniform(4)
    fa = flow_around_fixed(specs, 300, Hole(200, 0, 100, 200), region_h=200)
    assert np.all(fa.x + fa.widths <= 200 + 1e-9)
    assert np.all(fa.y + fa.heights <= 200 + 1e-9)


@pytest.mark.parametrize("region_h", [175, 200, 250])
def test_uniform_around_centered_block_matches_sweep(region_h):
    specs = uniform(8, min_w=50, max_w=150, min_h=25, max_h=75)
    hole = Hole(100, 50, 200, 100)
    fa = flow_around_fixed(specs, 400, hole, region_h=region_h)
    assert fa.loss == pytest.approx(best_around(specs, 400, region_h, hole), rel=1e-6, abs=1e-6)


def test_widgets_avoid_the_hole():
    rng = np.random.default_rng(5)
    specs = tuple(SizeSpec(min_w=p / 2, pref_w=p, max_w=1.5 * p, min_h=25, pref_h=50, max_h=75)
                  for p in rng.uniform(60, 140, 9))
    hole = Hole(150, 50, 100, 100)
    fa = flow_around_fixed(specs, 400, hole, region_h=400)
    for x, y, w, h in zip(fa.x, fa.y, fa.widths, fa.heights):
        overlap_x = min(x + w, hole.x + hole.w) - max(x, hole.x)
        overlap_y = min(y + h, hole.y + hole.h) - max(y, hole.y)
        assert overlap_x <= 1e-9 or overlap_y <= 1e-9


def test_hole_outside_region_is_an_error():
    with pytest.raises(FlowInfeasible):
        flow_around_fixed(uniform(2), 300, Hole(250, 0, 100, 10))


# ------------------------------------------------------------------ balanced

@pytest.mark.parametrize("n,expected", [(12, [1, 2, 3, 4, 6, 12]), (1, [1]), (7, [1, 7])])
def test_balanced_factors(n, expected):
    assert balanced_factors(n) == expected


def test_balanced_rows_hold_equal_counts():
    fa = balanced_flow(uniform(6), 250, 3)
    assert [b - a + 1 for a, b in fa.rows] == [2, 2, 2]
    with pytest.raises(FlowInfeasible):
        balanced_flow(uniform(6), 250, 4)


# ------------------------------------------------------------------ optional widgets

def _abc(optional_a=True):
    return (SizeSpec(pref_w=100, pref_h=50, optional=optional_a, priority=1), SizeSpec(pref_w=100, pref_h=50),
            SizeSpec(pref_w=100, pref_h=50))


def test_optional_dropped_when_cheaper():
    fa = optional_prune(FlowInstance(_abc(), 200, 1), omega=1000)
    assert fa.omitted == frozenset({0})
    assert fa.loss == pytest.approx(1000.0)


def test_optional_kept_when_penalty_is_high():
    fa = optional_prune(FlowInstance(_abc(), 200, 1), omega=5000)
    assert fa.omitted == frozenset()
    assert fa.loss == pytest.approx(3 * (100 / 3) ** 2)


def test_optional_kept_with_ample_space():
    fa = optional_prune(FlowInstance(_abc(), 300, 1), omega=1000)
    assert fa.omitted == frozenset() and fa.loss == pytest.approx(0.0, abs=1e-9)


def test_optional_tie_removes_later_widget_first():
    specs = (SizeSpec(pref_w=100, pref_h=50, optional=True, priority=1), SizeSpec(pref_w=100, pref_h=50),
             SizeSpec(pref_w=100, pref_h=50, optional=True, priority=1))
    fa = optional_prune(FlowInstance(specs, 200, 1), omega=1000)
    assert fa.omitted == frozenset({2})


# ------------------------------------------------------------------ break refinement

@pytest.mark.parametrize("seed", range(10))
def test_refined_breaks_never_lose_and_stay_exact(seed):
    rng = np.random.default_rng(seed)
    specs = tuple(SizeSpec(min_w=p / 2, pref_w=p, max_w=1.5 * p, min_h=h / 2, pref_h=h, max_h=1.5 * h)
                  for p, h in zip(rng.uniform(40, 160, 8), rng.uniform(20, 60, 8)))
    rw = 300.0
    inst = FlowInstance(specs, rw, row_range(specs, rw)[1])
    base = greedy_flow(inst, check_range=False)
    fa = refine_breaks(inst, base)
    assert fa.loss <= base.loss
    for a, b in fa.rows:
        assert fa.widths[a:b + 1].sum() == pytest.approx(rw, rel=1e-12)
    assert [i for a, b in fa.rows for i in range(a, b + 1)] == list(range(len(specs)))


def test_refinement_fixes_off_by_one_break():
    specs = tuple(w.size for w in gen_random_layout("simple-flow", 7, 1088).widgets())
    inst = FlowInstance(specs, 300.0, 3)
    base = greedy_flow(inst, check_range=False)
    fa = refine_breaks(inst, base)
    ref, rows = best_flow(specs, 300.0)
    assert [b - a + 1 for a, b in base.rows] == [2, 3, 2]
    assert fa.rows == [(a, b - 1) for a, b in rows]
    assert fa.loss == pytest.approx(ref, rel=1e-6) and fa.loss < 0.7 * base.loss


def test_refinement_respects_depth_limit():
    specs = uniform(6, min_w=50, max_w=150, min_h=25, max_h=75)
    inst = FlowInstance(specs, 250, 2)
    base = greedy_flow(inst, check_range=False)
    fa = refine_breaks(inst, base, max_depth=base.extent[1])
    assert fa.extent[1] <= base.extent[1] + 1e-9
