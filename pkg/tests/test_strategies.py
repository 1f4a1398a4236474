import numpy as np
import pytest

from oracles import best_flow
from orclayout import STRATEGIES, SolveConfig, Viewport, check_geometry, gen_random_layout, solve
from orclayout.notation import container, serialize, widget
from orclayout.strategies import PATTERNS, GuardExceeded, random_viewport, solve_pure_bnb, solve_qp_for_flows


def _uniform_hf(n, w=100, h=50):
    return container("HF", *(widget(f"w{i}", pref_w=w, pref_h=h) for i in range(n)))


def test_pure_bnb_four_uniform_widgets():
    s = solve_pure_bnb(_uniform_hf(4), Viewport(250, 100))
    assert s.loss == pytest.approx(2500.0, abs=1e-6)
    assert check_geometry(s) == []


@pytest.mark.parametrize("seed", range(4))
def test_pure_bnb_matches_exhaustive_oracle(seed):
    root = gen_random_layout("simple-flow", 5, seed)
    vp = random_viewport(root, seed)
    specs = [w.size for w in root.widgets()]
    ref, _ = best_flow(specs, vp.width, cross_limit=vp.height)
    assert solve_pure_bnb(root, vp).loss == pytest.approx(ref, rel=1e-5, abs=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_pure_bnb_never_worse_than_orcsolver(seed):
    root = gen_random_layout("simple-flow", 7, seed)
    vp = random_viewport(root, seed)
    assert solve_pure_bnb(root, vp).loss <= solve(root, vp).loss * (1 + 1e-9) + 1e-6


@pytest.mark.parametrize("pattern", PATTERNS)
def test_relaxed_leaf_dominates(pattern):
    for seed in range(3):
        root = gen_random_layout(pattern, 8, seed)
        vp = random_viewport(root, seed)
        relaxed = solve_qp_for_flows(root, vp)
        assert relaxed.loss <= solve(root, vp).loss + 1e-6
        assert check_geometry(relaxed) == []


def test_generator_is_deterministic_and_seed_sensitive():
    for pattern in PATTERNS:
        a = serialize(gen_random_layout(pattern, 10, 4))
        assert a == serialize(gen_random_layout(pattern, 10, 4))
        assert a != serialize(gen_random_layout(pattern, 10, 5))
    assert random_viewport(gen_random_layout("simple-flow", 10, 1), 1) == \
        random_viewport(gen_random_layout("simple-flow", 10, 1), 1)


def test_generator_sizes_and_optional_share():
    opt = total = 0
    for seed in range(40):
        root = gen_random_layout("optional-widgets", 20, seed)
        for w in root.widgets():
            s = w.size
            assert 40 <= s.pref_w <= 160 and 20 <= s.pref_h <= 60
            assert s.min_w == pytest.approx(s.pref_w / 2, abs=0.01)
            assert s.max_w == pytest.approx(1.5 * s.pref_w, abs=0.01)
            opt += s.optional
            total += 1
    assert 0.25 <= opt / total <= 0.35


@pytest.mark.parametrize("pattern", PATTERNS)
def test_generator_widget_count(pattern):
    assert sum(1 for _ in gen_random_layout(pattern, 9, 0).widgets()) == 9


def test_generator_rejects_bad_input():
    with pytest.raises(ValueError):
        gen_random_layout("nope", 5, 0)
    with pytest.raises(ValueError):
        gen_random_layout("simple-flow", 0, 0)


def test_pure_bnb_guard():
    with pytest.raises(GuardExceeded):
        solve_pure_bnb(gen_random_layout("simple-flow", 30, 0), Viewport(800, 800))


def test_strategy_table():
    assert set(STRATEGIES) == {"orcsolver", "pure-bnb", "qp-for-flows"}
    root = gen_random_layout("balanced-flow", 6, 2)
    vp = random_viewport(root, 2)
    losses = {k: f(root, vp, SolveConfig()).loss for k, f in STRATEGIES.items()}
    assert all(np.isfinite(v) for v in losses.values())
