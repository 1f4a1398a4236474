import os
import subprocess
import sys

import numpy as np
import pytest

from oracles import row_oracle
from orclayout import _kernels as K
from orclayout.notation import SizeSpec


def _arrays(specs):
    f = lambda attr: np.array([getattr(s, attr) for s in specs], dtype=float)  # noqa: E731
    return (f("pref_w"), f("pref_h"), f("min_w"), f("max_w"), f("min_h"), f("max_h"), f("weight"))


def _random_specs(rng, n):
    out = []
    for _ in range(n):
        pw, ph = rng.uniform(40, 160), rng.uniform(20, 60)
        out.append(SizeSpec(pw / 2, pw, 1.5 * pw, ph / 2, ph, 1.5 * ph, float(rng.choice([1.0, 2.0]))))
    return out


@pytest.mark.parametrize("seed", range(6))
def test_compiled_and_pure_agree(seed):
    rng = np.random.default_rng(seed)
    specs = _random_specs(rng, 30)
    pm, pc, lo_m, hi_m, lo_c, hi_c, wt = _arrays(specs)
    rw = 500.0
    rows = K.PY.first_fit_rows(pm, rw)
    assert K.first_fit_rows(pm, rw) == rows
    assert K.prefix_in_rows(pm, rw, 2) == K.PY.prefix_in_rows(pm, rw, 2)
    e1, s1, n1 = K.greedy_breaks(pm, rw, rows, False)
    e2, s2, n2 = K.PY.greedy_breaks(pm, rw, rows, False)
    assert (s1, n1) == (s2, n2) and np.array_equal(e1, e2)
    for uniform in (False, True):
        args = (pm, pc, lo_m, hi_m, lo_c, hi_c, wt, e1, np.full(rows, rw), False, uniform, 1e6)
        a, b = K.fill_rows(*args), K.PY.fill_rows(*args)
        np.testing.assert_allclose(a[0], b[0], rtol=1e-12, atol=1e-9)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("seed", range(8))
def test_row_fit_matches_reference_solver(seed):
    rng = np.random.default_rng(100 + seed)
    specs = _random_specs(rng, int(rng.integers(1, 6)))
    pm, pc, lo_m, hi_m, lo_c, hi_c, wt = _arrays(specs)
    rw = float(rng.uniform(0.4, 1.8) * pm.sum())
    main = np.empty(len(specs))
    K.fit_sum(pm, lo_m, hi_m, wt, rw, 1e6, main)
    h = K.fit_common(pc, lo_c, hi_c, wt, 1e6)
    loss = K.size_loss(main, np.full(len(specs), h), lo_m, pm, hi_m, lo_c, pc, hi_c, wt, 1e6)
    ref_main, ref_h, ref_loss = row_oracle(specs, rw)
    assert main.sum() == pytest.approx(rw, rel=1e-12)
    assert loss == pytest.approx(ref_loss, rel=1e-6, abs=1e-6)
    np.testing.assert_allclose(main, ref_main, rtol=1e-4, atol=1e-3)

    def cross_obj(v):  # the shared cross size solves its own 1-D problem
        return float(np.sum(wt * ((v - pc) ** 2 + 1e6 * (np.maximum(0, lo_c - v) ** 2 + np.maximum(0, v - hi_c) ** 2))))
    assert cross_obj(h) <= cross_obj(ref_h) * (1 + 1e-12) + 1e-9
    grid = np.linspace(h - 1, h + 1, 201)
    assert cross_obj(h) <= min(cross_obj(v) for v in grid) * (1 + 1e-12) + 1e-9


def test_env_flag_selects_pure_path():
    code = "from orclayout import _kernels as K; print(K.USE_NUMBA, K.first_fit_rows is K.PY.first_fit_rows or " \
           "type(K.first_fit_rows).__name__)"
    env = dict(os.environ, ORC_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split()[0] == "False"
    assert "CPUDispatcher" not in out.stdout
