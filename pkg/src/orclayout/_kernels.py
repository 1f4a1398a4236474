"""Hot loops of the flow heuristics.

Each kernel is written once as plain Python over numpy arrays. When numba is
importable and ``ORC_NUMBA`` is not ``0`` the module-level names are compiled
with ``numba.njit``; ``PY`` always holds uncompiled copies so both paths can
be compared (see ``benchmarks/kernel_bench.py``).
"""

import os
import types

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("ORC_NUMBA", "1").lower() not in ("0", "false", "off")


def first_fit_rows(sizes, row_width):
    """Rows used when packing ``sizes`` left to right, breaking before overflow."""
    rows = 0
    used = 0.0
    for i in range(sizes.shape[0]):
        s = sizes[i]
        if rows == 0 or used + s > row_width * (1.0 + 1e-12):
            rows += 1
            used = s
        else:
            used += s
    return rows


def prefix_in_rows(sizes, row_width, num_rows):
    """How many leading items first-fit packing places into ``num_rows`` rows."""
    rows = 0
    used = 0.0
    for i in range(sizes.shape[0]):
        s = sizes[i]
        if rows == 0 or used + s > row_width * (1.0 + 1e-12):
            rows += 1
            if rows > num_rows:
                return i
            used = s
        else:
            used += s
    return sizes.shape[0]


def greedy_breaks(pref, row_width, num_rows, literal):
    """Row ends (inclusive) from the greedy flow pass.

    Returns ``(ends, status, steps)``; status is 0 on success or the 1-based
    index of the first row that came out empty. The last row takes every
    remaining item. ``steps`` counts inner-loop iterations.
    """
    n = pref.shape[0]
    ends = np.full(num_rows, -1, dtype=np.int64)
    steps = 0
    remaining = 0.0
    for j in range(n):
        remaining += pref[j]
        steps += 1
    i = 0
    for r in range(1, num_rows + 1):
        steps += 1
        start = i
        if start >= n:
            return ends, r, steps
        if literal:
            total_avail = (num_rows - r) * row_width
        else:
            total_avail = (num_rows - r + 1) * row_width
        delta = (total_avail - remaining) / (n - start)
        if r == num_rows:
            i = n
        else:
            row_avail = row_width
            while i < n and abs(row_avail - (pref[i] + delta)) < abs(row_avail):
                row_avail -= pref[i] + delta
                i += 1
                steps += 1
        if i == start:
            return ends, r, steps
        for j in range(start, i):
            remaining -= pref[j]
            steps += 1
        ends[r - 1] = i - 1
    return ends, 0, steps


def _piece_sum(lam, p, lo, hi, wt, w_mm):
    """Slope and intercept of sum_i x_i(lam) on the linear piece containing ``lam``."""
    a = 0.0
    c = 0.0
    for i in range(p.shape[0]):
        mu_coef = 1.0 / (2.0 * wt[i])
        v = p[i] + lam * mu_coef
        if v > hi[i]:
            a += mu_coef / (1.0 + w_mm)
            c += (p[i] + w_mm * hi[i]) / (1.0 + w_mm)
        elif v < lo[i]:
            a += mu_coef / (1.0 + w_mm)
            c += (p[i] + w_mm * lo[i]) / (1.0 + w_mm)
        else:
            a += mu_coef
            c += p[i]
    return a, c


def fit_sum(p, lo, hi, wt, total, w_mm, out):
    """Sizes minimising sum wt*((x-p)^2 + w_mm*violation^2) subject to sum x = total."""
    k = p.shape[0]
    bps = np.empty(2 * k)
    for i in range(k):
        bps[2 * i] = 2.0 * wt[i] * (lo[i] - p[i])
        bps[2 * i + 1] = 2.0 * wt[i] * (hi[i] - p[i])
    bps.sort()
    j = 0
    while j < 2 * k:
        a, c = _piece_sum(bps[j], p, lo, hi, wt, w_mm)
        if a * bps[j] + c >= total:
            break
        j += 1
    if j == 0:
        mid = bps[0] - 1.0
    elif j == 2 * k:
        mid = bps[2 * k - 1] + 1.0
    else:
        mid = 0.5 * (bps[j - 1] + bps[j])
    a, c = _piece_sum(mid, p, lo, hi, wt, w_mm)
    lam = (total - c) / a
    for i in range(k):
        mu = lam / (2.0 * wt[i])
        v = p[i] + mu
        if v > hi[i]:
            v = (mu + p[i] + w_mm * hi[i]) / (1.0 + w_mm)
        elif v < lo[i]:
            v = (mu + p[i] + w_mm * lo[i]) / (1.0 + w_mm)
        out[i] = v
    # exact row sum despite rounding
    drift = total
    for i in range(k):
        drift -= out[i]
    out[k - 1] += drift


def _piece_common(h, q, lo, hi, wt, w_mm):
    a = 0.0
    c = 0.0
    for i in range(q.shape[0]):
        a += wt[i]
        c += wt[i] * q[i]
        if h > hi[i]:
            a += w_mm * wt[i]
            c += w_mm * wt[i] * hi[i]
        elif h < lo[i]:
            a += w_mm * wt[i]
            c += w_mm * wt[i] * lo[i]
    return a, c


def fit_common(q, lo, hi, wt, w_mm):
    """Single size minimising sum wt*((h-q)^2 + w_mm*violation^2)."""
    k = q.shape[0]
    bps = np.empty(2 * k)
    for i in range(k):
        bps[2 * i] = lo[i]
        bps[2 * i + 1] = hi[i]
    bps.sort()
    j = 0
    while j < 2 * k:
        a, c = _piece_common(bps[j], q, lo, hi, wt, w_mm)
        if a * bps[j] - c >= 0.0:
            break
        j += 1
    if j == 0:
        mid = bps[0] - 1.0
    elif j == 2 * k:
        mid = bps[2 * k - 1] + 1.0
    else:
        mid = 0.5 * (bps[j - 1] + bps[j])
    a, c = _piece_common(mid, q, lo, hi, wt, w_mm)
    return c / a


def fill_rows(pref_m, pref_c, min_m, max_m, min_c, max_c, weight, ends, row_widths,
              ragged_last, uniform, w_mm):
    """Sizes for given row breaks: each row spans its width and shares one cross size.

    ``uniform`` spreads each row's leftover evenly and uses the mean preferred
    cross size. Otherwise sizes minimise the weighted loss including min/max
    penalties, which coincides with the even spread whenever no bound binds
    and weights are equal.
    """
    n = pref_m.shape[0]
    main = np.empty(n)
    cross = np.empty(n)
    start = 0
    nrows = ends.shape[0]
    for r in range(nrows):
        end = ends[r]
        count = end - start + 1
        total = 0.0
        total_c = 0.0
        for j in range(start, end + 1):
            total += pref_m[j]
            total_c += pref_c[j]
        ragged = ragged_last and r == nrows - 1 and row_widths[r] > total
        if ragged:
            for j in range(start, end + 1):
                main[j] = pref_m[j]
        elif uniform:
            d_row = (row_widths[r] - total) / count
            for j in range(start, end + 1):
                main[j] = pref_m[j] + d_row
        else:
            fit_sum(pref_m[start:end + 1], min_m[start:end + 1], max_m[start:end + 1],
                    weight[start:end + 1], row_widths[r], w_mm, main[start:end + 1])
        if uniform:
            h = total_c / count
        else:
            h = fit_common(pref_c[start:end + 1], min_c[start:end + 1], max_c[start:end + 1],
                           weight[start:end + 1], w_mm)
        for j in range(start, end + 1):
            cross[j] = h
        start = end + 1
    return main, cross


def size_loss(w, h, min_w, pref_w, max_w, min_h, pref_h, max_h, weight, mm_weight):
    """Sum of weighted squared deviations from preferred sizes plus min/max violation terms."""
    total = 0.0
    for i in range(w.shape[0]):
        dev = (w[i] - pref_w[i]) ** 2 + (h[i] - pref_h[i]) ** 2
        viol = (max(0.0, min_w[i] - w[i]) ** 2 + max(0.0, w[i] - max_w[i]) ** 2
                + max(0.0, min_h[i] - h[i]) ** 2 + max(0.0, h[i] - max_h[i]) ** 2)
        total += weight[i] * (dev + mm_weight * viol)
    return total


_KERNELS = ("_piece_sum", "_piece_common", "fit_sum", "fit_common", "first_fit_rows",
            "prefix_in_rows", "greedy_breaks", "fill_rows", "size_loss")


def _pure_copies() -> types.SimpleNamespace:
    # same code objects, but globals that resolve to the uncompiled functions
    ns = dict(globals())
    funcs = {name: types.FunctionType(globals()[name].__code__, ns, name) for name in _KERNELS}
    ns.update(funcs)
    return types.SimpleNamespace(**funcs)


PY = _pure_copies()

if USE_NUMBA:
    for _name in _KERNELS:
        globals()[_name] = numba.njit(cache=True)(globals()[_name])


def warmup() -> None:
    """Trigger compilation so the first timed call does not pay for it."""
    a = np.array([1.0, 2.0])
    first_fit_rows(a, 3.0)
    prefix_in_rows(a, 3.0, 1)
    ends, _, _ = greedy_breaks(a, 3.0, 1, False)
    for uniform in (False, True):
        fill_rows(a, a, a, a, a, a, a, ends, np.array([3.0]), False, uniform, 1e6)
    size_loss(a, a, a, a, a, a, a, a, a, 1.0)
