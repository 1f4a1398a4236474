"""Timing harness comparing solving strategies on generated layouts."""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .engine import SolveConfig
from .strategies import PATTERNS, PURE_BNB_GUARD, STRATEGIES, GuardExceeded, gen_random_layout, random_viewport

COLUMNS = ("pattern", "widgets", "strategy", "mean_s", "std_s", "loss", "skipped")
SKIPPED = "skipped (exponential)"
GENERATOR_NOTE = ("generator ranges are invented: pref width U(40,160), pref height U(20,60), "
                  "min 0.5*pref, max 1.5*pref, weight 1; viewport width 30-60% of summed pref widths")


@dataclass
class BenchCell:
    pattern: str
    widgets: int
    strategy: str
    mean_s: Optional[float]
    std_s: Optional[float]
    loss: Optional[float]
    skipped: str = ""
    times: list[float] = field(default_factory=list, repr=False)
    losses: list[float] = field(default_factory=list, repr=False)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in COLUMNS}


@dataclass
class BenchReport:
    seed: int
    runs: int
    config: dict
    cells: list[BenchCell] = field(default_factory=list)

    def header(self) -> str:
        cfg = ", ".join(f"{k}={v}" for k, v in self.config.items())
        return f"# seed={self.seed} runs={self.runs} {cfg}; {GENERATOR_NOTE}"

    def cell(self, pattern: str, widgets: int, strategy: str) -> BenchCell:
        for c in self.cells:
            if (c.pattern, c.widgets, c.strategy) == (pattern, widgets, strategy):
                return c
        raise KeyError((pattern, widgets, strategy))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.header() + "\n")
        w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        for c in self.cells:
            w.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v))
                        for k, v in c.row().items()})
        return buf.getvalue()

    def to_json(self) -> str:
        body = {"comment": self.header()[2:], "seed": self.seed, "runs": self.runs,
                "config": self.config, "rows": [c.row() for c in self.cells]}
        return json.dumps(body, indent=2) + "\n"


def instance_seeds(seed: int, pattern: str, n: int, runs: int) -> list[int]:
    """Per-run instance seeds; every strategy in a cell sees the same instances."""
    ss = np.random.SeedSequence([seed, PATTERNS.index(pattern), n])
    return [int(s.generate_state(1)[0]) for s in ss.spawn(runs)]


def bench(patterns: Sequence[str], counts: Sequence[int], strategies: Sequence[str], runs: int = 10,
          seed: int = 0, config: Optional[SolveConfig] = None, guard: int = PURE_BNB_GUARD) -> BenchReport:
    """Mean and spread of solve wall time per (pattern, widget count, strategy).

    Only the solve call is timed; generation happens beforehand.
    """
    config = config or SolveConfig()
    cfg = {"omega": config.omega, "minmax_weight": config.minmax_weight,
           "max_residual_or": config.max_residual_or, "guard": guard}
    report = BenchReport(seed, runs, cfg)
    for name in strategies:
        if name not in STRATEGIES:
            raise ValueError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
    # one untimed solve per strategy and pattern so compilation and caches stay out of the first cell
    for pattern in patterns:
        warm = gen_random_layout(pattern, 4, seed)
        for name in strategies:
            STRATEGIES[name](warm, random_viewport(warm, seed), config)
    for pattern in patterns:
        for n in counts:
            seeds = instance_seeds(seed, pattern, n, runs)
            instances = [(root, random_viewport(root, s)) for s in seeds
                         for root in [gen_random_layout(pattern, n, s)]]
            for name in strategies:
                report.cells.append(_run_cell(pattern, n, name, instances, config, guard))
    return report


def _run_cell(pattern, n, name, instances, config, guard) -> BenchCell:
    fn = STRATEGIES[name]
    kw = {"guard": guard} if name == "pure-bnb" else {}
    times, losses = [], []
    for root, vp in instances:
        t0 = time.perf_counter()
        try:
            sol = fn(root, vp, config, **kw)
        except GuardExceeded:
            return BenchCell(pattern, n, name, None, None, None, SKIPPED)
        times.append(time.perf_counter() - t0)
        losses.append(sol.loss)
    if not times:
        return BenchCell(pattern, n, name, None, None, None)
    std = statistics.stdev(times) if len(times) > 1 else 0.0
    return BenchCell(pattern, n, name, statistics.fmean(times), std, statistics.fmean(losses), "",
                     times, losses)


def loglog_slope(counts: Iterable[float], times: Iterable[float]) -> float:
    """Least-squares slope of log(time) against log(count)."""
    x = np.log(np.asarray(list(counts), dtype=float))
    y = np.log(np.asarray(list(times), dtype=float))
    return float(np.polyfit(x, y, 1)[0])
