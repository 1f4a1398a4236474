"""``orc`` command line: solve, validate and bench."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from .bench import bench
from .engine import InfeasibleLayout, SolveConfig, Viewport
from .notation import ParseError, parse, validate
from .qp import OMEGA, W_MINMAX
from .render import emit_json, render_svg
from .strategies import PATTERNS, STRATEGIES

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("orclayout")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for infeasible layouts here
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _size(text: str) -> Viewport:
    try:
        w, h = text.lower().split("x")
        vp = Viewport(float(w), float(h))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    if vp.width <= 0 or vp.height <= 0:
        raise argparse.ArgumentTypeError(f"viewport must be positive, got {text!r}")
    return vp


def _csv(kind):
    def conv(text: str):
        return [kind(t) for t in text.split(",") if t.strip()]
    return conv


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="orc", description="Solve OR-constrained GUI layouts.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve a layout file at one or more viewport sizes")
    s.add_argument("input", type=Path)
    s.add_argument("--size", type=_size, action="append", required=True, metavar="WxH",
                   help="viewport size; repeat for several")
    s.add_argument("--strategy", choices=sorted(STRATEGIES), default="orcsolver")
    s.add_argument("--format", choices=("json", "svg", "both"), default="json")
    s.add_argument("--out", type=Path, default=Path("."), metavar="DIR")
    s.add_argument("--omega", type=float, default=OMEGA, help="penalty per unit priority of an omitted widget")
    s.add_argument("--minmax-weight", type=float, default=W_MINMAX)
    s.add_argument("--max-residual-or", type=int, default=8)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--trace", type=Path, default=None, metavar="PATH", help="write search trace as JSON lines")
    s.add_argument("--compat-alg1-literal", action="store_true",
                   help="count only rows after the current one when spreading slack")
    s.add_argument("--uniform-fill", action="store_true",
                   help="spread row slack evenly instead of minimising the loss")
    s.add_argument("--dump-qp", action="store_true", help="also write the final QP as text")
    s.add_argument("--timing", action="store_true", help="record solve time in the JSON (not reproducible)")

    v = sub.add_parser("validate", help="check a layout file")
    v.add_argument("input", type=Path)

    b = sub.add_parser("bench", help="time strategies on generated layouts")
    b.add_argument("--patterns", type=_csv(str), required=True, help=f"comma list from {', '.join(PATTERNS)}")
    b.add_argument("--counts", type=_csv(int), required=True)
    b.add_argument("--strategies", type=_csv(str), required=True)
    b.add_argument("--runs", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", type=Path, default=Path("."), metavar="DIR")
    return p


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _tag(vp: Viewport) -> str:
    return f"{vp.width:g}x{vp.height:g}"


def _load(path: Path):
    root = parse(path.read_text(encoding="utf-8"))
    return root, validate(root)


def _cmd_validate(args) -> int:
    _, diags = _load(args.input)
    for d in diags:
        print(f"{args.input}:{d}", file=sys.stderr)
    return EXIT_INVALID if diags else EXIT_OK


def _cmd_solve(args) -> int:
    root, diags = _load(args.input)
    if diags:
        for d in diags:
            print(f"{args.input}:{d}", file=sys.stderr)
        return EXIT_INVALID
    cfg = SolveConfig(omega=args.omega, minmax_weight=args.minmax_weight, max_residual_or=args.max_residual_or,
                      literal_alg1=args.compat_alg1_literal, uniform_fill=args.uniform_fill,
                      keep_qp=args.dump_qp, seed=args.seed)
    strategy = STRATEGIES[args.strategy]
    stem = args.input.stem
    trace_lines = []
    for vp in args.size:
        try:
            sol = strategy(root, vp, cfg)
        except InfeasibleLayout as exc:
            print(f"{args.input}: {_tag(vp)}: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        base = args.out / f"{stem}_{_tag(vp)}"
        if args.format in ("json", "both"):
            write_atomic(base.with_suffix(".json"), emit_json(sol, include_time=args.timing))
        if args.format in ("svg", "both"):
            write_atomic(base.with_suffix(".svg"), render_svg(sol, vp))
        if args.dump_qp and sol.qp is not None:
            write_atomic(base.with_suffix(".qp.txt"), sol.qp.dump())
        log.info("%s %s: loss %.6g, %d nodes", stem, _tag(vp), sol.loss, sol.stats.nodes)
        for e in sol.trace:
            trace_lines.append(json.dumps({"viewport": _tag(vp), **dataclasses.asdict(e)}))
    if args.trace is not None:
        write_atomic(args.trace, "".join(line + "\n" for line in trace_lines))
    return EXIT_OK


def _cmd_bench(args) -> int:
    unknown = [p for p in args.patterns if p not in PATTERNS] + [s for s in args.strategies if s not in STRATEGIES]
    if unknown:
        print(f"orc bench: unknown pattern or strategy: {', '.join(unknown)}", file=sys.stderr)
        return EXIT_INVALID
    report = bench(args.patterns, args.counts, args.strategies, runs=args.runs, seed=args.seed)
    write_atomic(args.out / "bench.csv", report.to_csv())
    write_atomic(args.out / "bench.json", report.to_json())
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("ORC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return {"solve": _cmd_solve, "validate": _cmd_validate, "bench": _cmd_bench}[args.command](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except ParseError as exc:
        print(f"{getattr(args, 'input', '')}:{exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ValueError) as exc:
        print(f"orc: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - reported as internal failure
        log.debug("internal failure", exc_info=True)
        print(f"orc: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
