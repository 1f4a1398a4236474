"""Solver for GUI layouts with OR-constraints (flows, pivots, alternative positions)."""

from .bench import BenchReport, bench
from .engine import InfeasibleLayout, SolveConfig, SolvedLayout, Viewport, check_geometry, solve
from .flow import FlowAssignment, FlowInstance, balanced_flow, connected_flow, flow_around_fixed, greedy_flow
from .notation import AltPosition, Hole, LayoutNode, ParseError, SizeSpec, container, parse, serialize, validate, widget
from .qp import ConstraintSystem, evaluate_loss, kkt_residuals, lower_soft, solve_qp
from .render import emit_json, render_svg
from .strategies import STRATEGIES, gen_random_layout, solve_pure_bnb, solve_qp_for_flows

__version__ = "0.1.0"

__all__ = [
    "AltPosition", "BenchReport", "ConstraintSystem", "FlowAssignment", "FlowInstance", "Hole",
    "InfeasibleLayout", "LayoutNode", "ParseError", "STRATEGIES", "SizeSpec", "SolveConfig", "SolvedLayout",
    "Viewport", "balanced_flow", "bench", "check_geometry", "connected_flow", "container", "emit_json",
    "evaluate_loss", "flow_around_fixed", "gen_random_layout", "greedy_flow", "kkt_residuals", "lower_soft",
    "parse", "render_svg", "serialize", "solve", "solve_pure_bnb", "solve_qp", "solve_qp_for_flows",
    "validate", "widget",
]
