"""Solver bridge for SDPA sparse exports of routed-Bell moment problems."""

__version__ = "0.1.0"

from .bisection import BisectionOutcome, bisection_csv, load_plan, run_bisection, run_plan_to_row
from .sdpa import SdpaProblem, parse_sdpa_file
from .solver import DEFAULT_TOLERANCE, SolveResult, presolve, solve_file
