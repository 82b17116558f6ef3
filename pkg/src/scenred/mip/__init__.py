"""Embedded LP / mixed-binary solver with deterministic work accounting."""
from .bnb import solve_mip
from .lp import solve_lp
from .problem import EQ, GE, LE, MipProblem, SolveResult, Status, WorkMetric
from .solver import Solver

__all__ = ["EQ", "GE", "LE", "MipProblem", "SolveResult", "Solver", "Status", "WorkMetric",
           "solve_lp", "solve_mip"]
