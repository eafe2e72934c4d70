"""Linear-programming substrate: bounded-variable simplex, KKT and feasibility checks."""
from ._kernel import BACKEND, KERNELS
from .core import (
    EQ, INF_BOUND, KKT_TOL, LE, Feasibility, KktReport, LinearProgram, LpSolution, Status,
    dual_objective, is_feasible, solve, verify_kkt,
)

__all__ = [
    "BACKEND", "KERNELS", "EQ", "INF_BOUND", "KKT_TOL", "LE", "Feasibility", "KktReport",
    "LinearProgram", "LpSolution", "Status", "dual_objective", "is_feasible", "solve", "verify_kkt",
]
