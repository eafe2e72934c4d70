"""Dense bounded-variable primal simplex with row duals and reduced costs.

The problem form is::

    maximize    c @ x
    subject to  A[i] @ x <= b[i]   or   A[i] @ x == b[i]
                lower <= x <= upper

Upper bounds at or above :data:`INF_BOUND` mean "no upper bound"; ``np.inf``
inputs are mapped onto that sentinel when the program is built.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ._kernel import get_kernel

INF_BOUND = 1e20
FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
KKT_TOL = 1e-7
BLAND_AFTER = 50
MAX_ITER = 50_000

LE = "<="
EQ = "="


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """A maximization LP with ``<=``/``=`` rows and per-variable bounds."""

    objective: np.ndarray
    A: np.ndarray
    senses: tuple
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    row_labels: tuple = ()
    var_labels: tuple = ()

    def __post_init__(self):
        c = np.ascontiguousarray(self.objective, dtype=float).reshape(-1)
        n = c.size
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(len(self.senses), n)
        if A.ndim != 2 or A.shape[1] != n:
            raise ValueError(f"row coefficient vectors must have length {n}, got shape {A.shape}")
        m = A.shape[0]
        b = np.asarray(self.rhs, dtype=float).reshape(-1)
        if b.size != m or len(self.senses) != m:
            raise ValueError(f"{m} rows but {b.size} right-hand sides and {len(self.senses)} relations")
        bad = [s for s in self.senses if s not in (LE, EQ)]
        if bad:
            raise ValueError(f"unknown row relation(s) {bad!r}; expected '<=' or '='")
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        up = np.minimum(np.asarray(self.upper, dtype=float).reshape(-1), INF_BOUND)
        if lo.size != n or up.size != n:
            raise ValueError(f"bounds must have length {n}")
        if not np.all(np.isfinite(lo)):
            raise ValueError("lower bounds must be finite")
        if np.any(lo > up):
            k = int(np.argmax(lo > up))
            raise ValueError(f"variable {k}: lower {lo[k]} > upper {up[k]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A", np.ascontiguousarray(A))
        object.__setattr__(self, "senses", tuple(self.senses))
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def from_rows(cls, objective: Sequence[float], rows: Sequence, bounds: Sequence) -> "LinearProgram":
        """Build from ``rows = [(coeffs, relation, rhs), ...]`` and ``bounds = [(lo, up), ...]``."""
        n = len(objective)
        for k, (coeffs, _, _) in enumerate(rows):
            if len(coeffs) != n:
                raise ValueError(f"row {k} has {len(coeffs)} coefficients, expected {n}")
        A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), n)
        lo, up = (zip(*bounds) if bounds else ((), ()))
        return cls(objective, A, tuple(r[1] for r in rows), [r[2] for r in rows], list(lo), list(up))

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: Status
    primal: np.ndarray = field(default_factory=lambda: np.zeros(0))
    row_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective_value: float = float("nan")
    basis: tuple = ()
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class Feasibility(NamedTuple):
    feasible: bool
    violation: float


@dataclass(frozen=True)
class KktReport:
    applicable: bool
    primal_violation: float = float("nan")
    dual_violation: float = float("nan")
    complementarity_violation: float = float("nan")
    duality_gap: float = float("nan")
    tol: float = KKT_TOL

    @property
    def passed(self) -> bool:
        return self.applicable and max(
            self.primal_violation, self.dual_violation,
            self.complementarity_violation, self.duality_gap) <= self.tol


def _max_violation(lp: LinearProgram, x: np.ndarray) -> float:
    viol = 0.0
    if x.size:
        viol = max(viol, float(np.max(lp.lower - x, initial=0.0)), float(np.max(x - lp.upper, initial=0.0)))
    if lp.n_rows:
        r = lp.A @ x - lp.rhs
        eq = np.array([s == EQ for s in lp.senses])
        r = np.where(eq, np.abs(r), r)
        viol = max(viol, float(np.max(r, initial=0.0)))
    return viol


def is_feasible(lp: LinearProgram, point) -> Feasibility:
    """Check ``point`` against every bound and row of ``lp`` at tolerance 1e-9."""
    x = np.asarray(point, dtype=float).reshape(-1)
    if x.size != lp.n_vars:
        raise ValueError(f"point has {x.size} entries, LP has {lp.n_vars} variables")
    v = _max_violation(lp, x)
    return Feasibility(v <= FEAS_TOL, v)


def dual_objective(lp: LinearProgram, row_duals, reduced_costs) -> float:
    d = np.asarray(reduced_costs)
    finite_up = lp.upper < INF_BOUND
    up_part = np.where((d > 0) & finite_up, d * np.where(finite_up, lp.upper, 0.0), 0.0)
    lo_part = np.where(d < 0, d * lp.lower, 0.0)
    return float(row_duals @ lp.rhs + up_part.sum() + lo_part.sum())


def verify_kkt(lp: LinearProgram, sol: LpSolution, tol: float = KKT_TOL) -> KktReport:
    """Recompute primal/dual feasibility, complementary slackness and the duality gap."""
    if sol.status is not Status.OPTIMAL:
        return KktReport(applicable=False, tol=tol)
    x = np.asarray(sol.primal, dtype=float)
    y = np.asarray(sol.row_duals, dtype=float)
    d = lp.objective - lp.A.T @ y
    le = np.array([s == LE for s in lp.senses], dtype=bool)
    slack = lp.rhs - lp.A @ x
    finite_up = lp.upper < INF_BOUND

    primal = _max_violation(lp, x)
    dual = max(float(np.max(np.where(le, -y, 0.0), initial=0.0)),
               float(np.max(np.where(~finite_up, d, 0.0), initial=0.0)))
    cs_rows = np.abs(np.where(le, y * slack, 0.0))
    cs_up = np.abs(np.where(finite_up, np.maximum(d, 0.0) * (np.where(finite_up, lp.upper, 0.0) - x), 0.0))
    cs_lo = np.abs(np.maximum(-d, 0.0) * (x - lp.lower))
    cs = max(float(np.max(cs_rows, initial=0.0)), float(np.max(cs_up, initial=0.0)),
             float(np.max(cs_lo, initial=0.0)))
    gap = abs(float(lp.objective @ x) - dual_objective(lp, y, d))
    return KktReport(True, primal, dual, cs, gap, tol)


def solve(lp: LinearProgram, kernel: str | None = None) -> LpSolution:
    """Solve ``lp`` by two-phase bounded-variable primal simplex.

    Pivoting is Dantzig's rule with lowest-index tie-breaking; after
    ``BLAND_AFTER`` consecutive degenerate pivots it switches to Bland's rule.
    The final primal and dual vectors are recomputed from the terminal basis,
    so two runs that end on the same basis return bitwise-identical points.
    """
    k = get_kernel(kernel)
    m, n = lp.n_rows, lp.n_vars
    A, b = lp.A, lp.rhs
    le = np.array([s == LE for s in lp.senses], dtype=bool)

    resid = b - A @ lp.lower if m else np.zeros(0)
    use_slack = le & (resid >= 0.0)
    art_rows = np.flatnonzero(~use_slack)
    n_art = art_rows.size
    N = n + m + n_art

    A_full = np.zeros((m, N))
    A_full[:, :n] = A
    A_full[:, n:n + m] = np.eye(m)
    sign = np.where(resid[art_rows] >= 0.0, 1.0, -1.0)
    A_full[art_rows, n + m + np.arange(n_art)] = sign

    lo = np.zeros(N)
    up = np.zeros(N)
    lo[:n] = lp.lower
    up[:n] = lp.upper
    up[n:n + m] = np.where(le, INF_BOUND, 0.0)
    up[n + m:] = INF_BOUND

    basis = np.empty(m, dtype=np.int64)
    basis[:] = n + np.arange(m)
    basis[art_rows] = n + m + np.arange(n_art)
    pos = np.full(N, -1, dtype=np.int64)
    pos[basis] = np.arange(m)
    at_upper = np.zeros(N, dtype=np.int8)

    row_sign = np.ones(m)
    row_sign[art_rows] = sign
    T = np.ascontiguousarray(A_full * row_sign[:, None])
    beta = np.abs(resid) if m else np.zeros(0)
    beta = np.where(use_slack, resid, beta)

    iters = 0
    if n_art:
        c1 = np.zeros(N)
        c1[n + m:] = -1.0
        d = c1 - c1[basis] @ T
        status, it = k.iterate(T, d, beta, basis, pos, at_upper, lo, up,
                               MAX_ITER, BLAND_AFTER, OPT_TOL, PIVOT_TOL, INF_BOUND)
        iters += it
        if status != 0:
            raise RuntimeError(f"phase 1 terminated abnormally (status {status})")
        infeas = float(np.sum(np.where(basis >= n + m, beta, 0.0)))
        if infeas > FEAS_TOL * (1.0 + float(np.max(np.abs(b), initial=0.0))):
            return LpSolution(Status.INFEASIBLE, iterations=iters)
        _drive_out_artificials(k, T, beta, basis, pos, at_upper, lo, up, n + m)
        up[n + m:] = 0.0

    c2 = np.zeros(N)
    c2[:n] = lp.objective
    d = c2 - c2[basis] @ T if m else c2.copy()
    status, it = k.iterate(T, d, beta, basis, pos, at_upper, lo, up,
                           MAX_ITER, BLAND_AFTER, OPT_TOL, PIVOT_TOL, INF_BOUND)
    iters += it
    if status == 1:
        return LpSolution(Status.UNBOUNDED, iterations=iters)
    if status != 0:
        raise RuntimeError(f"simplex hit the iteration limit ({MAX_ITER})")

    x_full = np.where(at_upper == 1, up, lo)
    x_full[basis] = beta
    y = np.zeros(m)
    if m:
        B = A_full[:, basis]
        nonbasic = pos < 0
        rhs = b - A_full[:, nonbasic] @ x_full[nonbasic]
        try:
            x_full[basis] = np.linalg.solve(B, rhs)
            y = np.linalg.solve(B.T, c2[basis])
        except np.linalg.LinAlgError:
            y = c2[basis] @ np.linalg.pinv(B)
    x = x_full[:n].copy()
    reduced = lp.objective - A.T @ y
    return LpSolution(Status.OPTIMAL, x, y, reduced, float(lp.objective @ x),
                      tuple(int(v) for v in sorted(basis)), iters)


def _drive_out_artificials(k, T, beta, basis, pos, at_upper, lo, up, first_art):
    d_dummy = np.zeros(T.shape[1])
    for r in range(T.shape[0]):
        if basis[r] < first_art:
            continue
        row = np.abs(T[r, :first_art])
        row[pos[:first_art] >= 0] = 0.0
        j = int(np.argmax(row)) if row.size else 0
        if row.size == 0 or row[j] <= PIVOT_TOL:
            continue  # redundant row: artificial stays basic, pinned to 0
        art = basis[r]
        value = up[j] if at_upper[j] else lo[j]
        k.pivot(T, d_dummy, r, j)
        pos[art] = -1
        at_upper[art] = 0
        basis[r] = j
        pos[j] = r
        at_upper[j] = 0
        beta[r] = value
