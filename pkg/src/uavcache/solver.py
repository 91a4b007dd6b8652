"""Small-scale constrained convex minimization and exact max-weight
assignment: the numerical backbone for the per-slot subproblems.

Oracles are callables ``f(x) -> (value, gradient)``. The objective returns a
scalar and an (n,) gradient; each inequality oracle may be vector-valued,
returning an (m,) value and an (m, n) Jacobian, with the convention g(x) <= 0.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize, nnls

Oracle = Callable[[np.ndarray], tuple]

FEAS_TOL = 1e-6
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 500


class InfeasibleStartError(RuntimeError):
    """Raised when feasibility restoration cannot reach the feasible set."""


@dataclass
class ConvexProgram:
    dim: int
    objective: Oracle
    ineq_constraints: Sequence[Oracle] = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    start: np.ndarray | None = None


@dataclass
class SolveReport:
    point: np.ndarray
    objective_value: float
    max_constraint_violation: float
    iterations: int
    converged: bool


def _as_2d(val, jac, dim):
    v = np.atleast_1d(np.asarray(val, dtype=float))
    g = np.asarray(jac, dtype=float).reshape(v.size, dim)
    return v, g


def _violation(p: ConvexProgram, x: np.ndarray) -> float:
    worst = 0.0
    for con in p.ineq_constraints:
        v, _ = con(x)
        worst = max(worst, float(np.max(np.atleast_1d(v), initial=0.0)))
    return worst


def _bounds(p: ConvexProgram):
    lo = p.lower if p.lower is not None else np.full(p.dim, -np.inf)
    hi = p.upper if p.upper is not None else np.full(p.dim, np.inf)
    return lo, hi


def _restore_feasibility(p: ConvexProgram, x0: np.ndarray, tol: float,
                         max_iter: int) -> np.ndarray:
    """Minimize the squared constraint violations subject to the box."""
    def merit(x):
        total, grad = 0.0, np.zeros(p.dim)
        for con in p.ineq_constraints:
            v, g = _as_2d(*con(x), p.dim)
            active = v > 0
            if np.any(active):
                total += float((v[active] ** 2).sum())
                grad += 2.0 * v[active] @ g[active]
        return total, grad

    lo, hi = _bounds(p)
    res = minimize(merit, x0, jac=True, method="SLSQP",
                   bounds=list(zip(lo, hi)),
                   options={"maxiter": max_iter, "ftol": 1e-14})
    x = np.clip(res.x, lo, hi)
    if _violation(p, x) > tol:
        raise InfeasibleStartError(
            f"feasibility restoration stalled at violation {_violation(p, x):.3e}")
    return x


class _CachedOracle:
    """Oracle adapter for scipy: one evaluation serves both the value and
    Jacobian callbacks (scipy requests them separately at the same point)."""

    def __init__(self, con: Oracle, dim: int):
        self._con = con
        self._dim = dim
        self._x = None
        self._val = None
        self._jac = None

    def _ensure(self, x: np.ndarray) -> None:
        if self._x is None or not np.array_equal(x, self._x):
            v, g = _as_2d(*self._con(x), self._dim)
            self._x = x.copy()
            self._val = v
            self._jac = g

    def fun(self, x: np.ndarray) -> np.ndarray:
        self._ensure(x)
        return -self._val

    def jac(self, x: np.ndarray) -> np.ndarray:
        self._ensure(x)
        return -self._jac


def _kkt_residual(p: ConvexProgram, x: np.ndarray, active_tol: float) -> float:
    """Stationarity residual: least-norm fit of non-negative multipliers on
    the active constraint gradients, normalized by the objective gradient."""
    _, grad_f = p.objective(x)
    grad_f = np.asarray(grad_f, dtype=float)
    cols = []
    for con in p.ineq_constraints:
        v, g = _as_2d(*con(x), p.dim)
        for val, row in zip(v, g):
            if val >= -active_tol:
                cols.append(row)
    lo, hi = _bounds(p)
    for i in range(p.dim):
        if x[i] - lo[i] <= active_tol:
            e = np.zeros(p.dim); e[i] = -1.0
            cols.append(e)
        if hi[i] - x[i] <= active_tol:
            e = np.zeros(p.dim); e[i] = 1.0
            cols.append(e)
    scale = 1.0 + float(np.linalg.norm(grad_f))
    if not cols:
        return float(np.linalg.norm(grad_f)) / scale
    A = np.column_stack(cols)
    _, rnorm = nnls(A, -grad_f)
    return float(rnorm) / scale


def solve_convex(p: ConvexProgram, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER) -> SolveReport:
    """Solve a convex program. Non-convergence is reported, never silent;
    the returned objective never exceeds the (restored) start's."""
    lo, hi = _bounds(p)
    x0 = np.clip(np.asarray(p.start, dtype=float), lo, hi)
    if _violation(p, x0) > FEAS_TOL:
        x0 = _restore_feasibility(p, x0, FEAS_TOL, max_iter)
    f0, _ = p.objective(x0)

    cons = [{"type": "ineq", "fun": cached.fun, "jac": cached.jac}
            for cached in (_CachedOracle(con, p.dim) for con in p.ineq_constraints)]

    def objective(x):
        v, g = p.objective(x)
        return float(v), np.asarray(g, dtype=float)

    res = minimize(objective, x0, jac=True, method="SLSQP",
                   bounds=list(zip(lo, hi)), constraints=cons,
                   options={"maxiter": max_iter, "ftol": 1e-11})
    x = np.clip(res.x, lo, hi)
    f_x, _ = p.objective(x)
    if float(f_x) > float(f0) or not np.all(np.isfinite(x)):
        # solver moved uphill or diverged; fall back to the feasible start
        return SolveReport(point=x0, objective_value=float(f0),
                           max_constraint_violation=_violation(p, x0),
                           iterations=int(res.nit), converged=False)
    viol = _violation(p, x)
    kkt = _kkt_residual(p, x, active_tol=max(tol, 1e-8))
    converged = bool(viol <= tol and kkt <= max(tol, 1e-6))
    return SolveReport(point=x, objective_value=float(f_x),
                       max_constraint_violation=viol,
                       iterations=int(res.nit), converged=converged)


def check_gradient(oracle: Oracle, point: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    x = np.asarray(point, dtype=float)
    val, jac = oracle(x)
    v, g = _as_2d(val, jac, x.size)
    worst = 0.0
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        vp, _ = oracle(xp)
        vm, _ = oracle(xm)
        numeric = (np.atleast_1d(vp) - np.atleast_1d(vm)) / (2.0 * h)
        err = np.abs(g[:, i] - numeric) / (1.0 + np.abs(numeric))
        worst = max(worst, float(err.max()))
    return worst


def _matching_value(cost: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Best partial-matching value of a non-negative matrix (zeros mean
    'leave unmatched'); linear_sum_assignment padding via the zeros."""
    rows, cols = linear_sum_assignment(cost, maximize=True)
    return float(cost[rows, cols].sum()), rows, cols


def solve_assignment(cost: np.ndarray, maximize: bool = True) -> np.ndarray:
    """Exact max-weight bipartite matching with row/column sums <= 1.

    Entries that cannot improve the objective are never assigned. Ties are
    broken deterministically: rows take the smallest usable column, earlier
    rows first, and a row stays unassigned unless assignment helps.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost entries must be finite")
    if not maximize:
        c = -c
    n, m = c.shape
    useful = np.where(c > 0.0, c, 0.0)
    opt, _, _ = _matching_value(useful)
    S = np.zeros((n, m), dtype=np.int8)
    if opt <= 0.0:
        return S

    tol = 1e-9 * max(1.0, abs(opt))
    taken: list[int] = []
    pinned = 0.0
    for i in range(n):
        if opt - pinned <= tol:
            break                        # remaining rows stay unassigned
        if not np.any(useful[i] > 0.0):
            continue
        later_rows = list(range(i + 1, n))
        assigned = False
        for j in range(m):
            if useful[i, j] <= 0.0 or j in taken:
                continue
            rest = _residual_value(useful, later_rows, taken + [j])
            if pinned + useful[i, j] + rest >= opt - tol:
                S[i, j] = 1
                taken.append(j)
                pinned += useful[i, j]
                assigned = True
                break
        if not assigned:
            rest = _residual_value(useful, later_rows, taken)
            assert pinned + rest >= opt - tol, "assignment pinning lost optimality"
    return S


def _residual_value(useful: np.ndarray, free_rows: list[int],
                    taken_cols: list[int]) -> float:
    if not free_rows:
        return 0.0
    keep = [j for j in range(useful.shape[1]) if j not in taken_cols]
    if not keep:
        return 0.0
    sub = useful[np.ix_(free_rows, keep)]
    val, _, _ = _matching_value(sub)
    return val
