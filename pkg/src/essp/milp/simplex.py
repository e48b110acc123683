"""Dense two-phase bounded simplex for LP relaxations.

Solves ``min c @ x`` subject to ``A x (<=|=|>=) b`` and ``lb <= x <= ub``.
Lower bounds must be finite; upper bounds may be ``inf``.
"""

from dataclasses import dataclass

import numpy as np

from essp.milp import _kernels

LE, EQ, GE = -1, 0, 1

PIVOT_TOL = 1e-9
REDUCED_COST_TOL = 1e-9
PHASE1_TOL = 1e-7


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    x: np.ndarray | None
    objective: float
    iterations: int


def solve_lp(c, A, senses, b, lb, ub, *, rule=_kernels.RULE_BLAND, max_iter=200_000,
             kernel=None):
    """Solve one LP; ``kernel`` overrides the pivot loop (benchmarks, tests)."""
    kernel = kernel or _kernels.iterate
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64).reshape(-1, c.size)
    senses = np.asarray(senses, dtype=np.int64)
    b = np.asarray(b, dtype=np.float64)
    lb = np.asarray(lb, dtype=np.float64)
    ub = np.asarray(ub, dtype=np.float64)
    m, n = A.shape

    width = ub - lb
    if np.any(width < -1e-12):
        return LpResult("infeasible", None, np.inf, 0)
    width = np.maximum(width, 0.0)

    # shift to zero lower bounds; turn >= rows into <= rows
    rhs = b - A @ lb
    sign = np.where(senses == GE, -1.0, 1.0)
    rows = A * sign[:, None]
    rhs = rhs * sign
    is_le = senses != EQ

    # equality rows and <= rows with negative rhs need an artificial start
    flip = rhs < 0
    needs_art = (~is_le) | flip
    n_slack = int(is_le.sum())
    n_art = int(needs_art.sum())
    ncol = n + n_slack + n_art

    T = np.zeros((m + 2, ncol))
    T[:m, :n] = rows
    slack_of_row = np.full(m, -1, dtype=np.int64)
    slack_of_row[is_le] = n + np.arange(n_slack)
    le_rows = np.flatnonzero(is_le)
    T[le_rows, slack_of_row[le_rows]] = 1.0
    T[:m][flip] *= -1.0
    rhs = np.where(flip, -rhs, rhs)

    basis = np.empty(m, dtype=np.int64)
    basis[~needs_art] = slack_of_row[~needs_art]
    art_rows = np.flatnonzero(needs_art)
    art_cols = n + n_slack + np.arange(n_art)
    T[art_rows, art_cols] = 1.0
    basis[art_rows] = art_cols

    col_ub = np.concatenate([width, np.full(n_slack, np.inf), np.full(n_art, np.inf)])
    is_basic = np.zeros(ncol, dtype=np.bool_)
    is_basic[basis] = True
    at_upper = np.zeros(ncol, dtype=np.bool_)
    enterable = np.ones(ncol, dtype=np.bool_)
    xB = rhs.copy()

    # objective scaled to unit max coefficient so tolerances are relative
    scale = float(np.abs(c).max()) if n else 0.0
    scale = scale if scale > 0 else 1.0
    T[m + 1, :n] = c / scale

    iterations = 0
    if n_art:
        T[m, :] = -T[art_rows, :].sum(axis=0)
        T[m, art_cols] = 0.0
        status, it = kernel(T, xB, basis, is_basic, at_upper, col_ub, enterable, m,
                            rule, max_iter, PIVOT_TOL, REDUCED_COST_TOL)
        iterations += it
        if status != _kernels.OPTIMAL:
            return LpResult("iteration_limit", None, np.inf, iterations)
        art_mask = basis >= n + n_slack
        infeas = float(np.maximum(xB[art_mask], 0.0).sum())
        if infeas > PHASE1_TOL * max(1.0, float(np.abs(rhs).max())):
            return LpResult("infeasible", None, np.inf, iterations)
        col_ub[art_cols] = 0.0
        enterable[art_cols] = False
        at_upper[art_cols] = False

    status, it = kernel(T, xB, basis, is_basic, at_upper, col_ub, enterable, m + 1,
                        rule, max_iter - iterations, PIVOT_TOL, REDUCED_COST_TOL)
    iterations += it
    if status == _kernels.UNBOUNDED:
        return LpResult("unbounded", None, -np.inf, iterations)
    if status != _kernels.OPTIMAL:
        return LpResult("iteration_limit", None, np.inf, iterations)

    full = np.where(at_upper, col_ub, 0.0)
    full[basis] = xB
    x = lb + np.clip(full[:n], 0.0, width)
    return LpResult("optimal", x, float(c @ x), iterations)
