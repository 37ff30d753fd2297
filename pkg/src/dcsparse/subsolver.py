"""Dense exact LP solver and a conditional-gradient solver for diagonal QPs.

The simplex is two-phase with a Dantzig pivot rule that falls back to Bland's
rule under degeneracy, so termination is guaranteed and runs are deterministic.
The QP solver treats the LP solver as its linear-minimization oracle and stops
on a duality-gap certificate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-8
PIVOT_TOL = 1e-11
_COST_TOL = 1e-9


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpError(Exception):
    pass


class DegeneratePivotError(LpError):
    """Numerical breakdown: no admissible pivot above the pivot tolerance."""


class QpToleranceError(LpError):
    """CG hit the iteration cap before certifying the gap; carries the best iterate."""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


@dataclass
class LinearProgram:
    """min objective . v  s.t.  rows v <= rhs,  lower <= v <= upper."""

    objective: np.ndarray
    rows: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __init__(self, objective, rows=None, rhs=None, lower=None, upper=None):
        self.objective = np.asarray(objective, dtype=float)
        n = self.objective.size
        self.rows = (
            np.zeros((0, n)) if rows is None else np.asarray(rows, dtype=float).reshape(-1, n)
        )
        self.rhs = np.zeros(0) if rhs is None else np.atleast_1d(np.asarray(rhs, dtype=float))
        self.lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
        self.upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
        if self.rows.shape != (self.rhs.size, n):
            raise ValueError(
                f"row block {self.rows.shape} inconsistent with rhs size {self.rhs.size}"
            )
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bounds must have one entry per variable")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n_vars(self) -> int:
        return self.objective.size

    def is_feasible(self, v: np.ndarray, tol: float = FEAS_TOL) -> bool:
        if np.any(v < self.lower - tol) or np.any(v > self.upper + tol):
            return False
        return not (self.rhs.size and np.any(self.rows @ v > self.rhs + tol))


@dataclass
class LpSolution:
    status: LpStatus
    point: np.ndarray | None = None
    objective_value: float = np.nan
    gap: float | None = None


@dataclass
class DiagQp:
    """min objective . v + sum_i quad_weights_i v_i^2 over the base LP's feasible set."""

    base: LinearProgram
    quad_weights: np.ndarray = field(default=None)

    def __post_init__(self):
        self.quad_weights = np.asarray(self.quad_weights, dtype=float)
        if self.quad_weights.shape != (self.base.n_vars,):
            raise ValueError("quad_weights must have one entry per variable")
        if np.any(self.quad_weights < 0):
            raise ValueError("quad_weights must be nonnegative")

    def objective_at(self, v: np.ndarray) -> float:
        return float(self.base.objective @ v + self.quad_weights @ (v * v))


def _to_standard_form(lp: LinearProgram):
    """Rewrite as min c w + const, A w <= b, w >= 0.

    Returns (c, A, b, const, recover) where recover maps a standard-form point
    back to the original variables.
    """
    n = lp.n_vars
    cols = []  # (orig index, sign, shift) per standard-form column
    extra_rows = []  # (col index, ub) box rows for doubly-bounded vars
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            cols.append((j, 1.0, lo))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            cols.append((j, -1.0, hi))
        else:
            cols.append((j, 1.0, 0.0))
            cols.append((j, -1.0, 0.0))

    ns = len(cols)
    idx = np.array([c[0] for c in cols])
    sign = np.array([c[1] for c in cols])
    shift = np.zeros(n)
    for j, s, sh in cols:
        if s > 0:
            shift[j] = sh
        elif sh != 0.0:
            shift[j] = sh
    # v_j = shift_j + sum over its columns of sign * w.
    c = lp.objective[idx] * sign
    const = float(lp.objective @ shift)

    m0 = lp.rhs.size
    A = np.zeros((m0 + len(extra_rows), ns))
    b = np.empty(m0 + len(extra_rows))
    if m0:
        A[:m0] = lp.rows[:, idx] * sign
        b[:m0] = lp.rhs - lp.rows @ shift
    for r, (col, ub) in enumerate(extra_rows):
        A[m0 + r, col] = 1.0
        b[m0 + r] = ub

    def recover(w: np.ndarray) -> np.ndarray:
        v = shift.copy()
        np.add.at(v, idx, sign * w)
        return v

    return c, A, b, const, recover


def _pivot(T: np.ndarray, basis: np.ndarray, r: int, j: int):
    piv_row = T[r] / T[r, j]
    T -= np.outer(T[:, j], piv_row)
    T[r] = piv_row
    basis[r] = j


def _choose_pivot(T: np.ndarray, basis: np.ndarray, n_cols: int, bland: bool):
    """Return (row, col), or None if optimal; raises on breakdown/unbounded."""
    costs = T[-1, :n_cols]
    if bland:
        elig = np.flatnonzero(costs < -_COST_TOL)
        if elig.size == 0:
            return None
        j = int(elig[0])
    else:
        j = int(np.argmin(costs))
        if costs[j] >= -_COST_TOL:
            return None
    col = T[:-1, j]
    pos = col > PIVOT_TOL
    if not np.any(pos):
        if np.any(col > 0):
            raise DegeneratePivotError(
                f"all candidate pivots in column {j} below {PIVOT_TOL:g}"
            )
        raise _Unbounded(j)
    ratios = np.full(col.size, np.inf)
    ratios[pos] = T[:-1, -1][pos] / col[pos]
    best = ratios.min()
    ties = np.flatnonzero(ratios <= best + 1e-12)
    r = int(ties[np.argmin(basis[ties])])  # lowest basis index: anti-cycling tie-break
    return r, j


class _Unbounded(Exception):
    def __init__(self, col):
        self.col = col


def _run_simplex(T, basis, n_cols, max_iter):
    """Iterate to optimality of the current cost row. Returns False if unbounded."""
    degenerate_streak = 0
    bland = False
    for it in range(max_iter):
        try:
            choice = _choose_pivot(T, basis, n_cols, bland)
        except _Unbounded:
            return False
        if choice is None:
            return True
        r, j = choice
        leaving_value = T[r, -1]
        _pivot(T, basis, r, j)
        if leaving_value <= 1e-12:
            degenerate_streak += 1
            if degenerate_streak >= 40:
                bland = True
        else:
            degenerate_streak = 0
            bland = False
    raise LpError(f"simplex exceeded {max_iter} pivots")


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Exact vertex optimum via two-phase dense simplex; deterministic."""
    c, A, b, const, recover = _to_standard_form(lp)
    m, ns = A.shape
    if m == 0:
        # No rows: optimum is at w = 0 unless some cost is negative (unbounded).
        if np.any(c < -_COST_TOL):
            return LpSolution(LpStatus.UNBOUNDED)
        w = np.zeros(ns)
        v = recover(w)
        return LpSolution(LpStatus.OPTIMAL, v, float(lp.objective @ v))

    neg = b < 0
    n_art = int(neg.sum())
    n_cols = ns + m + n_art
    T = np.zeros((m + 1, n_cols + 1))
    T[:m, :ns] = A
    T[:m, ns : ns + m] = np.eye(m)
    T[:m, -1] = b
    T[:m][neg] *= -1.0
    art_cols = ns + m + np.arange(n_art)
    T[np.flatnonzero(neg), art_cols] = 1.0
    basis = ns + np.arange(m)
    basis[neg] = art_cols

    max_iter = 200 * (m + ns) + 5000
    if n_art:
        # Phase 1: minimize the artificial sum.
        T[-1, art_cols] = 1.0
        for r in np.flatnonzero(neg):
            T[-1] -= T[r]
        if not _run_simplex(T, basis, n_cols, max_iter):
            raise LpError("phase-1 unbounded: internal error")
        if -T[-1, -1] > FEAS_TOL * max(1.0, np.abs(b).max()):
            return LpSolution(LpStatus.INFEASIBLE)
        # Drive artificials out of the basis, or drop their (redundant) rows.
        n_struct = ns + m  # structural + slack columns
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= n_struct:
                nz = np.flatnonzero(np.abs(T[r, :n_struct]) > PIVOT_TOL)
                if nz.size:
                    _pivot(T, basis, r, int(nz[0]))
                else:
                    keep[r] = False
        if not keep.all():
            T = np.vstack([T[:m][keep], T[-1:]])
            basis = basis[keep]
        # Remove artificial columns.
        T = np.hstack([T[:, :n_struct], T[:, -1:]])
        n_cols = n_struct

    # Phase 2 cost row.
    T[-1, :] = 0.0
    T[-1, :ns] = c
    for r in range(T.shape[0] - 1):
        cb = T[-1, basis[r]]
        if cb != 0.0:
            T[-1] -= cb * T[r]
    if not _run_simplex(T, basis, n_cols, max_iter):
        return LpSolution(LpStatus.UNBOUNDED)

    w = np.zeros(n_cols)
    w[basis] = T[: T.shape[0] - 1, -1]
    w = np.maximum(w, 0.0)
    v = recover(w[:ns])
    return LpSolution(LpStatus.OPTIMAL, v, float(lp.objective @ v))


def solve_diag_qp(
    qp: DiagQp, tol: float = 1e-6, max_iter: int = 500, start: np.ndarray | None = None
) -> LpSolution:
    """Conditional gradient over the LP oracle, stopping on gap <= tol.

    An explicit feasible `start` warm-starts the iteration; with exact line
    search the objective never rises above its value there.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.any(qp.quad_weights):
        return solve_lp(qp.base)
    if start is not None:
        v = np.asarray(start, dtype=float)
        if not qp.base.is_feasible(v):
            raise ValueError("start point is not feasible")
    else:
        init = solve_lp(qp.base)
        if init.status is not LpStatus.OPTIMAL:
            return init
        v = init.point
    c = qp.base.objective
    w2 = 2.0 * qp.quad_weights
    gap = np.inf
    for _ in range(max_iter):
        grad = c + w2 * v
        sub = solve_lp(
            LinearProgram(grad, qp.base.rows, qp.base.rhs, qp.base.lower, qp.base.upper)
        )
        if sub.status is not LpStatus.OPTIMAL:
            return sub
        d = sub.point - v
        gap = float(grad @ (v - sub.point))
        if gap <= tol:
            return LpSolution(LpStatus.OPTIMAL, v, qp.objective_at(v), gap=gap)
        denom = float(w2 @ (d * d))
        gamma = 1.0 if denom <= 0 else min(1.0, gap / denom)
        v = v + gamma * d
    best = LpSolution(LpStatus.OPTIMAL, v, qp.objective_at(v), gap=gap)
    raise QpToleranceError(f"gap {gap:.3e} above tol {tol:.1e} after {max_iter} iterations", best)


def dump_lp(lp: LinearProgram) -> str:
    """Plain-text dump: objective row, then one 'coeffs <= rhs' line per row, then bounds."""
    lines = ["objective " + " ".join(f"{v:.17g}" for v in lp.objective)]
    for row, rhs in zip(lp.rows, lp.rhs):
        lines.append(" ".join(f"{v:.17g}" for v in row) + f" <= {rhs:.17g}")
    lines.append("lower " + " ".join(f"{v:.17g}" for v in lp.lower))
    lines.append("upper " + " ".join(f"{v:.17g}" for v in lp.upper))
    return "\n".join(lines) + "\n"
