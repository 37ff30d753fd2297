"""Generic driver for difference-of-convex iterations.

One loop serves every scheme: take a subgradient of the concave part at the
current state, minimize the convexified surrogate, repeat. The loop enforces
the descent property, detects fixed points, and records a full trace.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

DESCENT_SLACK = 1e-9


class Termination(enum.Enum):
    TOLERANCE = "tolerance"
    MAX_ITER = "max_iter"
    FIXED_POINT = "fixed_point"


@dataclass
class DcaConfig:
    stop_tol: float = 1e-5
    max_iter: int = 500
    n_starts: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.stop_tol <= 0:
            raise ValueError("stop_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")


@dataclass
class DcaTrace:
    objectives: list = field(default_factory=list)
    iterate_change: list = field(default_factory=list)
    iterations: int = 0
    terminated_by: Termination = Termination.MAX_ITER

    def to_csv(self) -> str:
        lines = ["iteration,objective,iterate_change"]
        for k, obj in enumerate(self.objectives):
            change = "" if k == 0 else f"{self.iterate_change[k - 1]:.17g}"
            lines.append(f"{k},{obj:.17g},{change}")
        return "\n".join(lines) + "\n"


class DcaRunError(RuntimeError):
    """Subproblem failure or descent violation, tagged with the iteration."""

    def __init__(self, message, iteration):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


def _parts(state):
    if hasattr(state, "parts"):
        return state.parts()
    return (np.atleast_1d(np.asarray(state, dtype=float)),)


def iterate_distance(prev, new) -> float:
    """Sum of Euclidean distances over the state's component blocks."""
    return float(
        sum(np.linalg.norm(np.asarray(a) - np.asarray(b)) for a, b in zip(_parts(prev), _parts(new)))
    )


def stop_check(prev, new, stop_tol: float) -> bool:
    # relative criterion: ||delta_x|| + |delta_b| + ... <= tol (1 + ||x|| + |b| + ...)
    size = sum(np.linalg.norm(np.asarray(a)) for a in _parts(prev))
    return iterate_distance(prev, new) <= stop_tol * (1.0 + size)


def run_dca(subgrad_H, solve_convexified, objective, x0, cfg: DcaConfig):
    """Iterate x^{k+1} = argmin of the convexification at x^k until convergence.

    subgrad_H(state) picks a subgradient of the concave part; solve_convexified
    (state, subgrad) must return a global minimizer of the convex surrogate, or
    at least a point that does not increase it. Returns (final state, DcaTrace).
    """
    trace = DcaTrace()
    obj = objective(x0)
    trace.objectives.append(obj)
    x = x0
    for k in range(cfg.max_iter):
        try:
            y = subgrad_H(x)
            x_new = solve_convexified(x, y)
        except Exception as exc:
            raise DcaRunError(str(exc), k) from exc
        obj_new = objective(x_new)
        if obj_new > obj + DESCENT_SLACK * max(1.0, abs(obj)):
            raise DcaRunError(
                f"objective increased from {obj:.12g} to {obj_new:.12g}", k
            )
        trace.objectives.append(obj_new)
        trace.iterate_change.append(iterate_distance(x, x_new))
        trace.iterations = k + 1
        if obj_new == obj:
            trace.terminated_by = Termination.FIXED_POINT
            return x_new, trace
        if stop_check(x, x_new, cfg.stop_tol):
            trace.terminated_by = Termination.TOLERANCE
            return x_new, trace
        x = x_new
        obj = obj_new
    trace.terminated_by = Termination.MAX_ITER
    return x, trace


def multi_start(run_one, make_x0, cfg: DcaConfig, score=None):
    """Run from n_starts initial points and keep the best final state.

    make_x0(seed) builds the start for one run; per-start seed is cfg.seed +
    start index. Ties go to the lowest start index. Returns (state, trace,
    start_index).
    """
    best = None
    for s in range(cfg.n_starts):
        x0 = make_x0(cfg.seed + s)
        final, trace = run_one(x0)
        val = trace.objectives[-1] if score is None else score(final)
        if best is None or val < best[0]:
            best = (val, final, trace, s)
    return best[1], best[2], best[3]
