"""Exact-penalty thresholds for the sparse SVM problem, plus two ground-truth
oracles: support enumeration for the exact zero-norm objective and a dense
grid search (n <= 2) for the surrogate objectives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import penalties, svmfs
from .penalties import PenaltyKind, PenaltySpec
from .subsolver import LinearProgram, LpStatus, solve_lp

DEFAULT_N_LIMIT = 15
DEFAULT_GRID_RESOLUTION = 1e-3
_GRID_CHUNK = 20000


@dataclass(frozen=True)
class BoxedInstance:
    """An SVM instance with per-feature box bounds |x_i| <= m_box_i."""

    inst: svmfs.SvmInstance
    m_box: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m_box, dtype=float)
        if m.ndim == 0:
            m = np.full(self.inst.n, float(m))
        if m.shape != (self.inst.n,):
            raise ValueError(f"m_box must be scalar or length {self.inst.n}")
        if np.any(m <= 0):
            raise ValueError("box bounds must be positive")
        object.__setattr__(self, "m_box", m)


def p_penalty(u) -> float:
    """Distance of u from the binary lattice: sum of min{u_i, 1 - u_i}."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u > 1):
        raise ValueError("p_penalty requires u in [0, 1]^n")
    return float(np.minimum(u, 1.0 - u).sum())


def capped_theta_from_tau(tau: float, lam: float, M: float) -> float:
    """theta making the capped surrogate problem share optima with the penalized
    binary reformulation at penalty weight tau (valid for tau >= lam)."""
    if not (lam > 0 and M > 0):
        raise ValueError("lam and M must be positive")
    if tau < lam:
        raise ValueError(f"requires tau >= lam, got tau={tau} < lam={lam}")
    return (tau + lam) / (lam * M)


@dataclass(frozen=True)
class ThetaBound:
    value: float
    partial: bool = True  # the full threshold needs an uncomputable constant


def theta_zero_lower_bound(lam: float, M: float) -> ThetaBound:
    if not (lam > 0 and M > 0):
        raise ValueError("lam and M must be positive")
    return ThetaBound(2.0 / M, partial=True)


def kappa_svm(inst: svmfs.SvmInstance) -> float:
    """Penalty threshold constant; kappa / lambda equals theta_star exactly."""
    delta = float(
        np.max(
            np.abs(inst.A).sum(axis=0) / inst.A.shape[0]
            + np.abs(inst.B).sum(axis=0) / inst.B.shape[0]
        )
    )
    return (1.0 - inst.lam) * delta


def support_enum_oracle(boxed: BoxedInstance, n_limit: int = DEFAULT_N_LIMIT):
    """Exact minimum of hinge + lambda*||x||_0 over the box, by trying every
    support and solving the restricted hinge LP.

    Returns (objective, x, b, support) with 1-based support indices; ties go
    to the lexicographically smallest support (low-index masks first).
    """
    inst = boxed.inst
    n = inst.n
    if n > n_limit:
        raise ValueError(f"support enumeration refused: n={n} exceeds limit {n_limit}")
    base = svmfs.pure_hinge_lp(inst)
    best = None
    for mask in range(1 << n):
        lower = base.lower.copy()
        upper = base.upper.copy()
        size = 0
        for i in range(n):
            if mask >> i & 1:
                lower[i], upper[i] = -boxed.m_box[i], boxed.m_box[i]
                size += 1
            else:
                lower[i] = upper[i] = 0.0
        sol = solve_lp(LinearProgram(base.objective, base.rows, base.rhs, lower, upper))
        if sol.status is not LpStatus.OPTIMAL:
            raise RuntimeError(f"restricted hinge LP came back {sol.status.value}")
        val = sol.objective_value + inst.lam * size
        if best is None or val < best[0] - 1e-12:
            support = tuple(i + 1 for i in range(n) if mask >> i & 1)
            best = (val, sol.point[:n].copy(), float(sol.point[n]), support)
    return best


def _penalty_grid(spec: PenaltySpec, x_abs: np.ndarray) -> np.ndarray:
    """Vectorized surrogate value over an array of |x| entries."""
    th = spec.theta
    k = spec.kind
    if k is PenaltyKind.CAP:
        return np.minimum(1.0, th * x_abs)
    if k is PenaltyKind.SCAD:
        a = spec.a
        mid = (-((th * x_abs) ** 2) + 2.0 * a * th * x_abs - 1.0) / (a * a - 1.0)
        out = np.where(x_abs <= 1.0 / th, 2.0 * th * x_abs / (a + 1.0), mid)
        return np.where(x_abs >= a / th, 1.0, out)
    # fall back on the scalar implementation for the other families
    return np.array([penalties.value(spec, float(t)) for t in x_abs.ravel()]).reshape(
        x_abs.shape
    )


def _min_hinge_over_b(inst: svmfs.SvmInstance, X: np.ndarray) -> np.ndarray:
    """Exact min over b of the hinge loss, per row of X.

    The loss is convex piecewise linear in b with slopes -(1-lam) and +(1-lam)
    at the ends, so the minimum sits on a kink; evaluate all kinks.
    """
    lam = inst.lam
    na, nb = inst.A.shape[0], inst.B.shape[0]
    AX = inst.A @ X.T  # na x K
    BX = inst.B @ X.T  # nb x K
    cand = np.concatenate([AX - 1.0, BX + 1.0], axis=0)  # candidates for b, C x K
    # xi_j = max(0, -AX_j + b + 1), zeta_l = max(0, BX_l - b + 1)
    xi = np.maximum(0.0, -AX[None, :, :] + cand[:, None, :] + 1.0).sum(axis=1)
    zeta = np.maximum(0.0, BX[None, :, :] - cand[:, None, :] + 1.0).sum(axis=1)
    vals = (1.0 - lam) * (xi / na + zeta / nb)  # C x K
    which = np.argmin(vals, axis=0)
    k_idx = np.arange(X.shape[0])
    return vals[which, k_idx], cand[which, k_idx]


def _grid_min(boxed: BoxedInstance, spec: PenaltySpec, resolution: float):
    inst = boxed.inst
    n = inst.n
    if n > 2:
        raise ValueError(f"grid oracle refused: n={n} exceeds 2")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    axes = []
    for i in range(n):
        m = boxed.m_box[i]
        npts = int(round(2.0 * m / resolution)) + 1
        axes.append(np.linspace(-m, m, npts))
    sizes = [ax.size for ax in axes]
    total = int(np.prod(sizes))
    best = (np.inf, None, None)
    for start in range(0, total, _GRID_CHUNK):
        flat = np.arange(start, min(start + _GRID_CHUNK, total))
        if n == 1:
            X = axes[0][flat][:, None]
        else:
            # row-major order: first axis varies slowest, ties resolve low-index
            X = np.column_stack([axes[0][flat // sizes[1]], axes[1][flat % sizes[1]]])
        hinge, b_opt = _min_hinge_over_b(inst, X)
        obj = hinge + inst.lam * _penalty_grid(spec, np.abs(X)).sum(axis=1)
        j = int(np.argmin(obj))
        if obj[j] < best[0]:
            best = (float(obj[j]), X[j].copy(), float(b_opt[j]))
    return best


def grid_oracle_capped(boxed: BoxedInstance, spec: PenaltySpec, resolution: float):
    """Brute-force minimum of the capped-surrogate objective on an x grid,
    with b minimized exactly per grid point. n <= 2 only."""
    if spec.kind is not PenaltyKind.CAP:
        raise ValueError(f"grid_oracle_capped expects the cap penalty, got {spec.kind.value}")
    return _grid_min(boxed, spec, resolution)


def scad_equivalence_probe(
    boxed: BoxedInstance,
    a: float,
    theta: float,
    resolution: float = DEFAULT_GRID_RESOLUTION,
    tol: float | None = None,
) -> bool:
    """True when the SCAD surrogate's global grid optimum matches the exact
    sparse optimum from support enumeration.

    Sanity-checks the sandwich cap(theta/a) <= scad(theta, a) <= step first.
    """
    spec = PenaltySpec(PenaltyKind.SCAD, theta, a=a)
    cap_lo = PenaltySpec(PenaltyKind.CAP, theta / a)
    ts = np.linspace(0.0, 2.0 * a / theta, 401)
    for t in ts:
        r_scad = penalties.value(spec, float(t))
        if penalties.value(cap_lo, float(t)) > r_scad + 1e-12:
            raise AssertionError(f"lower sandwich bound violated at t={t}")
        if r_scad > penalties.step(float(t)) + 1e-12:
            raise AssertionError(f"upper sandwich bound violated at t={t}")
    l0_val = support_enum_oracle(boxed)[0]
    grid_val = _grid_min(boxed, spec, resolution)[0]
    if tol is None:
        tol = 2.0 * resolution * kappa_svm(boxed.inst) + 1e-12
    return abs(grid_val - l0_val) <= tol


def oracle_report(boxed: BoxedInstance, n_limit: int = DEFAULT_N_LIMIT):
    """Support-enumeration result wrapped in the common run-report shape."""
    import time

    t0 = time.perf_counter()
    val, x, b, support = support_enum_oracle(boxed, n_limit=n_limit)
    wall = time.perf_counter() - t0
    state = svmfs.ModelIterate(x, b).bind(boxed.inst)
    rep = svmfs._make_report(boxed.inst, None, "oracle", state, None, wall)
    rep.final_objective = val
    return rep
