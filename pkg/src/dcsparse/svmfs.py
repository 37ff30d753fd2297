"""Feature selection in linear SVM through sparse DC surrogates.

Builds the hinge-loss polytope, the zero-norm and surrogate objectives, the
four per-scheme convex subproblems, the exact-penalty threshold theta_star,
and the adaptive theta procedure, plus PWCO / selected-feature metrics.
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import dca, penalties
from .penalties import PenaltyKind, PenaltySpec, Side
from .subsolver import (
    DiagQp,
    LinearProgram,
    LpStatus,
    QpToleranceError,
    solve_diag_qp,
    solve_lp,
)

SF_THRESHOLD = 1e-5
DCA3_BOX = 1e3
QP_GAP_TOL = 1e-6


class Scheme(enum.Enum):
    DCA1 = "dca1"
    DCA2 = "dca2"
    DCA3 = "dca3"
    DCA4 = "dca4"


@dataclass(frozen=True)
class SvmInstance:
    """Two-class data split: rows of A are the +1 class, rows of B the -1 class."""

    A: np.ndarray
    B: np.ndarray
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, dtype=float)))
        object.__setattr__(self, "B", np.atleast_2d(np.asarray(self.B, dtype=float)))
        if self.A.shape[0] < 1 or self.B.shape[0] < 1:
            raise ValueError("each class needs at least one point")
        if self.A.shape[1] != self.B.shape[1]:
            raise ValueError(
                f"feature count mismatch: {self.A.shape[1]} vs {self.B.shape[1]}"
            )
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @classmethod
    def from_dataset(cls, dataset, lam: float) -> "SvmInstance":
        pos = dataset.labels > 0
        return cls(dataset.features[pos], dataset.features[~pos], lam)


@dataclass(frozen=True)
class ModelIterate:
    """Hyperplane (x, b); slacks are derived, so the point always lies in K."""

    x: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "b", float(self.b))

    def slacks(self, inst: SvmInstance):
        xi = np.maximum(0.0, -(inst.A @ self.x) + self.b + 1.0)
        zeta = np.maximum(0.0, inst.B @ self.x - self.b + 1.0)
        return xi, zeta

    def bind(self, inst: SvmInstance) -> "BoundIterate":
        xi, zeta = self.slacks(inst)
        return BoundIterate(self.x, self.b, xi, zeta)


@dataclass(frozen=True)
class BoundIterate(ModelIterate):
    """ModelIterate plus its slacks, exposing the blocks the stop rule sums over."""

    xi: np.ndarray = None
    zeta: np.ndarray = None

    def parts(self):
        return self.x, np.array([self.b]), self.xi, self.zeta


def hinge_loss(inst: SvmInstance, x, b) -> float:
    xi, zeta = ModelIterate(x, b).slacks(inst)
    return float(
        (1.0 - inst.lam) * (xi.sum() / inst.A.shape[0] + zeta.sum() / inst.B.shape[0])
    )


def l0_objective(inst: SvmInstance, x, b) -> float:
    x = np.asarray(x, dtype=float)
    return hinge_loss(inst, x, b) + inst.lam * int(np.count_nonzero(x))


def approx_objective(inst: SvmInstance, spec: PenaltySpec, x, b) -> float:
    x = np.asarray(x, dtype=float)
    pen = sum(penalties.value(spec, float(t)) for t in x)
    return hinge_loss(inst, x, b) + inst.lam * pen


def _hinge_rows(inst: SvmInstance, n_extra: int):
    """K rows over variables (x, b, xi, zeta, extras): margin constraints only."""
    n = inst.n
    na, nb = inst.A.shape[0], inst.B.shape[0]
    width = n + 1 + na + nb + n_extra
    rows = np.zeros((na + nb, width))
    rows[:na, :n] = -inst.A
    rows[:na, n] = 1.0
    rows[:na, n + 1 : n + 1 + na] = -np.eye(na)
    rows[na:, :n] = inst.B
    rows[na:, n] = -1.0
    rows[na:, n + 1 + na : n + 1 + na + nb] = -np.eye(nb)
    rhs = np.full(na + nb, -1.0)
    return rows, rhs, width


def _hinge_objective(inst: SvmInstance, width: int) -> np.ndarray:
    n = inst.n
    na, nb = inst.A.shape[0], inst.B.shape[0]
    c = np.zeros(width)
    c[n + 1 : n + 1 + na] = (1.0 - inst.lam) / na
    c[n + 1 + na : n + 1 + na + nb] = (1.0 - inst.lam) / nb
    return c


def _bounds(inst: SvmInstance, width: int, x_box: float | None = None):
    # x and b free by default; slacks and any extra block nonnegative
    n = inst.n
    lower = np.zeros(width)
    lower[: n + 1] = -np.inf
    upper = np.full(width, np.inf)
    if x_box is not None:
        lower[:n] = -x_box
        upper[:n] = x_box
    return lower, upper


def _abs_link_rows(n: int, width: int, x_at: int, z_at: int):
    """Rows encoding x_i <= z_i and -x_i <= z_i."""
    rows = np.zeros((2 * n, width))
    for i in range(n):
        rows[2 * i, x_at + i] = 1.0
        rows[2 * i, z_at + i] = -1.0
        rows[2 * i + 1, x_at + i] = -1.0
        rows[2 * i + 1, z_at + i] = -1.0
    return rows, np.zeros(2 * n)


def _lp_with_z(inst: SvmInstance, z_cost: np.ndarray, x_cost: np.ndarray) -> LinearProgram:
    n = inst.n
    rows, rhs, width = _hinge_rows(inst, n_extra=n)
    link_rows, link_rhs = _abs_link_rows(n, width, 0, width - n)
    c = _hinge_objective(inst, width)
    c[:n] = x_cost
    c[width - n :] = z_cost
    lower, upper = _bounds(inst, width)
    return LinearProgram(
        c, np.vstack([rows, link_rows]), np.concatenate([rhs, link_rhs]), lower, upper
    )


def build_dca1_lp(inst: SvmInstance, spec: PenaltySpec, zbar: np.ndarray) -> LinearProgram:
    """Subproblem with the polyhedral majorant: eta|x| via z, linearized concave part."""
    zbar = np.asarray(zbar, dtype=float)
    if zbar.shape != (inst.n,):
        raise ValueError(f"zbar must have {inst.n} entries, got shape {zbar.shape}")
    eta = penalties.eta(spec)
    return _lp_with_z(inst, np.full(inst.n, inst.lam * eta), -zbar)


def build_dca2_lp(inst: SvmInstance, spec: PenaltySpec, w: np.ndarray) -> LinearProgram:
    """Weighted-l1 subproblem; w already carries the lambda factor."""
    w = np.asarray(w, dtype=float)
    if w.shape != (inst.n,):
        raise ValueError(f"w must have {inst.n} entries, got shape {w.shape}")
    if np.any(w < 0):
        raise ValueError("negative l1 weight")
    return _lp_with_z(inst, w, np.zeros(inst.n))


def build_dca3_qp(
    inst: SvmInstance, spec: PenaltySpec, w: np.ndarray, x_box: float = DCA3_BOX
) -> DiagQp:
    """Weighted-l2 subproblem. The box on x keeps the region bounded when
    some weights vanish (plateau penalties)."""
    w = np.asarray(w, dtype=float)
    if w.shape != (inst.n,):
        raise ValueError(f"w must have {inst.n} entries, got shape {w.shape}")
    if np.any(w < 0):
        raise ValueError("negative l2 weight")
    rows, rhs, width = _hinge_rows(inst, n_extra=0)
    c = _hinge_objective(inst, width)
    lower, upper = _bounds(inst, width, x_box=x_box)
    quad = np.zeros(width)
    quad[: inst.n] = w
    return DiagQp(LinearProgram(c, rows, rhs, lower, upper), quad)


def build_dca4_lp(inst: SvmInstance, spec: PenaltySpec, zbar: np.ndarray) -> LinearProgram:
    """Piecewise-linear surrogate subproblem over t >= 1/theta, |x| <= t."""
    if spec.kind is not PenaltyKind.PIL:
        raise penalties.UnsupportedKindError("this subproblem requires the pil penalty")
    zbar = np.asarray(zbar, dtype=float)
    if zbar.shape != (inst.n,):
        raise ValueError(f"zbar must have {inst.n} entries, got shape {zbar.shape}")
    n = inst.n
    rows, rhs, width = _hinge_rows(inst, n_extra=n)
    link_rows, link_rhs = _abs_link_rows(n, width, 0, width - n)
    c = _hinge_objective(inst, width)
    c[:n] = -zbar
    c[width - n :] = inst.lam * spec.theta / (spec.a - 1.0)
    lower, upper = _bounds(inst, width)
    lower[width - n :] = 1.0 / spec.theta
    return LinearProgram(
        c, np.vstack([rows, link_rows]), np.concatenate([rhs, link_rhs]), lower, upper
    )


def theta_star(inst: SvmInstance) -> float:
    """Tightness threshold above which the capped surrogate is exact."""
    delta = float(
        np.max(
            np.abs(inst.A).sum(axis=0) / inst.A.shape[0]
            + np.abs(inst.B).sum(axis=0) / inst.B.shape[0]
        )
    )
    # grouped as ((1-lam)*delta)/lam so kappa_svm(inst)/lam matches bitwise
    return (1.0 - inst.lam) * delta / inst.lam


def pure_hinge_lp(inst: SvmInstance, x_box: float | None = None) -> LinearProgram:
    rows, rhs, width = _hinge_rows(inst, n_extra=0)
    lower, upper = _bounds(inst, width, x_box=x_box)
    return LinearProgram(_hinge_objective(inst, width), rows, rhs, lower, upper)


def hinge_start(inst: SvmInstance) -> BoundIterate:
    sol = solve_lp(pure_hinge_lp(inst))
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"hinge LP came back {sol.status.value}")
    n = inst.n
    return ModelIterate(_snap(sol.point[:n]), sol.point[n]).bind(inst)


def random_start(inst: SvmInstance, seed: int) -> BoundIterate:
    rng = np.random.default_rng(seed)
    return ModelIterate(rng.uniform(-1.0, 1.0, inst.n), rng.uniform(-1.0, 1.0)).bind(inst)


def _snap(x: np.ndarray) -> np.ndarray:
    # coordinates below the solver's feasibility tolerance are numerical zeros;
    # keeping them would poison the exact-support count
    out = np.asarray(x, dtype=float).copy()
    out[np.abs(out) <= 1e-8] = 0.0
    return out


def _solve_to_iterate(lp: LinearProgram, inst: SvmInstance, qp_weights=None) -> BoundIterate:
    if qp_weights is None:
        sol = solve_lp(lp)
    else:
        sol = solve_diag_qp(DiagQp(lp, qp_weights), tol=QP_GAP_TOL)
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"subproblem came back {sol.status.value}")
    return ModelIterate(_snap(sol.point[: inst.n]), sol.point[inst.n]).bind(inst)


def _scheme_callbacks(inst: SvmInstance, spec: PenaltySpec, scheme: Scheme):
    """Returns (subgrad, solve, driver objective) for run_dca."""
    lam = inst.lam
    if scheme is Scheme.DCA1:
        def sub(st):
            return lam * np.array([penalties.psi_subgrad(spec, float(t)) for t in st.x])

        def solve(st, y):
            return _solve_to_iterate(build_dca1_lp(inst, spec, y), inst)

        obj = lambda st: approx_objective(inst, spec, st.x, st.b)
    elif scheme is Scheme.DCA2:
        def sub(st):
            return lam * np.array([penalties.l1_weight(spec, abs(float(t))) for t in st.x])

        def solve(st, w):
            return _solve_to_iterate(build_dca2_lp(inst, spec, w), inst)

        obj = lambda st: approx_objective(inst, spec, st.x, st.b)
    elif scheme is Scheme.DCA3:
        eps = penalties.DEFAULT_L2_PERTURBATION

        def sub(st):
            return lam * np.array(
                [penalties.l2_weight(spec, eps, float(t) ** 2) for t in st.x]
            )

        def solve(st, w):
            qp = build_dca3_qp(inst, spec, w)
            # warm start at the incumbent so the surrogate value cannot rise,
            # keeping the outer descent property even on an inexact solve
            warm = np.concatenate(
                [np.clip(st.x, -DCA3_BOX, DCA3_BOX), [st.b], st.xi, st.zeta]
            )
            try:
                sol = solve_diag_qp(qp, tol=QP_GAP_TOL, max_iter=2000, start=warm)
            except QpToleranceError as exc:
                sol = exc.best
            if sol.status is not LpStatus.OPTIMAL:
                raise RuntimeError(f"subproblem came back {sol.status.value}")
            return ModelIterate(_snap(sol.point[: inst.n]), sol.point[inst.n]).bind(inst)

        def obj(st):
            # descent is guaranteed for the perturbed surrogate, not the raw one
            pen = sum(
                penalties.value(spec, float(np.sqrt(t * t + eps))) for t in st.x
            )
            return hinge_loss(inst, st.x, st.b) + lam * pen
    elif scheme is Scheme.DCA4:
        def sub(st):
            return lam * np.array([penalties.pil_psi_subgrad(spec, float(t)) for t in st.x])

        def solve(st, y):
            return _solve_to_iterate(build_dca4_lp(inst, spec, y), inst)

        obj = lambda st: approx_objective(inst, spec, st.x, st.b)
    else:
        raise ValueError(f"unknown scheme {scheme}")
    return sub, solve, obj


@dataclass
class FsRunReport:
    scheme: str
    penalty: PenaltySpec | None
    lam: float
    sf: int
    sf_indices: list
    pwco_train: float
    pwco_test: float | None
    iterations: int
    final_objective: float
    wall_seconds: float
    theta_trace: list = field(default_factory=list)
    x: np.ndarray | None = None
    b: float = 0.0
    trace: dca.DcaTrace | None = None

    def to_dict(self, include_wall: bool = True) -> dict:
        d = {
            "scheme": self.scheme,
            "penalty": self.penalty.label() if self.penalty else None,
            "lambda": self.lam,
            "theta": self.penalty.theta if self.penalty else None,
            "sf": self.sf,
            "sf_indices": list(self.sf_indices),
            "pwco_train": self.pwco_train,
            "pwco_test": self.pwco_test,
            "iterations": self.iterations,
            "objective": self.final_objective,
            "theta_trace": list(self.theta_trace),
        }
        if include_wall:
            d["wall_seconds"] = self.wall_seconds
        return d

    def to_json(self, include_wall: bool = True) -> str:
        return json.dumps(self.to_dict(include_wall=include_wall), indent=2) + "\n"

    CSV_HEADER = (
        "scheme,penalty,lambda,theta,sf,pwco_train,pwco_test,iterations,objective,wall_seconds"
    )

    def to_csv_row(self, include_wall: bool = True) -> str:
        pw2 = "" if self.pwco_test is None else f"{self.pwco_test:.6g}"
        wall = f"{self.wall_seconds:.3f}" if include_wall else ""
        pen = self.penalty.label() if self.penalty else ""
        th = f"{self.penalty.theta:.6g}" if self.penalty else ""
        return (
            f"{self.scheme},{pen},{self.lam:.6g},{th},{self.sf},"
            f"{self.pwco_train:.6g},{pw2},{self.iterations},"
            f"{self.final_objective:.12g},{wall}"
        )


def pwco(x, b, dataset) -> float:
    """Percentage of points on their required strict side; ties count as wrong."""
    feats = np.asarray(dataset.features, dtype=float)
    labels = np.asarray(dataset.labels)
    if feats.shape[0] == 0:
        raise ValueError("pwco is undefined on an empty dataset")
    margin = feats @ np.asarray(x, dtype=float) - float(b)
    correct = np.where(labels > 0, margin > 0, margin < 0)
    return 100.0 * float(correct.sum()) / feats.shape[0]


def selected_features(x) -> tuple[int, list]:
    """Count and 1-based indices of coordinates above the reporting threshold."""
    x = np.asarray(x, dtype=float)
    idx = [int(i) + 1 for i in np.flatnonzero(np.abs(x) > SF_THRESHOLD)]
    return len(idx), idx


def _make_report(inst, spec, scheme_name, state, trace, wall, train_ds=None, test_ds=None,
                 theta_trace=()):
    sf, idx = selected_features(state.x)
    pw1 = pwco(state.x, state.b, train_ds) if train_ds is not None else _pwco_inst(inst, state)
    pw2 = pwco(state.x, state.b, test_ds) if test_ds is not None else None
    return FsRunReport(
        scheme=scheme_name,
        penalty=spec,
        lam=inst.lam,
        sf=sf,
        sf_indices=idx,
        pwco_train=pw1,
        pwco_test=pw2,
        iterations=trace.iterations if trace is not None else 0,
        final_objective=approx_objective(inst, spec, state.x, state.b)
        if spec is not None
        else l0_objective(inst, state.x, state.b),
        wall_seconds=wall,
        theta_trace=list(theta_trace),
        x=state.x.copy(),
        b=state.b,
        trace=trace,
    )


class _InstView:
    # lets pwco run straight off an SvmInstance when no Dataset was kept around
    def __init__(self, inst):
        self.features = np.vstack([inst.A, inst.B])
        self.labels = np.concatenate(
            [np.ones(inst.A.shape[0]), -np.ones(inst.B.shape[0])]
        )


def _pwco_inst(inst, state) -> float:
    return pwco(state.x, state.b, _InstView(inst))


def run_scheme(
    inst: SvmInstance,
    spec: PenaltySpec,
    scheme: Scheme,
    cfg: dca.DcaConfig,
    x0: ModelIterate | None = None,
    train_ds=None,
    test_ds=None,
) -> FsRunReport:
    """One full DC run of the requested scheme; multi-start per cfg.n_starts.

    x0 overrides the default start policy (hinge-LP solution for the first
    start, seeded uniform points for the rest).
    """
    if (scheme is Scheme.DCA4) != (spec.kind is PenaltyKind.PIL):
        raise ValueError(
            f"{scheme.value} is incompatible with penalty {spec.kind.value}"
        )
    sub, solve, obj = _scheme_callbacks(inst, spec, scheme)
    t0 = time.perf_counter()
    hinge0 = None

    def make_x0(seed):
        nonlocal hinge0
        if x0 is not None and seed == cfg.seed:
            return x0.bind(inst) if not isinstance(x0, BoundIterate) else x0
        if seed == cfg.seed:
            if hinge0 is None:
                hinge0 = hinge_start(inst)
            return hinge0
        return random_start(inst, seed)

    def run_one(start):
        return dca.run_dca(sub, solve, obj, start, cfg)

    score = lambda st: approx_objective(inst, spec, st.x, st.b)
    state, trace, _ = dca.multi_start(run_one, make_x0, cfg, score=score)
    wall = time.perf_counter() - t0
    return _make_report(inst, spec, scheme.value, state, trace, wall, train_ds, test_ds)


def one_sided_deriv(inst: SvmInstance, spec: PenaltySpec, x, b, i: int, side: Side) -> float:
    """One-sided partial derivative in x_i of hinge_loss + lambda * surrogate sum.

    At a hinge kink the side that increases the affine argument contributes its
    slope; the penalty contributes its own one-sided derivative.
    """
    x = np.asarray(x, dtype=float)
    right = side is Side.RIGHT
    lam = inst.lam
    total = lam * penalties.one_sided_value_deriv(spec, float(x[i]), side)
    for mat, coef, sgn_x in (
        (inst.A, (1.0 - lam) / inst.A.shape[0], -1.0),
        (inst.B, (1.0 - lam) / inst.B.shape[0], 1.0),
    ):
        w = sgn_x * (mat @ x) + (-sgn_x) * b + 1.0
        s = coef * sgn_x * mat[:, i]
        active = w > 1e-12
        total += float(s[active].sum())
        kink = np.abs(w) <= 1e-12
        if np.any(kink):
            sk = s[kink]
            total += float(np.maximum(sk, 0.0).sum() if right else np.minimum(sk, 0.0).sum())
    return total


def updating_theta_run(
    inst: SvmInstance,
    delta_theta: float,
    cfg: dca.DcaConfig,
    train_ds=None,
    test_ds=None,
) -> FsRunReport:
    """Outer loop that tightens theta across LP solves, capped at theta_star.

    Starts from the pure hinge solution with theta = 0 and grows theta by at
    least delta_theta (or up to the reciprocal of the running small-coordinate
    scale alpha) each round, linearizing the capped surrogate at the capped
    coordinates only.
    """
    if delta_theta <= 0:
        raise ValueError("delta_theta must be positive")
    th_star = theta_star(inst)
    t0 = time.perf_counter()

    def run_one(start):
        state = start
        best = (l0_objective(inst, state.x, state.b), state)
        alpha = np.inf
        theta = 0.0
        theta_trace = []
        trace = dca.DcaTrace()
        trace.objectives.append(best[0])
        for k in range(cfg.max_iter):
            ax = np.abs(state.x)
            inside = (ax > 0) & (ax < alpha)
            alpha = float(ax[inside].max()) if np.any(inside) else alpha
            inv_alpha = 0.0 if not np.isfinite(alpha) else 1.0 / alpha
            theta = min(th_star, max(inv_alpha, theta + delta_theta))
            theta_trace.append(theta)
            spec_k = PenaltySpec(PenaltyKind.CAP, theta)
            zbar = np.zeros(inst.n)
            for i in range(inst.n):
                if ax[i] > alpha:
                    zbar[i] = np.sign(state.x[i]) * inst.lam * theta
                elif ax[i] == alpha and ax[i] > 0:
                    fm = one_sided_deriv(inst, spec_k, state.x, state.b, i, Side.LEFT)
                    fp = one_sided_deriv(inst, spec_k, state.x, state.b, i, Side.RIGHT)
                    if state.x[i] * (fm + fp) < 0:
                        zbar[i] = np.sign(state.x[i]) * inst.lam * theta
            new = _solve_to_iterate(build_dca1_lp(inst, spec_k, zbar), inst)
            trace.objectives.append(approx_objective(inst, spec_k, new.x, new.b))
            trace.iterate_change.append(dca.iterate_distance(state, new))
            trace.iterations = k + 1
            done = dca.stop_check(state, new, cfg.stop_tol)
            state = new
            l0_now = l0_objective(inst, state.x, state.b)
            if l0_now < best[0]:
                best = (l0_now, state)
            # keep tightening until theta has reached its cap AND the iterates
            # have settled; earlier solutions remain candidates via `best`
            if done and theta >= th_star - 1e-12:
                trace.terminated_by = dca.Termination.TOLERANCE
                break
        else:
            trace.terminated_by = dca.Termination.MAX_ITER
        return best[1], trace, theta_trace, theta

    def make_x0(seed):
        return hinge_start(inst) if seed == cfg.seed else random_start(inst, seed)

    best = None
    for s in range(cfg.n_starts):
        state, trace, theta_trace, theta = run_one(make_x0(cfg.seed + s))
        # merged on the exact sparse objective: theta differs across starts,
        # so surrogate values are not comparable
        val = l0_objective(inst, state.x, state.b)
        if best is None or val < best[0]:
            best = (val, state, trace, theta_trace, theta)
    _, state, trace, theta_trace, theta = best
    wall = time.perf_counter() - t0
    spec = PenaltySpec(PenaltyKind.CAP, theta if theta > 0 else delta_theta)
    return _make_report(
        inst, spec, Scheme.DCA1.value, state, trace, wall, train_ds, test_ds,
        theta_trace=theta_trace,
    )
