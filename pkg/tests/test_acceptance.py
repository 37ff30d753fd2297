"""End-to-end acceptance gate.

Each test prints a single PASS/FAIL line on the real stderr so the verdicts
survive pytest capture. Heavy shared computations are memoized at module
level so the descent audit can reuse traces from earlier criteria.
"""

import atexit
import functools
import os
import sys
import time

import numpy as np
import pytest

from dcsparse import data as dmod
from dcsparse import dca, exactpen, penalties, subsolver, svmfs
from dcsparse.exactpen import BoxedInstance
from dcsparse.penalties import PenaltyKind, PenaltySpec, Side
from helpers import random_box_lp, random_svm_instance, vertex_enum_lp

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


_VERDICTS = []


@atexit.register
def _emit_verdicts():
    # deferred until capture is torn down so the lines reach the real stderr
    for line in sorted(_VERDICTS):
        sys.__stderr__.write(line + "\n")
    sys.__stderr__.flush()


def _record(num, word, desc):
    _VERDICTS.append(f"ACCEPTANCE {num:2d}: {word} - {desc}")


def criterion(num, desc):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException as exc:
                word = "SKIP" if isinstance(exc, pytest.skip.Exception) else "FAIL"
                _record(num, word, desc)
                raise
            _record(num, "PASS", desc)
        return wrapper
    return deco


# ---------------------------------------------------------------- shared runs

LAMBDAS = (0.05, 0.1, 0.3)


def _small_instance(i):
    rng = np.random.default_rng(100 + i)
    return svmfs.SvmInstance(
        rng.uniform(-1, 1, (10, 6)), rng.uniform(-1, 1, (10, 6)), LAMBDAS[i % 3]
    )


@functools.lru_cache(maxsize=1)
def _oracle_runs():
    """20 updating-theta runs against the support-enumeration oracle."""
    out = []
    t0 = time.perf_counter()
    for i in range(20):
        inst = _small_instance(i)
        oracle_val = exactpen.support_enum_oracle(BoxedInstance(inst, 10.0))[0]
        rep = svmfs.updating_theta_run(
            inst, 1.0, dca.DcaConfig(n_starts=5, seed=i)
        )
        out.append((inst, oracle_val, rep))
    return out, time.perf_counter() - t0


@functools.lru_cache(maxsize=1)
def _fixed_theta_runs():
    """DCA1 with Cap and Scad at fixed theta on the same 20 instances."""
    specs = [
        PenaltySpec(PenaltyKind.CAP, 2.0),
        PenaltySpec(PenaltyKind.SCAD, 5.0, a=4.0),
    ]
    out = []
    for i in range(20):
        inst = _small_instance(i)
        for spec in specs:
            rep = svmfs.run_scheme(
                inst, spec, svmfs.Scheme.DCA1,
                dca.DcaConfig(max_iter=500, n_starts=1, seed=i),
            )
            out.append(rep)
    return out


def _feature_selection_data(seed):
    # true separator uses only the first 3 of 50 coordinates
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (300, 50))
    w = np.zeros(50)
    w[:3] = [2.0, -1.5, 1.0]
    y = np.sign(X @ w + 0.1 * rng.normal(size=300))
    y[y == 0] = 1.0
    return X[:200], y[:200], X[200:], y[200:]


def _test_accuracy(X, y, x, b):
    pred = np.sign(X @ np.asarray(x) - b)
    return 100.0 * float(np.mean((pred == y) & (pred != 0)))


@functools.lru_cache(maxsize=1)
def _feature_selection_runs():
    """CV-selected DCA1-Cap over 10 seeds of the synthetic 3-sparse task.

    The full-data refit warm-starts from the best validation-fold model of
    the winning cell; a cold hinge start on 200 points frequently lands in
    a dense local solution that the fold models avoid.
    """
    grid = [(0.5, 1.0), (0.7, 1.0)]
    results = []
    traces = []
    t0 = time.perf_counter()
    for seed in range(10):
        Xtr, ytr, Xte, yte = _feature_selection_data(seed)
        folds = dmod.kfold_indices(200, 2, seed)
        best = None
        for lam, theta in grid:
            accs, sfs, models = [], [], []
            for fi in range(len(folds)):
                va = folds[fi]
                tr = np.concatenate([folds[j] for j in range(len(folds)) if j != fi])
                Xa, ya = Xtr[tr], ytr[tr]
                inst = svmfs.SvmInstance(Xa[ya > 0], Xa[ya < 0], lam)
                rep = svmfs.run_scheme(
                    inst, PenaltySpec(PenaltyKind.CAP, theta),
                    svmfs.Scheme.DCA1, dca.DcaConfig(n_starts=1, seed=seed),
                )
                traces.append(rep.trace)
                acc = _test_accuracy(Xtr[va], ytr[va], rep.x, rep.b)
                accs.append(acc)
                sfs.append(rep.sf)
                models.append((acc, -rep.sf, rep))
            key = (np.mean(accs), -np.mean(sfs), -theta, -lam)
            if best is None or key > best[0]:
                warm = max(models, key=lambda m: (m[0], m[1]))[2]
                best = (key, lam, theta, warm)
        _, lam, theta, warm = best
        inst = svmfs.SvmInstance(Xtr[ytr > 0], Xtr[ytr < 0], lam)
        rep = svmfs.run_scheme(
            inst, PenaltySpec(PenaltyKind.CAP, theta),
            svmfs.Scheme.DCA1, dca.DcaConfig(n_starts=1, seed=seed),
            x0=svmfs.ModelIterate(np.asarray(warm.x), warm.b),
        )
        traces.append(rep.trace)
        results.append((rep.sf, _test_accuracy(Xte, yte, rep.x, rep.b)))
    return results, traces, time.perf_counter() - t0


# ------------------------------------------------------------------ criteria


@criterion(1, "updating-theta DCA matches the enumeration oracle on >= 16/20")
def test_oracle_equivalence():
    runs, elapsed = _oracle_runs()
    hits = sum(
        1 for inst, oracle_val, rep in runs
        if abs(rep.final_objective - oracle_val) <= 1e-6
    )
    assert hits >= 16, f"only {hits}/20 runs reached the oracle objective"
    assert elapsed < 60.0, f"runs took {elapsed:.1f}s"


@criterion(3, "fixed-theta runs terminate by tolerance or fixed point within 500")
def test_finite_termination():
    for rep in _fixed_theta_runs():
        assert rep.trace.terminated_by in (
            dca.Termination.TOLERANCE, dca.Termination.FIXED_POINT,
        )
        assert rep.iterations <= 500


@criterion(4, "penalty ordering chain and both scad/cap branches at 1e-12")
def test_penalty_ordering():
    grid = np.arange(0.0, 10.0 + 1e-12, 0.01)
    # matched slopes: theta_cap = theta_exp = -p*theta_lp- = 2*theta_scad/(a+1)
    cap = PenaltySpec(PenaltyKind.CAP, 2.0)
    exp = PenaltySpec(PenaltyKind.EXP, 2.0)
    lpm = PenaltySpec(PenaltyKind.LP_MINUS, 1.0, p=-2.0)
    scad = PenaltySpec(PenaltyKind.SCAD, 5.0, a=4.0)
    for t in grid:
        t = float(t)
        v_lpm = penalties.value(lpm, t)
        v_exp = penalties.value(exp, t)
        v_scad = penalties.value(scad, t)
        v_cap = penalties.value(cap, t)
        chain = [0.0, v_lpm, v_exp, v_scad, v_cap, float(penalties.step(t))]
        for lo, hi in zip(chain, chain[1:]):
            assert lo <= hi + 1e-12, f"ordering broken at t={t}: {chain}"
    # scad below cap when 2*theta_s/(a+1) <= theta_c; above when theta_c <= theta_s/a
    below = (PenaltySpec(PenaltyKind.SCAD, 5.0, a=4.0), PenaltySpec(PenaltyKind.CAP, 2.0))
    above = (PenaltySpec(PenaltyKind.SCAD, 5.0, a=4.0), PenaltySpec(PenaltyKind.CAP, 1.25))
    for t in grid:
        t = float(t)
        assert penalties.value(below[0], t) <= penalties.value(below[1], t) + 1e-12
        assert penalties.value(above[1], t) <= penalties.value(above[0], t) + 1e-12


@criterion(5, "psi midpoint convexity on 1e4 random pairs per penalty")
def test_psi_convexity():
    specs = [
        PenaltySpec(PenaltyKind.EXP, 2.0),
        PenaltySpec(PenaltyKind.LP_PLUS, 1.5, p=0.5, eps=1e-2),
        PenaltySpec(PenaltyKind.LP_MINUS, 1.0, p=-2.0),
        PenaltySpec(PenaltyKind.LOG, 2.0, eps=0.1),
        PenaltySpec(PenaltyKind.SCAD, 2.0, a=4.0),
        PenaltySpec(PenaltyKind.CAP, 2.0),
    ]
    rng = np.random.default_rng(7)
    for spec in specs:
        et = penalties.eta(spec)

        def psi(t):
            return et * abs(t) - penalties.value(spec, t)

        pairs = rng.uniform(-5.0, 5.0, (10_000, 2))
        for s, t in pairs:
            mid = psi(0.5 * (s + t))
            assert mid <= 0.5 * (psi(s) + psi(t)) + 1e-10, (
                f"{spec.label()}: psi not midpoint-convex at ({s}, {t})"
            )


@criterion(6, "lifted objective agrees with the direct one at z = |x|")
def test_lifted_equivalence():
    rng = np.random.default_rng(11)
    spec = PenaltySpec(PenaltyKind.CAP, 2.0)
    for _ in range(5):
        inst = random_svm_instance(rng, 4, 6, 6, float(rng.uniform(0.05, 0.4)))
        state = svmfs.hinge_start(inst)
        for _ in range(10):
            direct = svmfs.approx_objective(inst, spec, state.x, state.b)
            z = np.abs(np.asarray(state.x))
            lifted = svmfs.hinge_loss(inst, state.x, state.b) + inst.lam * sum(
                penalties.value(spec, float(t)) for t in z
            )
            assert abs(lifted - direct) <= 1e-14
            w = np.array(
                [inst.lam * penalties.l1_weight(spec, float(t)) for t in z]
            )
            sol = subsolver.solve_lp(svmfs.build_dca2_lp(inst, spec, w))
            new = svmfs.ModelIterate(
                sol.point[: inst.n], float(sol.point[inst.n])
            )
            moved = np.linalg.norm(new.x - state.x) + abs(new.b - state.b)
            if moved <= 1e-10:
                break
            state = new


@criterion(7, "capped/scad penalties match the l0 optimum past the threshold")
def test_threshold_equivalence():
    rng = np.random.default_rng(23)
    res = 1e-3
    dims = [1] * 10 + [2] * 5
    for n in dims:
        lam = float(rng.uniform(0.1, 0.5))
        inst = random_svm_instance(rng, n, 4, 4, lam)
        boxed = BoxedInstance(inst, 1.0)
        kappa = exactpen.kappa_svm(inst)
        oracle_val = exactpen.support_enum_oracle(boxed)[0]
        theta = 1.1 * kappa / lam
        grid_val = exactpen.grid_oracle_capped(
            boxed, PenaltySpec(PenaltyKind.CAP, theta), res
        )[0]
        assert abs(grid_val - oracle_val) <= 2.0 * res * kappa + 1e-12
        a = 4.0
        theta_scad = a * 1.1 * (2.0 / 1.0 + kappa / lam)
        assert exactpen.scad_equivalence_probe(
            boxed, a, theta_scad, resolution=res
        )


@criterion(8, "LP solver matches vertex enumeration; QP returns certified gaps")
def test_subsolver_correctness():
    rng = np.random.default_rng(31)
    solved = 0
    while solved < 50:
        lp = random_box_lp(rng)
        oracle_val, _ = vertex_enum_lp(lp)
        sol = subsolver.solve_lp(lp)
        assert sol.status is subsolver.LpStatus.OPTIMAL
        assert abs(sol.objective_value - oracle_val) <= 1e-8
        solved += 1
    certified = 0
    for k in range(10):
        lp = random_box_lp(rng)
        qp = subsolver.DiagQp(lp, rng.uniform(0.5, 2.0, lp.objective.size))
        try:
            sol = subsolver.solve_diag_qp(qp, tol=1e-6, max_iter=5000)
        except subsolver.QpToleranceError:
            continue  # refusing to return uncertified is the contract
        assert sol.gap is not None and sol.gap <= 1e-6
        certified += 1
    assert certified >= 5, f"only {certified}/10 QPs certified"


@criterion(9, "one-sided derivatives match finite differences on 100 points")
def test_one_sided_derivatives():
    specs = [
        PenaltySpec(PenaltyKind.EXP, 2.0),
        PenaltySpec(PenaltyKind.LP_PLUS, 1.5, p=0.5, eps=1e-2),
        PenaltySpec(PenaltyKind.LP_MINUS, 1.0, p=-2.0),
        PenaltySpec(PenaltyKind.LOG, 2.0, eps=0.1),
        PenaltySpec(PenaltyKind.SCAD, 2.0, a=4.0),
        PenaltySpec(PenaltyKind.CAP, 2.0),
        PenaltySpec(PenaltyKind.PIL, 2.0, a=4.0),
    ]
    h = 1e-7
    rng = np.random.default_rng(41)
    for spec in specs:
        count = 0
        while count < 100:
            t = float(rng.uniform(-3.0, 3.0))
            # stay clear of the kinks so the difference quotient is one-sided
            if abs(t) < 1e-4 or any(
                abs(abs(t) - kink) < 1e-4
                for kink in (1.0 / spec.theta, spec.a / spec.theta if spec.a else np.inf)
            ):
                continue
            right = (penalties.value(spec, t + h) - penalties.value(spec, t)) / h
            left = (penalties.value(spec, t) - penalties.value(spec, t - h)) / h
            assert abs(penalties.one_sided_value_deriv(spec, t, Side.RIGHT) - right) <= 1e-5
            assert abs(penalties.one_sided_value_deriv(spec, t, Side.LEFT) - left) <= 1e-5
            count += 1


@criterion(10, "CV-selected sparse SVM recovers a small accurate feature set")
def test_synthetic_feature_selection():
    results, _, elapsed = _feature_selection_runs()
    sfs = [r[0] for r in results]
    accs = [r[1] for r in results]
    assert float(np.median(sfs)) <= 6.0, f"median SF {np.median(sfs)} (per-seed {sfs})"
    assert float(np.median(accs)) >= 90.0, f"median PWCO {np.median(accs)} (per-seed {accs})"
    assert elapsed < 300.0, f"took {elapsed:.0f}s"


@criterion(11, "ionosphere benchmark (optional, needs local data)")
def test_ionosphere_optional():
    candidates = [
        os.path.join(FIXTURES, "ionosphere.libsvm"),
        os.path.join(FIXTURES, "ionosphere.csv"),
        "/root/data/ionosphere.libsvm",
    ]
    path = next((p for p in candidates if os.path.exists(p)), None)
    if path is None:
        pytest.skip("ionosphere dataset not available locally")
    ds = (
        dmod.load_csv(path, "label") if path.endswith(".csv")
        else dmod.load_libsvm(path)
    )
    rng = np.random.default_rng(0)
    perm = rng.permutation(ds.m)
    cut = int(0.7 * ds.m)
    train, test = ds.subset(perm[:cut]), ds.subset(perm[cut:])
    inst = svmfs.SvmInstance.from_dataset(train, 0.1)
    rep = svmfs.updating_theta_run(
        inst, 1.0, dca.DcaConfig(n_starts=5, seed=0), train_ds=train, test_ds=test
    )
    assert 1 <= rep.sf <= 5
    assert abs(rep.pwco_test - 83.7) <= 5.0


def _assert_nonincreasing(objs):
    for prev, cur in zip(objs, objs[1:]):
        assert cur <= prev + 1e-9 * max(1.0, abs(prev)), (
            f"objective rose from {prev} to {cur}"
        )


# run last: audits the traces accumulated by the runs above
@criterion(2, "every recorded objective trace is nonincreasing")
def test_zz_descent_audit():
    fixed = list(_fixed_theta_runs())
    fixed_traces = [rep.trace for rep in fixed]
    fixed_traces.extend(_feature_selection_runs()[1])
    assert fixed_traces
    for tr in fixed_traces:
        assert tr.objectives, "empty trace"
        _assert_nonincreasing(tr.objectives)
    # tightening runs change the objective whenever theta moves, so descent
    # is only required along stretches where theta stayed put
    audited = 0
    for _, _, rep in _oracle_runs()[0]:
        objs = rep.trace.objectives[1:]  # entry 0 is the exact-count start value
        thetas = rep.theta_trace
        assert len(objs) == len(thetas)
        start = 0
        for k in range(1, len(thetas) + 1):
            if k == len(thetas) or thetas[k] != thetas[start]:
                _assert_nonincreasing(objs[start:k])
                audited += max(0, k - start - 1)
                start = k
    assert audited > 0
