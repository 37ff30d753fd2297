import numpy as np
import pytest

from dcsparse.dca import (
    DcaConfig,
    DcaRunError,
    DcaTrace,
    Termination,
    multi_start,
    run_dca,
    stop_check,
)


class TestConfig:
    def test_defaults(self):
        cfg = DcaConfig()
        assert cfg.stop_tol == 1e-5 and cfg.max_iter == 500 and cfg.n_starts == 1

    def test_validation(self):
        with pytest.raises(ValueError):
            DcaConfig(stop_tol=0.0)
        with pytest.raises(ValueError):
            DcaConfig(max_iter=0)


class TestStopCheck:
    def test_equal_states(self):
        x = np.array([1.0, 2.0])
        assert stop_check(x, x, 1e-12)

    def test_unit_move_from_origin(self):
        assert not stop_check(np.zeros(2), np.array([1.0, 0.0]), 1e-5)

    def test_threshold_straddle(self):
        prev = np.array([3.0, 4.0])  # norm 5, so the budget is tol * 6
        tol = 1e-5
        over = prev + np.array([2e-5 * 6.0, 0.0])
        under = prev + np.array([0.5e-5 * 6.0, 0.0])
        assert not stop_check(prev, over, tol)
        assert stop_check(prev, under, tol)


class TestRunDca:
    def test_state_independent_subproblem_converges_fast(self):
        # H = 0 and a convexified problem ignoring the state: the second
        # iterate repeats the first
        target = np.array([2.0, -1.0])
        final, trace = run_dca(
            lambda s: None,
            lambda s, y: target,
            lambda s: float(np.sum((np.asarray(s) - target) ** 2)),
            np.zeros(2),
            DcaConfig(),
        )
        assert trace.iterations <= 2
        assert np.array_equal(final, target)
        assert trace.terminated_by in (Termination.FIXED_POINT, Termination.TOLERANCE)

    def test_fixed_point_detected_in_one_iteration(self):
        x0 = np.array([1.0])
        final, trace = run_dca(
            lambda s: None, lambda s, y: s, lambda s: 5.0, x0, DcaConfig()
        )
        assert trace.terminated_by is Termination.FIXED_POINT
        assert trace.iterations == 1

    def test_objective_increase_aborts(self):
        state = {"k": 0}

        def solve(s, y):
            state["k"] += 1
            return np.array([float(state["k"])])

        with pytest.raises(DcaRunError):
            run_dca(
                lambda s: None, solve, lambda s: float(np.asarray(s)[0]),
                np.zeros(1), DcaConfig(),
            )

    def test_solver_error_carries_iteration(self):
        def bad(s, y):
            raise RuntimeError("boom")

        with pytest.raises(DcaRunError) as err:
            run_dca(lambda s: None, bad, lambda s: 0.0, np.zeros(1), DcaConfig())
        assert err.value.iteration == 0

    def test_trace_includes_initial_objective(self):
        _, trace = run_dca(
            lambda s: None, lambda s, y: s, lambda s: 7.5, np.zeros(1), DcaConfig()
        )
        assert trace.objectives[0] == 7.5
        assert len(trace.objectives) == trace.iterations + 1


class TestMultiStart:
    def test_merges_by_best_objective(self):
        # each start lands on its seed value; best is the most negative
        def run_one(x0):
            trace = DcaTrace(objectives=[float(x0)], iterations=0)
            return x0, trace

        cfg = DcaConfig(n_starts=3, seed=10)
        final, trace, idx = multi_start(run_one, lambda seed: -float(seed), cfg)
        assert final == -12.0 and idx == 2

    def test_tie_goes_to_lowest_start(self):
        def run_one(x0):
            return x0, DcaTrace(objectives=[0.0], iterations=0)

        cfg = DcaConfig(n_starts=4, seed=0)
        _, _, idx = multi_start(run_one, lambda seed: seed, cfg)
        assert idx == 0

    def test_deterministic_across_calls(self):
        def run_one(x0):
            rng = np.random.default_rng(int(x0))
            v = rng.normal()
            return v, DcaTrace(objectives=[v], iterations=0)

        cfg = DcaConfig(n_starts=5, seed=3)
        a = multi_start(run_one, lambda seed: seed, cfg)
        b = multi_start(run_one, lambda seed: seed, cfg)
        assert a == b


def test_trace_csv():
    trace = DcaTrace(
        objectives=[3.0, 2.0, 2.0], iterate_change=[1.0, 0.0], iterations=2,
        terminated_by=Termination.FIXED_POINT,
    )
    lines = trace.to_csv().strip().split("\n")
    assert lines[0] == "iteration,objective,iterate_change"
    assert lines[1].startswith("0,3,")
    assert len(lines) == 4
