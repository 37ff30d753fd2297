"""Independent brute-force oracles used only by the test suite."""

import itertools

import numpy as np


def lp_as_inequalities(lp):
    """Stack rows and finite bounds into a single G v <= h system."""
    G = [lp.rows] if lp.rows.size else []
    h = [lp.rhs] if lp.rhs.size else []
    n = lp.n_vars
    eye = np.eye(n)
    lo = np.isfinite(lp.lower)
    hi = np.isfinite(lp.upper)
    if np.any(lo):
        G.append(-eye[lo])
        h.append(-lp.lower[lo])
    if np.any(hi):
        G.append(eye[hi])
        h.append(lp.upper[hi])
    return np.vstack(G), np.concatenate(h)


def vertex_enum_lp(lp, tol=1e-9):
    """Minimum of the LP objective over all feasible basic points.

    Exact for bounded feasible regions (every optimum sits at a vertex).
    Returns (objective, point) or (None, None) when no feasible vertex exists.
    """
    G, h = lp_as_inequalities(lp)
    n = lp.n_vars
    best_val, best_pt = None, None
    for combo in itertools.combinations(range(G.shape[0]), n):
        A = G[list(combo)]
        if abs(np.linalg.det(A)) < 1e-10:
            continue
        v = np.linalg.solve(A, h[list(combo)])
        if np.all(G @ v <= h + tol):
            val = float(lp.objective @ v)
            if best_val is None or val < best_val:
                best_val, best_pt = val, v
    return best_val, best_pt


def random_box_lp(rng, n_max=5, m_max=8):
    """A feasible, bounded random LP: box bounds plus rows satisfied at an
    interior point by construction."""
    from dcsparse.subsolver import LinearProgram

    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(0, m_max + 1))
    lower = rng.uniform(-3.0, 0.0, n)
    upper = lower + rng.uniform(0.5, 4.0, n)
    x0 = rng.uniform(lower, upper)
    rows = rng.normal(size=(m, n))
    rhs = rows @ x0 + rng.uniform(0.0, 2.0, m)
    objective = rng.normal(size=n)
    return LinearProgram(objective, rows, rhs, lower, upper)


def random_svm_instance(rng, n, na, nb, lam):
    from dcsparse.svmfs import SvmInstance

    return SvmInstance(
        rng.uniform(-1.0, 1.0, (na, n)), rng.uniform(-1.0, 1.0, (nb, n)), lam
    )
