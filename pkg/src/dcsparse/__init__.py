"""Sparse optimization toolkit: concave surrogates of the zero-norm, DC
iteration schemes, exact-penalty thresholds, and feature selection in linear
SVM with bundled LP/QP subproblem solvers."""

from .dca import DcaConfig, DcaTrace, Termination, run_dca, stop_check
from .data import Dataset, kfold_indices, load_csv, load_libsvm, save_libsvm, standardize
from .exactpen import (
    BoxedInstance,
    capped_theta_from_tau,
    grid_oracle_capped,
    kappa_svm,
    p_penalty,
    scad_equivalence_probe,
    support_enum_oracle,
    theta_zero_lower_bound,
)
from .penalties import PenaltyKind, PenaltySpec, Side, parse_penalty
from .subsolver import DiagQp, LinearProgram, LpSolution, LpStatus, solve_diag_qp, solve_lp
from .svmfs import (
    FsRunReport,
    ModelIterate,
    Scheme,
    SvmInstance,
    approx_objective,
    hinge_loss,
    l0_objective,
    pwco,
    run_scheme,
    selected_features,
    theta_star,
    updating_theta_run,
)

__version__ = "0.1.0"
