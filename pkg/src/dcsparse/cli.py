"""Command-line front end: train, cross-validate, compare, oracle-check, report.

Every error path exits nonzero after printing a single `error:` line; outputs
are written atomically (temp file then rename).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import data, dca, exactpen, svmfs
from .penalties import PenaltyKind, PenaltySpec, parse_penalty

DEFAULT_LAMBDA_GRID = [0.001, 0.002, 0.003, 0.004, 0.05, 0.1, 0.25, 0.4, 0.7, 0.9]
DEFAULT_THETA_GRID = [0.001, 0.005, 0.01, 0.1, 0.5, 1, 2, 3, 5, 10, 20, 50, 100, 500]
DEFAULT_A_GRID = [1, 2, 3, 5, 10, 20, 30, 50, 100]
DEFAULT_COMPARE_PENALTIES = [
    "exp:theta=5",
    "lp-:theta=5,p=-2",
    "log:theta=5",
    "scad:theta=5,a=4",
    "cap:theta=5",
    "pil:theta=5,a=4",
]


class CliError(Exception):
    pass


def _write_atomic(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text: str):
    if args.out:
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _load(path: str) -> data.Dataset:
    if not os.path.exists(path):
        raise CliError(f"no such file: {path}")
    if path.endswith(".csv"):
        return data.load_csv(path, "label")
    return data.load_libsvm(path)


def _load_pair(args):
    train = _load(args.data)
    train.check_trainable()
    test = _load(args.test) if args.test else None
    if args.standardize:
        train, test = data.standardize(train, test)
    return train, test


def _cfg(args) -> dca.DcaConfig:
    return dca.DcaConfig(
        stop_tol=args.tol, max_iter=args.max_iter, n_starts=args.starts, seed=args.seed
    )


def _report_text(report: svmfs.FsRunReport, fmt: str) -> str:
    if fmt == "json":
        return report.to_json()
    return report.CSV_HEADER + "\n" + report.to_csv_row() + "\n"


def _single_run(inst, args, train_ds, test_ds) -> svmfs.FsRunReport:
    cfg = _cfg(args)
    if args.update_theta:
        return svmfs.updating_theta_run(
            inst, args.dtheta, cfg, train_ds=train_ds, test_ds=test_ds
        )
    if not args.penalty:
        raise CliError("--penalty is required unless --update-theta is set")
    spec = parse_penalty(args.penalty)
    scheme = svmfs.Scheme(args.scheme)
    return svmfs.run_scheme(
        inst, spec, scheme, cfg, train_ds=train_ds, test_ds=test_ds
    )


def cmd_train(args) -> int:
    train, test = _load_pair(args)
    inst = svmfs.SvmInstance.from_dataset(train, args.lam)
    report = _single_run(inst, args, train, test)
    _emit(args, _report_text(report, args.format))
    return 0


def _family_specs(family: str, theta: float, a_grid):
    kind = PenaltyKind(family)
    if kind is PenaltyKind.LP_MINUS:
        return [PenaltySpec(kind, theta, p=-2.0)]
    if kind in (PenaltyKind.SCAD, PenaltyKind.PIL):
        out = []
        for a in a_grid:
            if a <= 1:
                print(f"warning: skipping a={a} (requires a > 1)", file=sys.stderr)
                continue
            out.append(PenaltySpec(kind, theta, a=float(a)))
        return out
    return [PenaltySpec(kind, theta)]


def cmd_cv(args) -> int:
    train, _ = _load_pair(args)
    family = args.penalty.partition(":")[0] if args.penalty else "cap"
    scheme = svmfs.Scheme(args.scheme)
    folds = data.kfold_indices(train.m, args.folds, args.seed)
    cells = []
    for lam in args.grid_lambda:
        for theta in args.grid_theta:
            for spec in _family_specs(family, float(theta), args.grid_a):
                cells.append((float(lam), spec))
    if not cells:
        raise CliError("empty parameter grid")
    cfg = _cfg(args)
    mask = np.arange(train.m)
    results = []
    for lam, spec in cells:
        accs, sfs = [], []
        for f in range(len(folds)):
            val_idx = folds[f]
            tr_idx = np.setdiff1d(mask, val_idx)
            tr, val = train.subset(tr_idx), train.subset(val_idx)
            try:
                tr.check_trainable()
            except ValueError:
                raise CliError(f"fold {f} lost a class; use fewer folds")
            inst = svmfs.SvmInstance.from_dataset(tr, lam)
            rep = svmfs.run_scheme(inst, spec, scheme, cfg, train_ds=tr, test_ds=val)
            accs.append(rep.pwco_test)
            sfs.append(rep.sf)
        results.append((float(np.mean(accs)), float(np.mean(sfs)), lam, spec))
    # best mean accuracy; ties: fewer features, then smaller theta, then smaller lambda
    best = max(results, key=lambda r: (r[0], -r[1], -r[3].theta, -r[2]))
    lam, spec = best[2], best[3]
    inst = svmfs.SvmInstance.from_dataset(train, lam)
    report = svmfs.run_scheme(inst, spec, scheme, cfg, train_ds=train)
    payload = report.to_dict()
    payload["cv_mean_pwco"] = best[0]
    payload["cv_mean_sf"] = best[1]
    payload["cv_folds"] = args.folds
    _emit(args, json.dumps(payload, indent=2) + "\n")
    return 0


def cmd_compare(args) -> int:
    train, test = _load_pair(args)
    specs = [parse_penalty(p) for p in (args.penalty_list or DEFAULT_COMPARE_PENALTIES)]
    lines = ["scheme,penalty,mean_obj,std_obj,mean_sf,mean_pwco_train,mean_pwco_test"]
    for scheme in svmfs.Scheme:
        for spec in specs:
            if (scheme is svmfs.Scheme.DCA4) != (spec.kind is PenaltyKind.PIL):
                continue
            objs, sfs, pw1, pw2 = [], [], [], []
            for s in range(args.starts):
                cfg = dca.DcaConfig(
                    stop_tol=args.tol, max_iter=args.max_iter, n_starts=1,
                    seed=args.seed + s,
                )
                inst = svmfs.SvmInstance.from_dataset(train, args.lam)
                rep = svmfs.run_scheme(
                    inst, spec, scheme, cfg, train_ds=train, test_ds=test
                )
                objs.append(rep.final_objective)
                sfs.append(rep.sf)
                pw1.append(rep.pwco_train)
                pw2.append(rep.pwco_test)
            pw2s = "" if test is None else f"{np.mean(pw2):.4g}"
            lines.append(
                f"{scheme.value},{spec.label()},{np.mean(objs):.8g},{np.std(objs):.4g},"
                f"{np.mean(sfs):.4g},{np.mean(pw1):.4g},{pw2s}"
            )
    _emit(args, "\n".join(lines) + "\n")
    return 0


def cmd_oracle(args) -> int:
    train, test = _load_pair(args)
    if train.n > 15:
        raise CliError(f"oracle refused: n={train.n} exceeds 15")
    inst = svmfs.SvmInstance.from_dataset(train, args.lam)
    boxed = exactpen.BoxedInstance(inst, args.mbox)
    oracle = exactpen.oracle_report(boxed)
    payload = {"oracle": oracle.to_dict()}
    if args.penalty or args.update_theta:
        run = _single_run(inst, args, train, test)
        payload["run"] = run.to_dict()
        payload["gap"] = svmfs.l0_objective(inst, run.x, run.b) - oracle.final_objective
    _emit(args, json.dumps(payload, indent=2) + "\n")
    return 0


def cmd_report(args) -> int:
    train, test = _load_pair(args)
    inst = svmfs.SvmInstance.from_dataset(train, args.lam)
    report = _single_run(inst, args, train, test)
    if report.trace is None:
        raise CliError("run produced no trace")
    _emit(args, report.trace.to_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="dcsparse", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, need_data=True):
        if need_data:
            p.add_argument("--data", required=True, help="training set (libsvm or .csv)")
        p.add_argument("--test", help="held-out set")
        p.add_argument("--scheme", choices=[s.value for s in svmfs.Scheme], default="dca1")
        p.add_argument("--penalty", help="e.g. cap:theta=3 or scad:theta=2,a=4")
        p.add_argument("--lambda", dest="lam", type=float, default=0.1)
        p.add_argument("--update-theta", action="store_true")
        p.add_argument("--dtheta", type=float, default=1.0)
        p.add_argument("--tol", type=float, default=1e-5)
        p.add_argument("--max-iter", type=int, default=500)
        p.add_argument("--starts", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--standardize", action="store_true")
        p.add_argument("--format", choices=["json", "csv"], default="json")
        p.add_argument("--out")

    p = sub.add_parser("train", help="one training run")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", help="cross-validated parameter sweep")
    common(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--grid-lambda", type=float, nargs="+", default=DEFAULT_LAMBDA_GRID)
    p.add_argument("--grid-theta", type=float, nargs="+", default=DEFAULT_THETA_GRID)
    p.add_argument("--grid-a", type=float, nargs="+", default=DEFAULT_A_GRID)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("compare", help="scheme-by-penalty comparison table")
    common(p)
    p.add_argument(
        "--penalty-list", action="append",
        help="repeatable full penalty spec; defaults to one per family",
    )
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="exact sparse optimum by support enumeration")
    common(p)
    p.add_argument("--mbox", type=float, default=10.0, help="box bound for the oracle")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="emit the iteration trace as CSV")
    common(p)
    p.set_defaults(func=cmd_report)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:
        msg = str(exc).replace("\n", " ") or type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
