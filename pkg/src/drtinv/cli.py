"""Command-line front end: ``drtinv generate | invert | sweep | analyze``.

Flags override values from ``--config`` (``key = value`` lines), which override
built-in defaults.  Output goes to ``--out``, else ``$DRTINV_OUTPUT_DIR``, else
the working directory.  Exit codes: 0 success, 1 runtime failure, 2 usage.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import error_analysis as ea
from .estimator import data_vector
from .exceptions import ConfigurationError, SelectionError
from .kernels import MATRIX_NAMES, FrequencyGrid, QuadratureRule, build_matrix
from .models import LNProcess, ProcessMix, RQProcess
from .param_choice import (
    NCP_RULES, SOLVERS, LCurvePoint, choose_lambda_ncp, lambda_grid_default,
    lcurve_corner, ncp, regularized_solve, sweep,
)
from .regularization import make_smoothing, picard_data, picard_growth_index, svd
from .simulate import (
    DATASETS, DEFAULT_NOISE, MODELS, add_noise, dataset, default_frequencies, exact_impedance,
    stacked_data, write_impedance_csv, write_truth_csv,
)

OUTPUT_ENV = "DRTINV_OUTPUT_DIR"
AMPLIFICATION_FLAG = 1e3


class RunFailure(RuntimeError):
    """A command failed after its arguments were accepted."""


def parse_seeds(text):
    """``"0..49"``, ``"1,4,9"`` or a mix such as ``"0..2,7"``."""
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value")
            key, value = (p.strip() for p in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _fmt(v):
    return f"{v:.17e}"


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args):
    path = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RunFailure(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise RunFailure(f"output directory {path} is not writable")
    return path


def _tag(eta):
    return f"eta{eta:.0e}"


# -- generate ----------------------------------------------------------------------

def cmd_generate(args):
    out = _out_dir(args)
    mix, f = dataset(args.dataset, args.model)
    freq, z1, z2 = exact_impedance(mix, drop_first=args.drop_first)
    stem = f"{args.dataset}_{args.model}"
    write_impedance_csv(out / f"{stem}_exact.csv", freq, z1, z2)
    if args.truth:
        sgrid = build_matrix(args.matrix, freq).sgrid
        write_truth_csv(out / f"{stem}_truth.csv", sgrid.s_values, f(sgrid.s_values))
    m = len(freq)
    for seed in args.seeds:
        b = add_noise(stacked_data(z1, z2), args.noise, seed).b
        write_impedance_csv(out / f"{stem}_{_tag(args.noise)}_seed{seed:03d}.csv", freq, b[:m], b[m:])
    return 0


# -- invert --------------------------------------------------------------------------

def _read_impedance(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise RunFailure(f"{path}: expected columns omega,Z1,Z2")
    return FrequencyGrid(data[:, 0]), data[:, 1], data[:, 2]


def _select(A, b, L, args):
    if args.selection == "fixed":
        if args.lam is None:
            raise RunFailure("--selection fixed needs --lam")
        return float(args.lam), {}
    grid = lambda_grid_default(args.n_lambdas, args.log_lambda_min, args.log_lambda_max)
    if args.selection == "ncp":
        lam, diag = choose_lambda_ncp(A, b, grid, L, args.solver, args.p, args.ncp_rule)
        return lam, {"no_pass": diag.no_pass, "skipped": diag.skipped}
    points = []
    for lam in grid:
        try:
            x = regularized_solve(A, b, lam, L, args.solver)
        except (np.linalg.LinAlgError, RuntimeError):
            continue
        points.append(LCurvePoint(float(lam), float(np.linalg.norm(b - A @ x)), float(np.linalg.norm(L @ x))))
    return lcurve_corner(points), {}


def _json_float(v):
    v = float(v)
    return v if np.isfinite(v) else None


def cmd_invert(args):
    out = _out_dir(args)
    truth = None
    if args.input:
        freq, z1, z2 = _read_impedance(args.input)
        stem = Path(args.input).stem
    else:
        if args.dataset is None:
            raise RunFailure("give --dataset or --input")
        mix, f = dataset(args.dataset, args.model)
        freq, z1, z2 = exact_impedance(mix, drop_first=args.drop_first)
        b = add_noise(stacked_data(z1, z2), args.noise, args.seed).b
        z1, z2 = b[: len(freq)], b[len(freq):]
        truth = f
        stem = f"{args.dataset}_{args.model}_{_tag(args.noise)}_seed{args.seed:03d}"
    rule = args.rule if args.matrix.endswith("s") else None
    kernel = build_matrix(args.matrix, freq, rule)
    A = kernel.entries
    b = data_vector(args.matrix, z1, z2)
    L = make_smoothing(args.order, A.shape[1])
    stem = f"{stem}_{args.matrix}_L{args.order}_{args.solver}_{args.selection}"
    report = {
        "matrix": args.matrix, "rule": kernel.rule.value, "L_order": args.order,
        "solver": args.solver, "selection": args.selection, "p": args.p,
    }
    try:
        lam, extra = _select(A, b, L, args)
        x = regularized_solve(A, b, lam, L, args.solver)
    except (RunFailure, SelectionError, ConfigurationError, np.linalg.LinAlgError, RuntimeError) as exc:
        report.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        _write_json(out / f"{stem}_report.json", report)
        raise RunFailure(str(exc)) from exc

    s = kernel.sgrid.s_values
    _write_rows(out / f"{stem}_solution.csv", ["s", "x"], zip(s, x))
    r = b - A @ x
    curve = ncp(r, args.p)
    norm_a = svd(A).s[0]
    amplification = norm_a * np.linalg.norm(x) / max(np.linalg.norm(b), np.finfo(float).tiny)
    peaks = ea.peak_indices(x)
    report.update(
        status="ok",
        **extra,
        **{
            "lambda": float(lam),
            "residual_norm": float(np.linalg.norm(r)),
            "seminorm": float(np.linalg.norm(L @ x)),
            "ks_statistic": curve.ks_statistic,
            "ks_critical": curve.critical,
            "ncp_passes": curve.passes,
            "min_x": float(x.min()),
            "amplification": _json_float(amplification),
            "extreme_amplification": bool(not amplification < AMPLIFICATION_FLAG),
            "peaks_s": [float(s[i]) for i in peaks],
            "s_error": None,
        },
    )
    if truth is not None and kernel.rule is not QuadratureRule.TRAP_T:
        report["s_error"] = float(kernel.sgrid.delta_s * np.abs(x - truth(s)).sum())
    _write_json(out / f"{stem}_report.json", report)
    return 0


# -- sweep ---------------------------------------------------------------------------

def cmd_sweep(args):
    out = _out_dir(args)
    if args.matrix[:2] in ("A1", "A2") or not args.matrix.endswith("s"):
        raise RunFailure("sweeps compare against f(s) and need a stacked s-matrix (A3s or A4s)")
    mix, f = dataset(args.dataset, args.model)
    freq, z1, z2 = exact_impedance(mix, drop_first=args.drop_first)
    kernel = build_matrix(args.matrix, freq, args.rule)
    A = kernel.entries
    exact = stacked_data(z1, z2)
    bs = [add_noise(exact, args.noise, seed).b for seed in args.seeds]
    truth = f(kernel.sgrid.s_values)
    grid = lambda_grid_default(args.n_lambdas, args.log_lambda_min, args.log_lambda_max)
    worst = 1.0
    for order in args.orders:
        labels = {
            "dataset": args.dataset, "model": args.model, "matrix": args.matrix,
            "L_order": order, "solver": args.solver, "noise": args.noise,
        }
        res = sweep(
            A, bs, grid, truth, L=make_smoothing(order, A.shape[1]), solver=args.solver,
            error_weight=kernel.sgrid.delta_s, p=args.p, seeds=args.seeds, n_jobs=args.jobs,
            labels=labels, ncp_rule=args.ncp_rule,
        )
        stem = f"sweep_{args.dataset}_{args.model}_{args.matrix}_L{order}_{args.solver}"
        res.write_csv(out / f"{stem}_cells.csv")
        res.write_json(out / f"{stem}_summary.json")
        _write_rows(out / f"{stem}_mean.csv", ["lambda", "mean_error"], zip(res.lambdas, res.mean_error))
        worst = min(worst, res.success_rate)
    if worst < 0.9:
        print(f"drtinv: only {worst:.0%} of sweep cells succeeded", file=sys.stderr)
        return 1
    return 0


# -- analyze ---------------------------------------------------------------------------

def _single_process(args):
    if args.model == "RQ":
        return ProcessMix((RQProcess(args.t0, args.beta),))
    return ProcessMix((LNProcess.centered(args.t0, args.sigma),))


def cmd_condition(args, out):
    freq = default_frequencies()
    rows = ea.condition_table(freq)
    ea.write_table_csv(out / "condition_table.csv", rows)
    ea.write_table_csv(out / "condition_rules.csv", ea.quadrature_condition_table(freq))


def cmd_picard(args, out):
    freq = default_frequencies()
    kernel = build_matrix(args.matrix, freq, args.rule if args.matrix.endswith("s") else None)
    _, z1, z2 = exact_impedance(_single_process(args), freq)
    exact = data_vector(args.matrix, z1, z2)
    b = add_noise(exact, args.noise, args.seed).b
    data = picard_data(kernel.entries, b)
    data.to_csv(out / f"picard_{args.matrix}.csv")
    _write_json(out / f"picard_{args.matrix}.json", {"growth_index": picard_growth_index(data), "length": len(data)})


def cmd_quad_error(args, out):
    freq = default_frequencies()
    sgrid = build_matrix("A1s", freq).sgrid
    mix = _single_process(args)
    cols = {}
    for k in (1, 2):
        cols[f"err_t_h{k}"] = ea.quad_error_curve(mix, freq, sgrid, QuadratureRule.TRAP_T, k)
        cols[f"err_s_h{k}"] = ea.quad_error_curve(mix, freq, sgrid, QuadratureRule.TRAP_S, k)
    label = f"{args.model}_t0{args.t0:g}"
    ea.write_error_curves(out / f"quad_error_{label}.csv", freq.omegas, cols)


def cmd_basis_ncp(args, out):
    freq = default_frequencies()
    kernel = build_matrix(args.matrix, freq, args.rule if args.matrix.endswith("s") else None)
    res = ea.basis_ncp(kernel.entries, p=args.p_basis)
    rows = [
        (i + 1, int(res.u_noise[i]), int(res.v_noise[i]), int(res.u_degenerate[i]), int(res.v_degenerate[i]))
        for i in range(len(res))
    ]
    _write_rows(out / f"basis_ncp_{args.matrix}.csv", ["index", "u_noise", "v_noise", "u_degenerate", "v_degenerate"], rows)
    _write_json(out / f"basis_ncp_{args.matrix}.json", {"first_noise_u": res.first_noise_u, "first_noise_v": res.first_noise_v})


ANALYSES = {
    "condition": cmd_condition, "picard": cmd_picard,
    "quad-error": cmd_quad_error, "basis-ncp": cmd_basis_ncp,
}


def cmd_analyze(args):
    ANALYSES[args.analysis](args, _out_dir(args))
    return 0


# -- parser --------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="file of key = value defaults")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")


def _add_problem(p, need_dataset=True):
    p.add_argument("--dataset", choices=sorted(DATASETS), required=need_dataset)
    p.add_argument("--model", choices=MODELS, default="RQ")
    p.add_argument("--noise", type=float, default=DEFAULT_NOISE)
    p.add_argument("--drop-first", action="store_true", help="discard the lowest frequency")


def _add_solver(p):
    p.add_argument("--matrix", choices=MATRIX_NAMES, default="A4s")
    p.add_argument("--rule", default=QuadratureRule.TAIL_CORRECTED_S.value,
                   choices=[r.value for r in QuadratureRule if r is not QuadratureRule.TRAP_T])
    p.add_argument("--solver", choices=SOLVERS, default="nnls")
    p.add_argument("--p", type=float, default=0.2, help="NCP test level")
    p.add_argument("--ncp-rule", choices=NCP_RULES, default="min_ks")
    p.add_argument("--n-lambdas", type=int, default=50)
    p.add_argument("--log-lambda-min", type=float, default=-3.5)
    p.add_argument("--log-lambda-max", type=float, default=1.5)


def build_parser():
    parser = argparse.ArgumentParser(prog="drtinv", description="Relaxation-time distribution inversion toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write exact and noisy impedance data")
    _add_common(g)
    _add_problem(g)
    g.add_argument("--seeds", type=parse_seeds, default=[0])
    g.add_argument("--truth", action="store_true", help="also write f(s) on the matrix grid")
    g.add_argument("--matrix", choices=MATRIX_NAMES, default="A4s")
    g.set_defaults(func=cmd_generate)

    i = sub.add_parser("invert", help="regularised inversion of one data set")
    _add_common(i)
    _add_problem(i, need_dataset=False)
    _add_solver(i)
    i.add_argument("--input", help="CSV with columns omega,Z1,Z2 instead of a synthetic data set")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--order", type=int, choices=(0, 1, 2), default=1)
    i.add_argument("--selection", choices=("fixed", "ncp", "lcurve"), default="ncp")
    i.add_argument("--lam", type=float)
    i.set_defaults(func=cmd_invert)

    s = sub.add_parser("sweep", help="error and parameter choice over a lambda grid and many realisations")
    _add_common(s)
    _add_problem(s)
    _add_solver(s)
    s.add_argument("--seeds", type=parse_seeds, default=parse_seeds("0..49"))
    s.add_argument("--orders", type=int, nargs="+", choices=(0, 1, 2), default=[1])
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("analyze", help="conditioning, Picard, quadrature and basis diagnostics")
    _add_common(a)
    a.add_argument("analysis", choices=sorted(ANALYSES))
    a.add_argument("--matrix", choices=MATRIX_NAMES, default="A1s")
    a.add_argument("--rule", default=QuadratureRule.TRAP_S.value,
                   choices=[r.value for r in QuadratureRule if r is not QuadratureRule.TRAP_T])
    a.add_argument("--model", choices=MODELS, default="RQ")
    a.add_argument("--t0", type=float, default=1e-2)
    a.add_argument("--beta", type=float, default=0.8)
    a.add_argument("--sigma", type=float, default=float(np.log(3.0)))
    a.add_argument("--noise", type=float, default=DEFAULT_NOISE)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--p-basis", type=float, default=0.05, help="test level for singular vectors")
    a.set_defaults(func=cmd_analyze)
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        values = read_config(args.config)
    except (OSError, ConfigurationError) as exc:
        parser.error(str(exc))
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in subparser._actions}
    unknown = sorted(set(values) - known)
    if unknown:
        parser.error(f"unknown config keys: {', '.join(unknown)}")
    for action in subparser._actions:
        if action.dest in values and isinstance(action, (argparse._StoreTrueAction,)):
            values[action.dest] = values[action.dest].lower() in ("1", "true", "yes", "on")
        elif action.dest in values and action.nargs == "+":
            values[action.dest] = [action.type(v) if action.type else v for v in values[action.dest].split()]
    subparser.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    args = _apply_config(parser, argv)
    try:
        return args.func(args)
    except (RunFailure, ConfigurationError, SelectionError, OSError, ValueError, RuntimeError) as exc:
        print(f"drtinv: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
