"""Command-line interface.

    sped deconvolve  --input y.csv --output f.csv --error gaussian --error-scale 0.2
    sped mise-curve  --target i --p 0.1 --n 100 --estimator sped --output curve.csv
    sped equiv-n     --target i --p 0.1 --ref-n 100 --output table.csv
    sped tune        --input y.csv --error gaussian --error-scale 0.2
    sped simulate    --target iv --p 0.1 --n 100 --nsim 400 --alpha 3 --output reps.csv
    sped check       --output report.jsonl [--filter laplace]

Data files are plain CSV; every command that writes a CSV also writes a
JSON sidecar next to it (same path plus ".json").  Exit codes: 0 ok,
1 check failure, 2 usage or parse error, 3 numerical failure,
4 infeasible projection.  Errors are reported on stderr as
"sped: error: <ErrorName>: <message>".
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import InvalidParameter, ParseError, SpedError
from .estimator import DensityCurve
from .fourier import (
    DKE_DEFAULT,
    ERROR_FREE,
    GAUSSIAN_KERNEL,
    KDE,
    EmpiricalCF,
    ErrorModel,
    Histogram,
    TargetDensity,
    silverman_bandwidth,
)
from .mise import EstimatorSpec, Exceeded, MiseSetting, equivalent_n, min_mise, mise_curve
from .multiplier import RateSpec, rate_alpha, sup_phi
from .qp import project_to_pdf
from .sim import Fixed, RateRule, SimPlan, SplineOptions, TuningConfig, Tuned, run_mise_sim, tune_alpha
from .splines import assemble, build_space, default_interval, evaluate_spline, solve_theta
from .theory import BoundReport, run_suite

PROG = "sped"
REF_KERNELS = {"ef": ERROR_FREE, "dke": DKE_DEFAULT}

# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def read_sample(path):
    """One real per line, optional header "y"; blank lines are skipped."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if lines and lines[0].lower() == "y":
        lines = lines[1:]
    if not lines:
        raise ParseError(f"{path} holds no observations")
    values = []
    for k, ln in enumerate(lines, 1):
        try:
            v = float(ln)
        except ValueError:
            raise ParseError(f"{path}: line {k} is not a number: {ln!r}") from None
        if not math.isfinite(v):
            raise ParseError(f"{path}: line {k} is not finite")
        values.append(v)
    return np.array(values)


def sidecar_path(path):
    return Path(str(path) + ".json")


def write_rows(path, header, rows, meta=None):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    if meta is not None:
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def read_rows(path):
    """Rows of a CSV written by this tool, as dicts of strings."""
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def read_curve(path):
    """DensityCurve from an x,density CSV."""
    rows = read_rows(path)
    return DensityCurve([float(r["x"]) for r in rows], [float(r["density"]) for r in rows])


def read_sidecar(path):
    return json.loads(sidecar_path(path).read_text())


def read_reports(path):
    return [BoundReport.from_json(ln) for ln in Path(path).read_text().splitlines() if ln.strip()]


# ---------------------------------------------------------------------------
# Shared builders
# ---------------------------------------------------------------------------


def _error_model(args, sample=None):
    if args.error_scale is not None:
        if not args.error_scale > 0:
            raise InvalidParameter("--error-scale must be positive")
        return ErrorModel(args.error, float(args.error_scale))
    if args.p is not None and sample is not None:
        # Var(E) = p Var(Y) when p is the error share of the observed variance
        if not 0 < args.p < 1:
            raise InvalidParameter("--p must lie in (0, 1)")
        return ErrorModel.from_variance(args.error, args.p * float(np.var(sample, ddof=1)))
    raise ParseError("give --error-scale (or --p to scale the error from the sample variance)")


def _setting(args, estimator=None, p=None):
    target = TargetDensity.benchmark(args.target)
    est = estimator or _estimator_spec(args)
    p = args.p if p is None else p
    if est.kind == "kde":
        p = 0.0
    return MiseSetting(target, float(p), int(args.n), est, args.error)


def _estimator_spec(args, kind=None):
    kind = kind or args.estimator
    if kind == "sped":
        return EstimatorSpec.sped(args.m)
    if kind == "dke":
        return EstimatorSpec.dke(DKE_DEFAULT)
    return EstimatorSpec.error_free(REF_KERNELS[args.ref_kernel])


def _pilot(kind, sample):
    if kind == "ecf":
        return EmpiricalCF(sample)
    if kind == "kde":
        return KDE(sample, GAUSSIAN_KERNEL, silverman_bandwidth(sample))
    return Histogram.from_sample(sample)


def _rate_alpha(rule, n, m):
    # delta^2 ~ n^(-4/5) is the squared error of a well-tuned kernel pilot; k = 1 is the weakest smoothness
    return rate_alpha(RateSpec(rule, 1, m, float(n) ** -0.8))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_deconvolve(args):
    ys = read_sample(args.input)
    error = _error_model(args, ys)
    if args.m != 2:
        raise InvalidParameter("the spline estimator penalizes the second derivative (--m 2)")
    a, b = args.interval if args.interval else default_interval(ys, error)
    space = build_space(a, b, args.q)
    project = args.project == "on"
    tuning = None
    if args.alpha_rule == "fixed":
        if args.alpha is None:
            raise ParseError("--alpha-rule fixed needs --alpha")
        alpha = args.alpha
    elif args.alpha_rule == "tuned":
        history = []
        config = TuningConfig(args.alpha0, args.tol, args.max_iter)
        alpha, iters = tune_alpha(ys, error, config, SplineOptions(args.q, project), history=history)
        tuning = {"iterations": iters, "history": history, "surrogate": "projected" if project else "raw"}
    else:
        alpha = _rate_alpha(args.alpha_rule, ys.size, args.m)
    if not alpha > 0:
        raise InvalidParameter(f"alpha must be positive, got {alpha}")
    gram = assemble(space, error, _pilot(args.pilot, ys))
    theta = solve_theta(gram, alpha)
    if project:
        theta = project_to_pdf(theta, gram)
    xs = np.linspace(space.a, space.b, args.grid_points)
    curve = evaluate_spline(space, theta, xs)
    meta = {
        "alpha": alpha,
        "alpha_rule": args.alpha_rule,
        "m": args.m,
        "q": args.q,
        "interval": [space.a, space.b],
        "projection": project,
        "pilot": args.pilot,
        "error": {"kind": error.kind, "scale": error.scale},
        "n": int(ys.size),
        "integral": curve.integral(),
        "coefficient_sum": float(np.sum(theta)),
        "warnings": list(gram.warnings),
    }
    if tuning:
        meta["tuning"] = tuning
    write_rows(args.output, ["x", "density"], zip(curve.xs.tolist(), curve.values.tolist()), meta)
    return 0


def cmd_mise_curve(args):
    setting = _setting(args)
    params, values = mise_curve(setting)
    best, vbest = min_mise(setting)
    rows = sorted([(float(t), float(v), 0) for t, v in zip(params, values)] + [(best, vbest, 1)])
    meta = {"target": args.target, "p": setting.p, "n": setting.n, "estimator": setting.estimator.label,
            "error": args.error, "argmin": best, "min_mise": vbest}
    write_rows(args.output, ["tuning_param", "mise", "is_min"], rows, meta)
    print(f"min at {best:.6g}: mise {vbest:.6g}")
    return 0


def cmd_equiv_n(args):
    rows = []
    summary = {}
    for p in args.p_list:
        for est_kind in args.estimators:
            for ker in args.ref_kernels:
                setting = _setting(args, _estimator_spec(args, est_kind), p)
                value = equivalent_n(setting, args.ref_n, REF_KERNELS[ker], args.n_cap)
                token = str(value) if isinstance(value, Exceeded) else int(value)
                rows.append((args.target, p, est_kind, ker, token))
                summary.setdefault(p, []).append(str(token))
    meta = {"target": args.target, "ref_n": args.ref_n, "n_cap": args.n_cap, "error": args.error,
            "columns": "estimator-major, then reference kernel"}
    write_rows(args.output, ["setting", "p", "estimator", "reference_kernel", "n_equiv"], rows, meta)
    for p, tokens in summary.items():
        print(f"{args.target},{p}: " + ",".join(tokens))
    return 0


def cmd_tune(args):
    ys = read_sample(args.input)
    error = _error_model(args, ys)
    spline = None if args.path == "exact" else SplineOptions(args.q, args.project == "on")
    history = []
    alpha, iters = tune_alpha(ys, error, TuningConfig(args.alpha0, args.tol, args.max_iter), spline, args.m,
                              history=history)
    out = {"alpha": alpha, "iterations": iters, "history": history, "path": args.path,
           "surrogate": "projected" if spline and spline.project else "raw", "n": int(ys.size)}
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_simulate(args):
    setting = _setting(args, EstimatorSpec.sped(args.m))
    if args.alpha_rule == "fixed":
        if args.alpha is None:
            raise ParseError("--alpha-rule fixed needs --alpha")
        rule = Fixed(args.alpha)
    elif args.alpha_rule == "tuned":
        rule = Tuned(TuningConfig(args.alpha0, args.tol, args.max_iter))
    else:
        rule = RateRule(RateSpec(args.alpha_rule, 1, args.m, float(args.n) ** -0.8))
    spline = None if args.path == "exact" else SplineOptions(args.q, args.project == "on")
    plan = SimPlan(setting, args.nsim, args.seed, rule, spline=spline)
    res = run_mise_sim(plan, threads=args.threads)
    meta = {**res.meta, "target": args.target, "mean_ise": res.mean_ise,
            "se": None if math.isnan(res.se) else res.se, "alpha_rule": args.alpha_rule}
    rows = [(i, float(v), float(a)) for i, (v, a) in enumerate(zip(res.per_rep, res.alphas))]
    write_rows(args.output, ["replicate", "ise", "alpha"], rows, meta)
    se = "undefined" if math.isnan(res.se) else f"{res.se:.6g}"
    print(f"mean ISE {res.mean_ise:.6g} (se {se}) over {args.nsim} replicates")
    return 0


def _buggy_sup_phi(mult):
    return 0.5 * sup_phi(mult)


def cmd_check(args):
    sup_fn = _buggy_sup_phi if args.inject_bug == "sup_phi" else sup_phi
    results = run_suite(args.filter, sup_fn)
    lines, bad = [], []
    for case, reports, expect, ok in results:
        lines.extend(r.to_json() for r in reports)
        if not ok:
            bad.append(case)
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    for case in bad:
        print(f"{PROG}: unexpected outcome in {case}", file=sys.stderr)
    return 1 if bad else 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _proportion(text):
    value = float(text)
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1), got {value}")
    return value


def _add_error(p):
    p.add_argument("--error", choices=["gaussian", "laplace", "cauchy", "uniform"], default="gaussian")
    p.add_argument("--error-scale", type=float)


def _add_setting(p, n_required=True):
    p.add_argument("--target", choices=["i", "ii", "iii", "iv"], required=True)
    p.add_argument("--p", type=_proportion, default=0.1)
    if n_required:
        p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--error", choices=["gaussian", "laplace", "uniform"], default="gaussian")


def _add_tuning(p):
    p.add_argument("--alpha0", type=float, default=1e-2)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=50)


def _add_spline(p):
    p.add_argument("--q", type=_positive_int, default=40)
    p.add_argument("--project", choices=["on", "off"], default="on")


def build_parser():
    parser = argparse.ArgumentParser(prog=PROG, description="Smoothness-penalized density deconvolution.")
    parser.add_argument("--threads", type=_positive_int, default=1, help="worker cap for replicate fan-out")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("deconvolve", help="estimate f from a contaminated sample")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_error(p)
    p.add_argument("--p", type=float, help="error share of Var(Y), used when --error-scale is absent")
    p.add_argument("--pilot", choices=["ecf", "kde", "hist"], default="ecf")
    p.add_argument("--alpha", type=float)
    p.add_argument("--alpha-rule", choices=["fixed", "normal", "cauchy", "laplace", "tuned"])
    p.add_argument("--m", type=int, default=2)
    _add_spline(p)
    p.add_argument("--interval", type=float, nargs=2, metavar=("A", "B"))
    p.add_argument("--grid-points", type=_positive_int, default=512)
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; deconvolution is deterministic")
    _add_tuning(p)
    p.set_defaults(func=cmd_deconvolve)

    p = sub.add_parser("mise-curve", help="exact MISE over the tuning parameter")
    _add_setting(p)
    p.add_argument("--estimator", choices=["sped", "dke", "kde"], default="sped")
    p.add_argument("--ref-kernel", choices=["ef", "dke"], default="ef", help="kernel of the error-free estimator")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_mise_curve)

    p = sub.add_parser("equiv-n", help="equivalent sample sizes")
    _add_setting(p, n_required=False)
    p.add_argument("--p-list", type=_proportion, nargs="+")
    p.add_argument("--estimator", dest="estimators", choices=["sped", "dke"], nargs="+", default=["sped", "dke"])
    p.add_argument("--ref-kernel", dest="ref_kernels", choices=["ef", "dke"], nargs="+", default=["ef", "dke"])
    p.add_argument("--ref-n", type=_positive_int, default=100)
    p.add_argument("--n-cap", type=_positive_int, default=10**6)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_equiv_n, n=1)

    p = sub.add_parser("tune", help="iterated choice of alpha for a sample")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    _add_error(p)
    p.add_argument("--p", type=float)
    p.add_argument("--path", choices=["exact", "spline"], default="exact")
    p.add_argument("--m", type=int, default=2)
    _add_spline(p)
    _add_tuning(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("simulate", help="Monte-Carlo ISE of the penalized estimator")
    _add_setting(p)
    p.add_argument("--nsim", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float)
    p.add_argument("--alpha-rule", choices=["fixed", "normal", "cauchy", "laplace", "tuned"], default="fixed")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--path", choices=["exact", "spline"], default="exact")
    _add_spline(p)
    _add_tuning(p)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="run the bound and rate checks")
    p.add_argument("--output")
    p.add_argument("--filter")
    p.add_argument("--inject-bug", choices=["sup_phi"], help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "deconvolve" and args.alpha_rule is None:
        args.alpha_rule = "fixed" if args.alpha is not None else "tuned"
    if args.command == "equiv-n" and not args.p_list:
        args.p_list = [args.p]
    try:
        return args.func(args)
    except SpedError as exc:
        print(f"{PROG}: error: {exc.name}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
