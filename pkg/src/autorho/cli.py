"""Command line interface.

Verbs
-----
``interval``  automatic search interval for ``rho`` as JSON
``fit``       grid-search fit(s) under GCV and/or REML
``curves``    edf, GCV and REML along the grid, ready for plotting
``simulate``  coverage study of the interval bounds
``bench``     runtime of the interval computations against a PLS grid

Exit status is 0 on success, 2 on usage errors, 3 on data errors (I/O,
parsing, unusable designs) and 4 on numerical failures.
"""

import argparse
import csv
import io
import json
import math
import sys
from datetime import date

import numpy as np

from . import __version__
from .basis import design_matrix, quantile_knots
from .errors import (AutorhoError, DegenerateData, DegenerateKnots, InvalidDimensions,
                     InvalidOrder, OutOfDomain, RankDeficientDesign, TooFewSamples)
from .experiments import (SCENARIOS, bench_intervals, coverage_density, loglog_slope,
                          rows_to_csv, run_scenario)
from .gridsearch import boundary_warning, evaluate, make_grid, select_optimum
from .interval import auto_interval
from .penalty import make_penalty
from .pls import new_problem, solve_at

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
SCHEMA = 1
DENSE_POINTS = 200

DATA_ERRORS = (OSError, DegenerateData, DegenerateKnots, InvalidDimensions, InvalidOrder,
               OutOfDomain, RankDeficientDesign, TooFewSamples)


class DataError(Exception):
    pass


# ---------------------------------------------------------------- input

def _parse_x(values):
    """Numbers as they are; ISO dates become day offsets from the earliest date."""
    try:
        return np.array([float(v) for v in values]), None
    except ValueError:
        pass
    try:
        days = [date.fromisoformat(v.strip()) for v in values]
    except ValueError as exc:
        raise DataError(f"x column is neither numeric nor ISO dates: {exc}") from None
    origin = min(days)
    return np.array([(d - origin).days for d in days], dtype=float), origin.isoformat()


def read_table(path, x_col, y_col, w_col=None):
    """Read ``x``, ``y`` and optional weights from a CSV file with a header row.

    Rows are returned sorted by ``x``.  Blank cells make the row count as
    missing and it is dropped.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise DataError(f"{path}: empty file")
            cols = [x_col, y_col] + ([w_col] if w_col else [])
            missing = [c for c in cols if c not in reader.fieldnames]
            if missing:
                raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
            rows = [r for r in reader if all((r.get(c) or "").strip() for c in cols)]
    except csv.Error as exc:
        raise DataError(f"{path}: malformed CSV: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no complete data rows")
    x, origin = _parse_x([r[x_col] for r in rows])
    try:
        y = np.array([float(r[y_col]) for r in rows])
        w = np.array([float(r[w_col]) for r in rows]) if w_col else None
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric value: {exc}") from None
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError(f"{path}: non-finite values")
    if w is not None and (np.any(w < 0) or not np.all(np.isfinite(w))):
        raise DataError(f"{path}: weights must be finite and non-negative")
    order = np.argsort(x, kind="stable")
    return x[order], y[order], (None if w is None else w[order]), origin


def build_from_args(args):
    x, y, w, origin = read_table(args.input, args.x_col, args.y_col, args.w_col)
    n = x.size
    d, m = args.degree, args.order
    if not 1 <= m <= d - 1:
        raise DataError(f"penalty order m={m} must lie in [1, {d - 1}] for order d={d}")
    k_int = args.knots if args.knots is not None else int(round(args.knot_frac * n))
    if k_int < 0:
        raise DataError("the number of interior knots cannot be negative")
    kv = quantile_knots(x, k_int + 2, d)
    if not kv.p < n:
        raise DataError(f"{kv.p} coefficients need more than {n} observations; use fewer knots")
    B = design_matrix(kv, x)
    penalty = make_penalty(args.penalty, kv, m)
    prob = new_problem(B, y, w, penalty)
    return prob, kv, x, y, origin


# ---------------------------------------------------------------- output

def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _dumps(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating))
                                              else v) for v in row])
    return buf.getvalue()


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def interval_report(iv):
    s = iv.summary
    return {
        "rho_lo": iv.rho_lo, "rho_hi": iv.rho_hi, "kind": iv.kind, "kappa": iv.kappa, "q": iv.q,
        "lambda_max": s.lambda_max, "lambda_min": s.lambda_min, "lambda_mean": s.lambda_mean,
        "singular": s.singular,
        "rho_star_min": _num(iv.rho_star_min), "rho_star_max": _num(iv.rho_star_max),
        "rho_hat_min": _num(iv.rho_hat_min), "rho_hat_max": _num(iv.rho_hat_max),
        "heuristic_failed": iv.heuristic_failed,
    }


def _setup_report(prob, kv, args, origin):
    return {"n": prob.n, "p": prob.p, "d": kv.order, "m": prob.m, "penalty": args.penalty,
            "knots": [float(t) for t in kv.knots], "x_origin": origin}


# ---------------------------------------------------------------- verbs

def cmd_interval(args):
    prob, kv, _, _, origin = build_from_args(args)
    iv = auto_interval(prob, args.kappa, args.mode, seed=args.seed)
    rep = interval_report(iv)
    if (args.format or "json") == "csv":
        return _csv_text(list(rep), [[_num(v) if isinstance(v, float) else v for v in rep.values()]])
    return _dumps({"schema": SCHEMA, **rep, **_setup_report(prob, kv, args, origin)})


def _criteria(args):
    return ("gcv", "reml") if args.criterion == "both" else (args.criterion,)


def _curve(args):
    prob, kv, x, y, origin = build_from_args(args)
    iv = auto_interval(prob, args.kappa, args.mode, seed=args.seed)
    curve = evaluate(prob, make_grid(iv, args.grid))
    return prob, kv, x, y, origin, iv, curve


def cmd_fit(args):
    prob, kv, x, y, origin, iv, curve = _curve(args)
    lo, hi = kv.domain
    xd = np.linspace(lo, hi, DENSE_POINTS)
    Bd = design_matrix(kv, xd)
    fits, data_cols, dense_cols = {}, {}, {}
    for crit in _criteria(args):
        sel = select_optimum(curve, crit)
        fit = solve_at(prob, sel.rho_star)
        fits[crit] = {
            "rho": sel.rho_star, "index": sel.index, "value": sel.value,
            "edf": fit.edf, "gcv": fit.gcv, "reml": fit.reml, "sigma2_hat": fit.sigma2_hat,
            "warning": boundary_warning(curve, sel),
        }
        data_cols[crit] = fit.y_hat
        dense_cols[crit] = Bd.matvec(fit.beta_hat)
    summary = {"schema": SCHEMA, "interval": interval_report(iv), "grid": len(curve),
               "failures": list(curve.failures), "fits": fits,
               **_setup_report(prob, kv, args, origin)}
    crits = list(fits)
    if (args.format or "json") == "csv":
        rows = [["data", x[i], y[i]] + [data_cols[c][i] for c in crits] for i in range(x.size)]
        rows += [["grid", xd[i], None] + [dense_cols[c][i] for c in crits] for i in range(xd.size)]
        text = _csv_text(["kind", "x", "y"] + [f"fit_{c}" for c in crits], rows)
        for crit in crits:
            if fits[crit]["warning"]:
                print(f"warning ({crit}): {fits[crit]['warning']}", file=sys.stderr)
        if args.summary:
            _emit(_dumps(summary), args.summary)
        return text
    summary["data"] = {"x": x.tolist(), "y": y.tolist(),
                       **{f"fit_{c}": data_cols[c].tolist() for c in crits}}
    summary["dense"] = {"x": xd.tolist(), **{f"fit_{c}": dense_cols[c].tolist() for c in crits}}
    return _dumps(summary)


def cmd_curves(args):
    prob, kv, _, _, origin, iv, curve = _curve(args)
    cols = ("rho", "edf", "gcv", "reml")
    if (args.format or "csv") == "json":
        body = {c: [_num(v) for v in getattr(curve, "rhos" if c == "rho" else c)] for c in cols}
        return _dumps({"schema": SCHEMA, "interval": interval_report(iv),
                       "failures": list(curve.failures), **body,
                       **_setup_report(prob, kv, args, origin)})
    rows = [[curve.rhos[i]] + [_num(getattr(curve, c)[i]) for c in cols[1:]]
            for i in range(len(curve))]
    return _csv_text(cols, rows)


def cmd_simulate(args):
    ids = args.scenario or [s.id for s in SCENARIOS]
    reports = []
    for sid in ids:
        rep = run_scenario(sid, args.p, args.degree, args.order, reps=args.reps,
                           seed=args.seed, kappa=args.kappa)
        reports.append(rep)
    if (args.format or "json") == "csv":
        rows = []
        for rep in reports:
            for i, (ph, ps) in enumerate(zip(rep.p_hat, rep.p_star)):
                rows.append([rep.scenario, rep.p, rep.d, rep.m, i, _num(ph), ps])
        return _csv_text(["scenario", "p", "d", "m", "sample", "p_hat", "p_star"], rows)
    out = []
    for rep in reports:
        entry = rep.to_dict()
        entry["fraction_within"] = rep.fraction_within()
        try:
            dens = coverage_density(rep)
            entry["density"] = {"edges": dens.edges.tolist(), "density": dens.density.tolist(),
                                "below": dens.below, "above": dens.above,
                                "reference": dens.reference, "star_mean": dens.star_mean}
        except TooFewSamples:
            entry["density"] = None
        out.append(entry)
    return _dumps({"schema": SCHEMA, "reports": out})


def cmd_bench(args):
    rows = bench_intervals(args.p_list, reps=args.reps, d=args.degree, m=args.order,
                           grid_size=args.grid, seed=args.seed, kappa=args.kappa)
    fmt = args.format or "text"
    if fmt == "csv":
        return rows_to_csv(rows)
    ps = [r["p"] for r in rows]
    slopes = {k: loglog_slope(ps, [r[k] for r in rows]) if len(ps) > 1 else None
              for k in ("heuristic_interval", "exact_interval", "pls_grid")}
    if fmt == "json":
        return _dumps({"schema": SCHEMA, "rows": rows, "loglog_slopes": slopes})
    lines = [f"{'p':>6}  {'heuristic (s)':>14}  {'exact (s)':>12}  {'PLS x' + str(args.grid) + ' (s)':>14}"]
    for r in rows:
        lines.append(f"{r['p']:>6}  {r['heuristic_interval']:>14.5f}  {r['exact_interval']:>12.5f}"
                     f"  {r['pls_grid']:>14.5f}")
    if len(ps) > 1:
        lines.append("log-log slope  " + "  ".join(f"{k}={v:.2f}" for k, v in slopes.items()))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- parser

def _p_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty p list")
    return vals


def _kappa(text):
    v = float(text)
    if not 0 < v < 0.5:
        raise argparse.ArgumentTypeError("kappa must lie in (0, 0.5)")
    return v


def _model_flags(p):
    p.add_argument("-d", "--degree", type=int, default=4,
                   help="B-spline order d, i.e. polynomial degree + 1 (default 4, cubic)")
    p.add_argument("-m", "--order", type=int, default=2, help="penalty order m (default 2)")
    p.add_argument("--kappa", type=_kappa, default=0.01, help="coverage parameter (default 0.01)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", help="output file (default stdout)")


def _data_flags(p):
    p.add_argument("--input", "-i", required=True, help="CSV file with a header row")
    p.add_argument("--x-col", default="x")
    p.add_argument("--y-col", default="y")
    p.add_argument("--w-col", default=None, help="optional weight column")
    p.add_argument("--penalty", choices=("gps", "sps", "os"), default="gps",
                   help="general differences, standard differences or derivative penalty")
    knots = p.add_mutually_exclusive_group()
    knots.add_argument("--knots", type=int, default=None, help="number of interior knots")
    knots.add_argument("--knot-frac", type=float, default=0.25,
                       help="interior knots per observation (default 0.25, i.e. n/4)")
    p.add_argument("--mode", choices=("exact", "wide", "heuristic"), default="heuristic")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="autorho",
        description="Penalized B-spline smoothing with an automatic search interval for rho.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("interval", help="compute the search interval")
    _data_flags(p)
    _model_flags(p)
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.set_defaults(func=cmd_interval)

    for name, func, helptext in (("fit", cmd_fit, "select rho by grid search and fit"),
                                 ("curves", cmd_curves, "criterion curves over the interval")):
        p = sub.add_parser(name, help=helptext)
        _data_flags(p)
        _model_flags(p)
        p.add_argument("--grid", type=int, default=100, help="grid size N (default 100)")
        p.add_argument("--criterion", choices=("gcv", "reml", "both"), default="both")
        p.add_argument("--format", choices=("json", "csv"), default=None)
        if name == "fit":
            p.add_argument("--summary", help="with --format csv: write the JSON summary here")
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", help="coverage study of the interval bounds")
    _model_flags(p)
    p.add_argument("-p", type=int, default=50, help="number of B-splines (default 50)")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--scenario", type=int, nargs="+", choices=range(1, 9), metavar="ID",
                   help="scenario ids 1..8 (default all)")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="runtime of interval computation versus grid search")
    _model_flags(p)
    p.add_argument("--p-list", type=_p_list, default=[250, 500, 1000, 2000])
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--grid", type=int, default=20, help="PLS grid size (default 20)")
    p.add_argument("--format", choices=("text", "json", "csv"), default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "grid", 2) < 2:
        parser.error("--grid must be at least 2")
    if getattr(args, "reps", 1) < 1:
        parser.error("--reps must be positive")
    try:
        text = args.func(args)
    except (DataError, *DATA_ERRORS) as exc:
        print(f"autorho: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ArithmeticError, AutorhoError) as exc:
        print(f"autorho: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"autorho: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        _emit(text, args.output)
    except OSError as exc:
        print(f"autorho: cannot write output: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
