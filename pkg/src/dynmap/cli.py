"""
Command-line front end.

Subcommands: ``convert`` (edgelist to matrix sequence), ``fit``, ``eval``,
``tune``, ``simulate``, ``bench``, ``plot`` and ``example`` (write the bundled
synthetic edgelist). Exit codes: 0 ok, 2 parse error, 3 validation error,
4 optimization divergence.
"""
import argparse
import csv
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, io
from .core import FitSpec
from .datasets import load_tech_firms
from .errors import DivergenceError, DynMapError, ParseError
from .metrics import (
    avg_adjusted_hitrate_score,
    avg_hitrate_score,
    evaluate,
    misalign_score,
    persistence_score,
)
from .optimize import OptimizerSettings, fit
from .plot import draw_dynamic_map, draw_map, draw_trajectories
from .preprocess import edgelist_to_matrices, expand_matrices, normalize_diss, sim_to_diss
from .sim import SimConfig, recovery_study, runtime_benchmark
from .static import cmds
from .transform import align_maps
from .tune import bayesian_search, grid_search

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_DIVERGED = 0, 2, 3, 4
METRICS = ("misalign", "alignment", "persistence", "avg_hitrate", "avg_adjusted_hitrate")


class UsageError(DynMapError):
    """Bad flag value; reported as a validation error."""


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise UsageError(f"expected comma-separated integers, got {text!r}")
    return [int(v) for v in vals]


def _number(text):
    v = float(text)
    return int(v) if v == int(v) and "." not in text and "e" not in text.lower() else v


def _parse_grid(items):
    """``alpha=0:1.5:15`` (linspace) or ``p=1,2`` (list) -> dict."""
    grid = {}
    for item in items:
        name, sep, values = item.partition("=")
        if not sep or not name:
            raise UsageError(f"grid entries look like name=lo:hi:num or name=v1,v2; got {item!r}")
        try:
            if ":" in values:
                lo, hi, num = values.split(":")
                grid[name] = [float(v) for v in np.linspace(float(lo), float(hi), int(num))]
            else:
                grid[name] = [_number(v) for v in values.split(",")]
        except ValueError:
            raise UsageError(f"cannot parse grid entry {item!r}") from None
    return grid


def _parse_space(items):
    """``alpha=0.001:1.5`` or ``p=1:3`` (integer when both bounds are) -> dict."""
    space = {}
    for item in items:
        name, sep, values = item.partition("=")
        try:
            lo, hi = values.split(":")
            space[name] = (_number(lo), _number(hi))
        except ValueError:
            raise UsageError(f"space entries look like name=lo:hi; got {item!r}") from None
        if not sep or not name:
            raise UsageError(f"space entries look like name=lo:hi; got {item!r}")
    return space


def _add_fit_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--method", choices=("mds", "sammon", "tsne"), default="mds")
    g.add_argument("--mds-type", choices=("ratio", "interval", "ordinal"), default="ratio")
    g.add_argument("--perplexity", type=float, default=30.0)
    g.add_argument("--alpha", type=float, default=0.0)
    g.add_argument("--p", type=int, default=1)
    g.add_argument("--dims", type=int, default=2)
    g = p.add_argument_group("optimizer")
    g.add_argument("--n-iter", type=int, default=2000)
    g.add_argument("--tol", type=float, default=1e-4)
    g.add_argument("--step-size", type=float, default=1.0)
    g.add_argument("--n-inits", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--init", default="random",
                   help="'random', 'cmds' (classical scaling per period) or a coordinates CSV")
    g.add_argument("--verbose", type=int, choices=(0, 1, 2), default=0)
    g.add_argument("--n-iter-check", type=int, default=50)


def _spec(args):
    params = {"mds_type": args.mds_type} if args.method == "mds" else {}
    if args.method == "tsne":
        params["perplexity"] = args.perplexity
    return FitSpec(method=args.method, alpha=args.alpha, p=args.p, d=args.dims, method_params=params)


def _settings(args, init=None):
    return OptimizerSettings(n_iter=args.n_iter, tol=args.tol, step_size=args.step_size, n_inits=args.n_inits,
                             init=init, n_iter_check=args.n_iter_check, verbose=args.verbose, seed=args.seed)


def _cmds_start(D, mask, d):
    X = np.zeros(D.shape[:2] + (d,))
    for t in range(len(D)):
        idx = np.arange(D.shape[1]) if mask is None else np.flatnonzero(mask[t])
        X[t, idx] = cmds(D[t][np.ix_(idx, idx)], d)
    return X


def _load_data(path, mask_path):
    D, labels, periods = io.read_matrices(path)
    mask = io.read_mask(mask_path, labels, periods) if mask_path else None
    if mask is not None and mask.all():
        mask = None
    return D, labels, periods, mask


def _initial(args, D, labels, periods, mask):
    if args.init == "random":
        return None
    if args.init == "cmds":
        return _cmds_start(D, mask, args.dims)
    X, init_labels, init_periods, _ = io.read_coords(args.init)
    if init_labels != labels or init_periods != periods:
        raise UsageError("init coordinates must cover the same labels and periods as the data")
    return X


def _write_table(rows, columns, out):
    handle = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        w = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
    finally:
        if out:
            handle.close()


def cmd_example(args):
    rows = load_tech_firms(unbalanced=args.unbalanced, seed=args.seed)
    _write_table(rows, list(rows[0]), args.out)


def cmd_convert(args):
    records = []
    with open(args.input, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        for role in (args.score, args.id_i, args.id_j, args.time):
            if reader.fieldnames is None or role not in reader.fieldnames:
                raise ParseError(f"column {role!r} not in header {reader.fieldnames}", 1)
        for row in reader:
            try:
                row[args.score] = float(row[args.score])
            except (TypeError, ValueError):
                raise ParseError(f"score {row[args.score]!r} is not a number", reader.line_num) from None
            records.append(row)
    if not records:
        raise ParseError("no data rows", 2)
    matrices, labels, periods = edgelist_to_matrices(records, args.score, args.id_i, args.id_j, args.time)
    if args.transform:
        matrices = [sim_to_diss(S, args.transform) for S in matrices]
    if args.unbalanced:
        D, mask, roster = expand_matrices(matrices, labels)
    else:
        roster = labels[0]
        for t, lab in enumerate(labels):
            if list(lab) != list(roster):
                raise UsageError(f"period {periods[t]} has a different set of objects; use --unbalanced")
        D, mask = np.stack(matrices), np.ones((len(periods), len(roster)), dtype=np.int64)
    if args.normalize:
        D = normalize_diss(D, args.normalize, mask)
    io.write_matrices(args.out, D, roster, periods, mask)
    if args.mask_out:
        io.write_mask(args.mask_out, mask, roster, periods)
    if args.labels_out:
        with open(args.labels_out, "w", encoding="utf-8") as f:
            f.writelines(f"{label}\n" for label in roster)
    print(f"wrote {len(periods)} periods x {len(roster)} objects to {args.out}", file=sys.stderr)


def cmd_fit(args):
    D, labels, periods, mask = _load_data(args.data, args.mask)
    spec = _spec(args)
    settings = _settings(args, _initial(args, D, labels, periods, mask))
    started = datetime.now(timezone.utc).isoformat()
    result = fit(D, spec, settings, mask)
    X = result.coords
    if args.align:
        X = align_maps(X, X[0], mode=args.align, mask=mask)
    io.write_coords(args.out, X, labels, periods, mask)
    if args.manifest:
        io.write_manifest(args.manifest, {
            "tool": "dynmap",
            "version": __version__,
            "inputs": {"data": args.data, "mask": args.mask, "init": args.init},
            "spec": {"method": spec.method, "alpha": spec.alpha, "p": spec.p, "d": spec.d,
                     "method_params": spec.method_params},
            "settings": {"n_iter": settings.n_iter, "tol": settings.tol, "step_size": settings.step_size,
                         "n_inits": settings.n_inits, "n_iter_check": settings.n_iter_check},
            "seed": args.seed,
            "align": args.align,
            "started": started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "cost_total_final": result.cost_total_final,
            "cost_static_avg": result.cost_static_avg,
            "cost_static": [float(c) for c in result.cost_static],
            "converged": bool(result.converged),
            "iterations_used": result.iterations_used,
            "init_index_selected": result.init_index_selected,
            "stop_reason": result.stop_reason,
        })
    print(f"cost_static_avg: {result.cost_static_avg:.4f}  converged: {result.converged}", file=sys.stderr)


def cmd_eval(args):
    D, labels, periods, mask = _load_data(args.data, args.mask)
    X, coord_labels, coord_periods, present = io.read_coords(args.coords)
    if coord_labels != labels or coord_periods != periods:
        raise UsageError("coordinates and data disagree on labels or periods")
    if mask is None and not present.all():
        mask = present
    if args.align:
        X = align_maps(X, X[0], mode=args.align, mask=mask)
    metrics = tuple(args.metrics.split(","))
    report = evaluate(X, D, mask, args.k, metrics=metrics)
    rows = [{"metric": name, "value": repr(float(v))} for name, v in report.rows(args.expand_hitrates)]
    _write_table(rows, ["metric", "value"], args.out)


def _eval_functions(D, mask, k):
    return {
        "misalign": lambda X: misalign_score(X, mask),
        "persistence_inverted": lambda X: 1.0 - persistence_score(X, mask),
        "avg_hitrate": lambda X: avg_hitrate_score(X, D, k, mask),
        "avg_adjusted_hitrate": lambda X: avg_adjusted_hitrate_score(X, D, k, mask),
    }


def cmd_tune(args):
    D, labels, periods, mask = _load_data(args.data, args.mask)
    spec = _spec(args)
    settings = _settings(args, _initial(args, D, labels, periods, mask))
    available = _eval_functions(D, mask, args.k)
    names = args.metrics.split(",")
    unknown = [n for n in names if n not in available]
    if unknown:
        raise UsageError(f"unknown metrics {unknown}; choose from {sorted(available)}")
    funcs = {n: available[n] for n in names}
    weights = _floats(args.weights)
    if args.bayes:
        result = bayesian_search(D, spec, _parse_space(args.bayes), funcs, weights, args.n_calls,
                                 args.n_initial_points, "EI", args.seed, settings, mask)
    else:
        result = grid_search(D, spec, _parse_grid(args.grid or ["alpha=0:1.5:15", "p=1,2"]), funcs, weights,
                             settings, mask)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as f:
            result.to_csv(f)
    else:
        result.to_csv(sys.stdout)
    best = result.best
    if best is not None:
        lines = ["Best result found:"]
        for key in result.param_names + ["cost_static_avg"] + result.metric_names + ["combined_loss"]:
            v = best[key]
            lines.append(f"{key}: {v}" if isinstance(v, (int, np.integer)) else f"{key}: {v:.4f}")
        print("\n".join(lines), file=sys.stderr if not args.out else sys.stdout)


def cmd_simulate(args):
    spec = FitSpec(method="mds", p=args.p, method_params={"mds_type": args.mds_type})
    settings = OptimizerSettings(n_iter=args.n_iter, tol=args.tol, n_inits=args.n_inits)
    cfg = SimConfig(n=args.n, t=args.t, scale=args.scale, noise=args.walk_noise, momentum=args.momentum)
    rows, summary = recovery_study(_floats(args.noise), _floats(args.alphas), args.reps, spec, settings, cfg,
                                   args.seed)
    if args.rows_out:
        _write_table(rows, ["noise", "rep", "alpha", "stress", "procrustes", "error"], args.rows_out)
    _write_table(summary, ["noise", "alpha", "stress", "procrustes"], args.out)


def cmd_bench(args):
    joint, independent = runtime_benchmark(_ints(args.n), _ints(args.t), args.n_iter, args.alpha, args.seed)
    rows = [dict(r, mode="joint") for r in joint] + [dict(r, mode="independent") for r in independent]
    _write_table(rows, ["mode", "n", "t", "seconds", "iterations"], args.out)


def _aesthetic(path, labels):
    """Read a ``label,value`` CSV into a list aligned to ``labels``."""
    values = {}
    for line, row in io._reader(path, ["label"]):
        others = [k for k in row if k != "label"]
        if len(others) != 1:
            raise ParseError("aesthetic files need exactly two columns: label and a value", line)
        values[row["label"]] = row[others[0]]
    missing = [label for label in labels if label not in values]
    if missing or len(values) != len(labels):
        raise UsageError(f"aesthetic file {path} does not match the coordinates' labels (missing: {missing[:5]})")
    return [values[label] for label in labels]


def cmd_plot(args):
    X, labels, periods, present = io.read_coords(args.coords)
    mask = io.read_mask(args.mask, labels, periods) if args.mask else present
    color = _aesthetic(args.color, labels) if args.color else None
    size = None
    if args.size:
        try:
            size = [float(v) for v in _aesthetic(args.size, labels)]
        except ValueError:
            raise UsageError("size values must be numbers") from None
    if args.mode == "static":
        if args.period is None:
            t = len(periods) - 1
        elif args.period in periods:
            t = periods.index(args.period)
        else:
            raise UsageError(f"unknown period {args.period!r}")
        svg = draw_map(X[t], labels, mask[t], color, size, args.title)
    elif args.mode == "dynamic":
        svg = draw_dynamic_map(X, labels, mask, color, size, args.transparency_start, args.transparency_end,
                               args.show_arrows, args.title)
    else:
        svg = draw_trajectories(X, labels, mask, periods, color, args.title)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write(svg)


def build_parser():
    parser = argparse.ArgumentParser(prog="dynmap", description="Dynamic maps from sequences of dissimilarities.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("example", help="write the bundled synthetic tech-firm edgelist")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("--unbalanced", action="store_true", help="include a firm that enters later")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("convert", help="edgelist CSV to matrix-sequence file")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="matrix-sequence CSV")
    p.add_argument("--score", default="score")
    p.add_argument("--id-i", default="id_i")
    p.add_argument("--id-j", default="id_j")
    p.add_argument("--time", default="period")
    p.add_argument("--transform", choices=("mirror", "max_minus", "reciprocal"),
                   help="turn similarities into dissimilarities")
    p.add_argument("--normalize", choices=("max1", "zscore_offdiag"))
    p.add_argument("--unbalanced", action="store_true", help="allow objects to enter and exit")
    p.add_argument("--mask-out", help="mask CSV")
    p.add_argument("--labels-out", help="one label per line")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("fit", help="fit a dynamic map")
    p.add_argument("data", help="matrix-sequence CSV")
    p.add_argument("--mask")
    p.add_argument("--out", required=True, help="coordinates CSV")
    p.add_argument("--manifest", help="JSON run manifest")
    p.add_argument("--align", choices=("per_map", "fixed"), help="align the fitted maps to the first period")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate fitted coordinates")
    p.add_argument("coords")
    p.add_argument("data", help="matrix-sequence CSV")
    p.add_argument("--mask")
    p.add_argument("--metrics", default=",".join(METRICS))
    p.add_argument("--k", type=int, help="hit-rate neighbors (default min(5, n-2))")
    p.add_argument("--align", choices=("per_map", "fixed"), help="align to the first period before scoring")
    p.add_argument("--expand-hitrates", action="store_true", help="add one hit-rate row per period")
    p.add_argument("--out", help="metrics CSV (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tune", help="grid or Bayesian hyperparameter search")
    p.add_argument("data")
    p.add_argument("--mask")
    p.add_argument("--grid", nargs="+", metavar="NAME=SPEC", help="e.g. alpha=0:1.5:15 p=1,2")
    p.add_argument("--bayes", nargs="+", metavar="NAME=LO:HI", help="e.g. alpha=0.001:1.5 p=1:3")
    p.add_argument("--metrics", default="misalign,persistence_inverted")
    p.add_argument("--weights", default="0.95,0.03,0.02", help="static cost weight, then one per metric")
    p.add_argument("--n-calls", type=int, default=20)
    p.add_argument("--n-initial-points", type=int, default=3)
    p.add_argument("--k", type=int)
    p.add_argument("--out", help="evaluation table CSV (default: stdout)")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("simulate", help="ground-truth recovery study")
    p.add_argument("--noise", default="0.01,0.5", help="measurement noise levels")
    p.add_argument("--alphas", default="0,0.3")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--t", type=int, default=10)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--walk-noise", type=float, default=0.25)
    p.add_argument("--momentum", type=float, default=0.6)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--mds-type", choices=("ratio", "interval", "ordinal"), default="ratio")
    p.add_argument("--n-iter", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--n-inits", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rows-out", help="per-replication CSV")
    p.add_argument("--out", help="summary CSV (default: stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="runtime of joint vs independent fitting")
    p.add_argument("--n", default="10,50,100")
    p.add_argument("--t", default="10,50,100")
    p.add_argument("--n-iter", type=int, default=750)
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="timing CSV (default: stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="draw fitted coordinates as SVG")
    p.add_argument("coords")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("static", "dynamic", "trajectories"), default="dynamic")
    p.add_argument("--period", help="period to draw in static mode (default: last)")
    p.add_argument("--mask")
    p.add_argument("--color", help="CSV label,value; equal values share a color")
    p.add_argument("--size", help="CSV label,value; marker area grows with value")
    p.add_argument("--transparency-start", type=float, default=0.1)
    p.add_argument("--transparency-end", type=float, default=1.0)
    p.add_argument("--show-arrows", action="store_true")
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DynMapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
