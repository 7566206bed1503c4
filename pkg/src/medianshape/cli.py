"""Command-line surface: gen / fit / bench / plot-data.

Exit codes: 0 success, 2 input error, 3 fit finished with the budget
exhausted.  All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import sys

import numpy as np

from . import __version__
from . import geometry as geo
from .bench import bench_run
from .fitters import FitConfig, fit
from .geometry import ParamPoint, PointSet
from .testkit import InstanceSpec, gen_instance

POINT_KINDS = ("circle", "sphere", "cylinder", "two-lines")
SHAPES = POINT_KINDS + ("flat-median",)


class CliInputError(Exception):
    pass


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def read_points_csv(path) -> PointSet:
    rows = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise CliInputError(f"cannot open input file {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise CliInputError(
                    f"{path}: malformed CSV at line {lineno}: {line!r}") from exc
    if not rows:
        raise CliInputError(f"{path}: no data rows")
    width = len(rows[0])
    for lineno_like, row in enumerate(rows):
        if len(row) != width:
            raise CliInputError(f"{path}: inconsistent column count")
    try:
        return PointSet(np.array(rows))
    except ValueError as exc:
        raise CliInputError(f"{path}: {exc}") from exc


def read_flats_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise CliInputError(f"cannot open input file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliInputError(f"{path}: invalid JSON: {exc}") from exc
    records = payload.get("flats", payload) if isinstance(payload, dict) else payload
    try:
        return [(np.array(r["anchor"], dtype=float),
                 np.array(r["basis"], dtype=float)) for r in records]
    except (KeyError, TypeError, ValueError) as exc:
        raise CliInputError(f"{path}: bad flats record: {exc}") from exc


def write_points_csv(path, pts: np.ndarray, header: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {header}\n")
        for row in pts:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    cfg = FitConfig(eps=args.eps, objective=args.objective, method=args.method,
                    seed=args.seed, budget=args.budget)
    if args.shape == "flat-median":
        data = read_flats_json(args.input)
    else:
        data = read_points_csv(args.input)
    result = fit(data, args.shape, cfg)
    record = result.to_dict()
    record["config"] = {"shape": args.shape, "objective": args.objective,
                        "eps": args.eps, "method": args.method,
                        "seed": args.seed, "budget": args.budget,
                        "input": args.input}
    record["env"] = {"version": __version__, "seed": args.seed,
                     "timestamp": datetime.datetime.now(
                         datetime.timezone.utc).isoformat()}
    text = json.dumps(record, indent=2)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 3 if result.flags.get("budget_exhausted") else 0


def cmd_gen(args) -> int:
    spec = InstanceSpec(kind=args.kind, n=args.n, noise=args.noise,
                        outlier_frac=args.outliers,
                        outlier_box_scale=args.outlier_box_scale,
                        seed=args.seed)
    data, truth = gen_instance(spec)
    header = (f"kind={args.kind} n={args.n} noise={_fmt(args.noise)} "
              f"outliers={_fmt(args.outliers)} seed={args.seed} truth={truth}")
    if args.kind == "stack-1d":
        write_points_csv(args.out, np.asarray(data)[:, None], header)
    elif args.kind == "lines":
        records = [{"anchor": list(map(float, a)),
                    "basis": [list(map(float, b)) for b in basis]}
                   for a, basis in data]
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            json.dump({"flats": records, "truth": str(truth)}, fh, indent=2)
            fh.write("\n")
    else:
        write_points_csv(args.out, data.points, header)
    return 0


def cmd_bench(args) -> int:
    sizes = [int(float(tok)) for tok in args.sizes.split(",") if tok]
    if not sizes:
        raise CliInputError("empty sizes list")
    rows = bench_run(sizes, eps=args.eps, seed=args.seed, repeats=args.repeats,
                     budget=args.budget)
    out = args.out or "bench.csv"
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "eps", "phase", "median_ms", "cost"])
        for r in rows:
            writer.writerow([r["n"], _fmt(r["eps"]), r["phase"],
                             _fmt(r["median_ms"]),
                             _fmt(r["cost"]) if r["cost"] != "" else ""])
    if args.fig:
        from .plots import render_bench_figure
        render_bench_figure(rows, args.fig)
    return 0


def cmd_plot_data(args) -> int:
    if args.grid < 2:
        raise CliInputError("grid must be >= 2")
    cfg = FitConfig(eps=args.eps, objective=args.objective, seed=args.seed,
                    budget=args.budget)
    if args.shape == "flat-median":
        data = read_flats_json(args.input)
        family = geo.flat_median_family(data)
    else:
        data = read_points_csv(args.input)
        family = _family_for(args.shape, data)
    result = fit(data, args.shape, cfg)
    if result.param_point is None:
        raise CliInputError("fit produced no chart point to slice around")
    vec = result.param_point.as_vector()
    bd = family.base_dim
    try:
        ax1, ax2 = (int(tok) for tok in args.axes.split(","))
    except ValueError as exc:
        raise CliInputError(f"bad --axes spec {args.axes!r}") from exc
    if not (0 <= ax1 <= bd and 0 <= ax2 <= bd and ax1 != ax2):
        raise CliInputError(f"slice axes out of range for {bd + 1} parameters")
    span = args.span
    grids = []
    for ax in (ax1, ax2):
        lo, hi = vec[ax] - span, vec[ax] + span
        if ax == bd:
            lo = max(lo, 0.0)  # height is a radius-like coordinate
        grids.append(np.linspace(lo, hi, args.grid))
    xs, ys = grids
    lines = []
    costs = []
    for x in xs:
        for y in ys:
            v = vec.copy()
            v[ax1], v[ax2] = x, y
            c = geo.cost(family, ParamPoint(v[:bd], v[bd]), args.objective)
            costs.append(c)
            lines.append(f"{_fmt(x)}\t{_fmt(y)}\t{_fmt(c)}")
    out = args.out or "slice.tsv"
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    if args.fig:
        from .plots import render_landscape_figure
        opt = (vec[ax1], vec[ax2])
        render_landscape_figure(xs, ys, costs, args.fig, opt_xy=opt)
    return 0


def _family_for(kind, points: PointSet):
    if kind == "circle":
        return geo.circle_cone_family(points)
    if kind == "sphere":
        return geo.sphere_cone_family(points)
    if kind == "cylinder":
        return geo.cylinder_family(points)
    if kind == "two-lines":
        return geo.line_pair_family(points)
    raise CliInputError(f"unknown shape {kind!r}")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medianshape",
        description="L1/L2 shape fitting via coresets, sampled levels, and "
                    "ladder-quantized search")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a shape to an input file")
    p.add_argument("--shape", required=True, choices=SHAPES)
    p.add_argument("--objective", default="l1", choices=("l1", "l2"))
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--input", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", default="pipeline",
                   choices=("pipeline", "direct", "oracle"))
    p.add_argument("--budget", type=int, default=180000)
    p.add_argument("--output", default=None, help="JSON output path (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    p.add_argument("--kind", required=True,
                   choices=("circle", "sphere", "cylinder", "lines",
                            "two-lines", "stack-1d"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--outliers", type=float, default=0.0)
    p.add_argument("--outlier-box-scale", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="benchmark reduction/search wall time")
    p.add_argument("--sizes", required=True, help="comma-separated n values")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=900)
    p.add_argument("--out", default=None)
    p.add_argument("--fig", default=None, help="also render a PNG figure")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot-data", help="export a cost-landscape slice")
    p.add_argument("--input", required=True)
    p.add_argument("--shape", required=True, choices=SHAPES)
    p.add_argument("--objective", default="l1", choices=("l1", "l2"))
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=180000)
    p.add_argument("--grid", type=int, default=30)
    p.add_argument("--axes", default="0,1", help="two parameter indices to slice")
    p.add_argument("--span", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.add_argument("--fig", default=None, help="also render a PNG heatmap")
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliInputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
