"""Command-line entry point.

Subcommands:
    mml run <config.toml> [--plot] [--out DIR]
    mml memory-time <curve.csv> --threshold F0 [--degree D] [--table FILE]
    mml extrapolate <curve.csv...> [--column f_gauss|f_opt] [--out FILE]
    mml scaling <table.csv> [--plot FILE]
    mml oracle prior-knowledge <config.toml>
    mml selftest
    mml plot <curve.csv...> --out FILE

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mml",
                                     description="Majorana-chain quantum memory lab")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario sweep")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--out", type=Path, default=None,
                       help="override the configured output directory")
    p_run.add_argument("--plot", action="store_true",
                       help="render a PNG next to each curve file")

    p_mt = sub.add_parser("memory-time", help="threshold crossing of a curve file")
    p_mt.add_argument("curve", type=Path)
    p_mt.add_argument("--threshold", type=float, required=True)
    p_mt.add_argument("--degree", type=int, default=6)
    p_mt.add_argument("--window-margin", type=float, default=0.2)
    p_mt.add_argument("--table", type=Path, default=None,
                      help="append the result to a memory-time table")

    p_ex = sub.add_parser("extrapolate", help="infinite-ensemble limit from curves")
    p_ex.add_argument("curves", type=Path, nargs="+")
    p_ex.add_argument("--column", choices=("f_gauss", "f_opt"), default="f_gauss")
    p_ex.add_argument("--out", type=Path, default=None)

    p_sc = sub.add_parser("scaling", help="exponential fit of a memory-time table")
    p_sc.add_argument("table", type=Path)
    p_sc.add_argument("--plot", type=Path, default=None)

    p_or = sub.add_parser("oracle", help="dense reference computations")
    or_sub = p_or.add_subparsers(dest="oracle_command", required=True)
    p_pk = or_sub.add_parser("prior-knowledge",
                             help="coarse-knowledge recovery bound experiment")
    p_pk.add_argument("config", type=Path)

    sub.add_parser("selftest", help="run the dense-oracle equivalence gates")

    p_pl = sub.add_parser("plot", help="render curve files to a figure")
    p_pl.add_argument("curves", type=Path, nargs="+")
    p_pl.add_argument("--out", type=Path, required=True)
    return parser


def _cmd_run(args) -> int:
    from .config import ConfigError, load_config
    from .harness import run_scenario

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    paths, failures = run_scenario(cfg, args.out)
    if args.plot:
        from .curves import parse_curve
        from .plotting import plot_curves

        for path in paths:
            if path.suffix == ".csv" and "diag" not in path.stem and "prior" not in path.stem:
                curve = parse_curve(path)
                plot_curves([curve], path.with_suffix(".png"), title=path.stem)
        overview = [parse_curve(p) for p in paths
                    if p.suffix == ".csv" and "diag" not in p.stem and "prior" not in p.stem]
        if overview:
            plot_curves(overview, Path(paths[0]).parent / f"{cfg.scenario_id}_overview.png",
                        title=cfg.scenario_id)
    for path in paths:
        print(path)
    if failures:
        for f in failures:
            print(f"cell N={f.n} N_d={f.nd} failed: {f.error}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_memory_time(args) -> int:
    from .curves import parse_curve
    from .harness import TABLE_HEADER, memory_time

    curve = parse_curve(args.curve)
    try:
        mt = memory_time(curve, args.threshold, degree=args.degree,
                         window_margin=args.window_margin)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if mt.beyond_horizon:
        print(f"beyond horizon: no crossing of {args.threshold} up to t = {mt.horizon}")
    else:
        print(f"t0 = {mt.t0!r}  (threshold {mt.f0}, window {mt.window:.4g}, "
              f"degree {mt.degree}, rms residual {mt.residual:.2e})")
        if mt.sensitivity:
            sens = ", ".join(f"deg {d}: {v:.6g}" for d, v in sorted(mt.sensitivity.items()))
            print(f"degree sensitivity: {sens}")
        if mt.fallback:
            print("note: fit had no root in the window; linear interpolation used")
    if args.table is not None:
        fresh = not args.table.exists()
        with args.table.open("a") as fh:
            if fresh:
                fh.write(TABLE_HEADER + "\n")
            fh.write(mt.to_row(curve.n_sites) + "\n")
        print(f"appended to {args.table}")
    return EXIT_OK


def _cmd_extrapolate(args) -> int:
    from .curves import parse_curve
    from .harness import extrapolate_nd

    curves = [parse_curve(p) for p in args.curves]
    base = curves[0]
    if any(not np.array_equal(c.times, base.times) for c in curves):
        print("error: curves must share one time grid", file=sys.stderr)
        return EXIT_CONFIG
    kind = "gauss" if args.column == "f_gauss" else "opt"
    cols = [getattr(c, args.column) for c in curves]
    if any(col is None for col in cols):
        print(f"error: some curves lack column {args.column}", file=sys.stderr)
        return EXIT_CONFIG
    nds = [c.n_members for c in curves]
    rows = ["t,limit,mode,diagnostic"]
    for i, t in enumerate(base.times):
        res = extrapolate_nd(list(zip(nds, (col[i] for col in cols))), kind)
        rows.append(f"{t!r},{res.limit!r},{res.mode},{res.diagnostic!r}")
    text = "\n".join(rows) + "\n"
    if args.out is not None:
        args.out.write_text(text)
        print(args.out)
    else:
        print(text, end="")
    return EXIT_OK


def _cmd_scaling(args) -> int:
    from .harness import scaling_fit

    lines = args.table.read_text().strip().splitlines()
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        n = int(parts[0])
        t0 = float(parts[2]) if parts[2] else float("nan")
        rows.append((n, t0))
    try:
        fit = scaling_fit(rows)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"rate c = {fit.rate:.6g} per site, prefactor A = {fit.prefactor:.6g}, "
          f"R^2 = {fit.r_squared:.4f} ({fit.n_used} points)")
    if args.plot is not None:
        from .plotting import plot_scaling
        clean = [(n, t) for n, t in rows if np.isfinite(t)]
        plot_scaling([n for n, _ in clean], [t for _, t in clean], fit, args.plot)
        print(args.plot)
    return EXIT_OK


def _cmd_prior(args) -> int:
    from .config import ConfigError, load_config
    from .harness import run_scenario

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.kind != "prior-knowledge":
        print("configuration error: scenario kind must be prior-knowledge", file=sys.stderr)
        return EXIT_CONFIG
    paths, failures = run_scenario(cfg)
    for path in paths:
        print(path)
        print(Path(path).read_text(), end="")
    if failures:
        for f in failures:
            print(f"instance {f.nd} at N={f.n}: {f.error}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_selftest(_args) -> int:
    from .selftest import run_gates

    results = run_gates(verbose=True)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


def _cmd_plot(args) -> int:
    from .curves import parse_curve
    from .plotting import plot_curves

    curves = [parse_curve(p) for p in args.curves]
    plot_curves(curves, args.out)
    print(args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "memory-time":
            return _cmd_memory_time(args)
        if args.command == "extrapolate":
            return _cmd_extrapolate(args)
        if args.command == "scaling":
            return _cmd_scaling(args)
        if args.command == "oracle":
            return _cmd_prior(args)
        if args.command == "selftest":
            return _cmd_selftest(args)
        if args.command == "plot":
            return _cmd_plot(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
