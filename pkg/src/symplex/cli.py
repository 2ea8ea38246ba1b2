"""Command-line entry point: ``symplex run|sweep|plot|dump-problem``."""

import argparse
import sys

import numpy as np

from .exceptions import SymplexError
from .runner import ALGOS, MONITORS, RunConfig, parse_config, run_experiment, sweep_parameter

# flag name -> RunConfig key
_CONFIG_FLAGS = {
    "algo": str, "problem": str, "m": int, "n": int, "mu": float, "seed": int, "r": float, "D": float,
    "L": float, "rho": float, "s": float, "beta0": float, "max-iters": int, "tol": float, "out": str,
    "plot": str, "monitors": str, "stride": int, "wall-seconds": float, "z0": str, "mixing": str,
    "noise": str, "eps": float, "E1": float, "E2": float, "ls-growth": float, "ls-shrink": float,
    "rho-probe": float, "max-backtracks": int,
}


def _add_config_flags(p):
    p.add_argument("--config", help="key=value file; flags override its entries")
    for flag, typ in _CONFIG_FLAGS.items():
        kwargs = {"type": typ, "default": None, "dest": flag.replace("-", "_")}
        if flag == "algo":
            kwargs["help"] = "one of " + ", ".join(ALGOS)
        if flag == "monitors":
            kwargs["help"] = "comma-separated subset of " + ", ".join(MONITORS)
        p.add_argument("--" + flag, **kwargs)
    p.add_argument("--strict", action="store_true", default=None, help="exit nonzero when a monitor fails")
    p.add_argument("--timing", action="store_true", default=None, help="record cumulative wall time per row")
    p.add_argument("--no-restart", dest="restart", action="store_false", default=None,
                   help="disable line-search restarts")


def _config_from_args(args, **extra):
    keys = {f.replace("-", "_") for f in _CONFIG_FLAGS} | {"strict", "timing", "restart"}
    values = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    values.update(extra)
    return parse_config(args.config, **values)


def parse_grid(text):
    """``a,b,c`` or ``start:stop:step`` (inclusive of ``stop`` up to rounding)."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if not step > 0:
            raise ValueError("grid step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(count, 0))]
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_run(args):
    cfg = _config_from_args(args)
    result = run_experiment(cfg)
    s = result.summary
    print(f"{s['algo']} on {s['problem']}: {s['status']} after {s['iterations']} iterations, "
          f"final residual {s['final_res']:.3e}")
    if s["message"]:
        print(f"  {s['message']}")
    for rep in result.reports:
        print(f"  {rep}")
    if cfg.out:
        print(f"trace written to {cfg.out}")
    ok = result.ok
    if not ok and cfg.strict:
        return 2
    return 0 if ok else 1


def cmd_sweep(args):
    cfg = _config_from_args(args, out=None, plot=None, monitors="")
    grid = parse_grid(args.grid)
    rows, best = sweep_parameter(cfg, args.param, grid, out=args.out)
    for r in rows:
        its = "-" if r["iterations_to_tol"] is None else r["iterations_to_tol"]
        print(f"{args.param}={r['param_value']:<10g} iterations={its:<10} status={r['status']}")
    print(f"argmin {args.param} = {best}")
    if args.plot:
        from .plotting import iterations_vs_param

        iterations_vs_param(rows, args.plot, args.param)
    return 0 if best is not None else 1


def cmd_plot(args):
    from .plotting import plot_csv

    logx = {"auto": None, "yes": True, "no": False}[args.logx]
    plot_csv(args.input, args.out, x=args.x, y=args.y, logx=logx, logy=not args.linear_y)
    print(f"plot written to {args.out}")
    return 0


def cmd_dump(args):
    from .problems import dump_problem

    cfg = _config_from_args(args, out=None)
    problem = cfg.problem_spec().build()
    dump_problem(problem, args.out)
    print(f"{problem.name} (dim {problem.dim}) written to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="symplex", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="iterations-to-tolerance over a parameter grid")
    _add_config_flags(p)
    p.add_argument("--param", required=True)
    p.add_argument("--grid", required=True, help="a,b,c or start:stop:step")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="SVG plot of two columns of a trace or sweep CSV")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--x", default="k")
    p.add_argument("--y", default="res_sq")
    p.add_argument("--logx", choices=("auto", "yes", "no"), default="auto")
    p.add_argument("--linear-y", action="store_true")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("dump-problem", help="write a generated problem as matrix CSV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_dump)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "dump-problem" and not args.out:
        parser.error("dump-problem requires --out")
    try:
        return args.func(args)
    except (SymplexError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
