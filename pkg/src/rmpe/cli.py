"""Command line entry point: ``rmpe run | bounds | selftest``."""

from __future__ import annotations

import argparse
import sys

from .errors import (
    ConfigError,
    DomainError,
    NumericalError,
    ParseError,
    ReferenceNotConvergedError,
    StructuralError,
)

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_PARSE = 2
EXIT_NUMERICAL = 3
EXIT_REFERENCE = 4


def _synth(text):
    try:
        m, n, seed = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected m,n,seed") from None
    return m, n, seed


def _methods(text):
    # split on commas that are not inside parentheses: "gradient,rmpe(10)"
    out, depth, cur = [], 0, ""
    for ch in text:
        depth += ch == "("
        depth -= ch == ")"
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return tuple(m for m in (s.strip() for s in out) if m)


def build_parser():
    p = argparse.ArgumentParser(prog="rmpe", description="Regularized extrapolation experiments and bounds.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="compare optimizers on one problem")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--data", metavar="PATH", help="libsvm dataset")
    src.add_argument("--synth", type=_synth, metavar="M,N,SEED", help="synthetic logistic dataset")
    src.add_argument("--quadratic", type=int, metavar="N", help="random SPD quadratic of size N")
    run.add_argument("--cond", type=float, default=100.0, help="condition number of --quadratic")
    run.add_argument("--separability", type=float, default=30.0)
    run.add_argument("--tau", type=float, default=1e-4)
    run.add_argument("--methods", type=_methods, default=("gradient", "nesterov", "rmpe(5)", "rmpe(10)"))
    run.add_argument("--k", type=int, default=5, help="window order for methods given without one")
    run.add_argument("--budget", type=int, default=1000)
    run.add_argument("--lambda0", type=float)
    run.add_argument("--lambda-min", type=float)
    run.add_argument("--step", choices=("short", "fixed"), default="short",
                     help="extrapolation base step: short = 1/L, fixed = 2/(L+mu)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", metavar="PATH", help="CSV output (default stdout)")
    run.add_argument("--no-timing", action="store_true", help="write wall_ns = 0 for reproducible files")
    run.add_argument("--gnuplot", metavar="PATH", help="also write a gnuplot script")

    b = sub.add_parser("bounds", help="bound and speedup curves")
    b.add_argument("--curve", choices=("speedup", "lambda", "bound", "s"), default="speedup")
    b.add_argument("--L", type=float, default=100.0)
    b.add_argument("--mu", type=float, default=10.0)
    b.add_argument("--M", type=float, default=0.1)
    b.add_argument("--d0", type=float, default=1e-4)
    b.add_argument("--k-min", type=int, default=1)
    b.add_argument("--k-max", type=int, default=30)
    b.add_argument("--grid", type=int, default=1000)
    b.add_argument("--out", metavar="PATH")

    st = sub.add_parser("selftest", help="run the acceptance checks")
    st.add_argument("--only", type=lambda s: set(s.split(",")), help="comma separated check numbers")
    return p


def _cmd_run(args):
    from .harness.data import parse_libsvm
    from .harness.experiment import ExperimentConfig, gnuplot_script, run_experiment

    kw = dict(
        methods=args.methods,
        budget=args.budget,
        seed=args.seed,
        tau=args.tau,
        k=args.k,
        lambda0=args.lambda0,
        lambda_min=args.lambda_min,
        step=args.step,
        separability=args.separability,
        timing=not args.no_timing,
    )
    if args.quadratic:
        cfg = ExperimentConfig(problem="quadratic", quad_n=args.quadratic, quad_cond=args.cond, **kw)
    elif args.data:
        cfg = ExperimentConfig(dataset=parse_libsvm(args.data), **kw)
    else:
        cfg = ExperimentConfig(synth=args.synth or (500, 50, args.seed), **kw)
    result = run_experiment(cfg)
    text = result.csv(args.out, timing=cfg.timing)
    if not args.out:
        sys.stdout.write(text)
    if args.gnuplot:
        with open(args.gnuplot, "w") as fh:
            fh.write(gnuplot_script(args.out or "trace.csv", list(result.traces)))
    for name, trace in result.traces.items():
        if trace.diverged:
            print(f"warning: {name} stopped early: {trace.note}", file=sys.stderr)
    return EXIT_OK


def _cmd_bounds(args):
    from .bounds import BoundInputs, lambda_curve, rmpe_bound, s_k_alpha, speedup_curve, write_curve_csv
    from .objectives import ProblemSpec

    spec = ProblemSpec(args.L, args.mu, args.M)
    ks = range(args.k_min, args.k_max + 1)
    if args.curve == "speedup":
        rows = speedup_curve(spec, args.d0, ks, args.grid)
    elif args.curve == "lambda":
        rows = lambda_curve(spec, args.d0, ks)
    elif args.curve == "s":
        rows = [(k, s_k_alpha(k, spec.sigma, 0.0, args.grid).value) for k in ks]
    else:
        from .bounds import gradient_model_bounds

        rows = []
        for k in ks:
            lam = gradient_model_bounds(spec, args.d0, k).P_norm
            rows.append((k, rmpe_bound(BoundInputs(spec, args.d0, k, lam, grid_size=args.grid))))
    if args.out:
        write_curve_csv(args.out, rows)
    else:
        print("k,value")
        for k, v in rows:
            print(f"{k},{v!r}")
    return EXIT_OK


def _cmd_selftest(args):
    from .checks import run_all

    results = run_all(args.only)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED_CHECK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "bounds": _cmd_bounds, "selftest": _cmd_selftest}[args.command]
    try:
        return handler(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigError, DomainError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ReferenceNotConvergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFERENCE
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
