"""Command line entry point: quadrature, project, solve and converge subcommands.

Exit codes: 0 success, 2 configuration error, 3 when every run diverged.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time

from . import expr as ex
from .jacobi import gauss_lobatto
from .solver import DivergenceError, SolveConfig, integrate
from .spaces import error_norms, interpolate, numeric_derivative, project_H10, project_L2
from .study import ConfigError, StudyConfig, StudyDivergenceError, run_study, write_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _n_list(text):
    try:
        values = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --n-list {text!r}") from exc
    if not values or any(n < 2 for n in values):
        raise argparse.ArgumentTypeError("--n-list needs integers >= 2")
    return values


def cmd_quadrature(args):
    rule = gauss_lobatto(args.n, args.mu)
    lines = ["j,node,weight"]
    lines += [f"{j},{x:.17g},{w:.17g}" for j, (x, w) in enumerate(zip(rule.nodes, rule.weights))]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_project(args):
    e = ex.parse(args.f)
    if ex.free_vars(e) - {"x"}:
        raise ConfigError("--f may only depend on x")
    f = lambda x: ex.evaluate(e, x)  # noqa: E731
    try:
        dx = ex.diff(e, "x")
        df = lambda x: ex.evaluate(dx, x)  # noqa: E731
    except ex.UnsupportedDerivativeError:
        df = numeric_derivative(f)
    lines = ["N,err_l2w,err_h1w"]
    for n in args.n_list:
        if args.op == "l2":
            approx = project_L2(f, n, args.mu)
        elif args.op == "h10":
            approx = project_H10(f, n, args.mu, df=df)
        else:
            approx = interpolate(f, gauss_lobatto(n, args.mu))
        l2, h1 = error_norms(approx, f, df)
        lines.append(f"{n},{l2:.17g},{h1:.17g}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_solve(args):
    cfg = StudyConfig.load(args.config)
    scheme = args.scheme or cfg.schemes[0]
    n = args.n or max(cfg.n_list)
    spec = cfg.forced_problem()
    t0 = time.perf_counter()
    traj = integrate(spec, SolveConfig(scheme, n, cfg.dt, args.integrator))
    wall = time.perf_counter() - t0
    fld = traj.final
    lines = [f"# scheme={scheme} N={n} mu={cfg.mu:g} dt={cfg.dt:g} T={cfg.T:g} wall_time={wall:.6f}", "x,v"]
    lines += [f"{x:.17g},{v:.17g}" for x, v in zip(fld.rule.nodes, fld.values)]
    _emit("\n".join(lines) + "\n", args.out or None)
    return EXIT_OK


def cmd_converge(args):
    cfg = StudyConfig.load(args.config)
    report = run_study(cfg, threads=args.threads, reference=args.reference,
                       integrator=args.integrator, sup_time=args.sup_time)
    out = args.out or cfg.out
    text = write_report(report, out or None)
    if not out:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="pseudospec", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent runs")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quadrature", help="Gauss-Lobatto-Jacobi nodes and weights as CSV")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--mu", type=float, required=True)
    q.add_argument("--out")
    q.set_defaults(func=cmd_quadrature)

    pr = sub.add_parser("project", help="projection/interpolation errors over N")
    pr.add_argument("--op", choices=("l2", "h10", "interp"), required=True)
    pr.add_argument("--mu", type=float, required=True)
    pr.add_argument("--f", required=True, help="expression in x")
    pr.add_argument("--n-list", type=_n_list, default=[8, 16, 32, 64])
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_project)

    for name, func, helptext in (("solve", cmd_solve, "integrate one problem to T"),
                                 ("converge", cmd_converge, "convergence study over n_list")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--out")
        s.add_argument("--integrator", choices=("rk4", "implicit-trapezoid"), default="rk4")
        s.set_defaults(func=func)
        if name == "solve":
            s.add_argument("--scheme", choices=("galerkin", "collocation"))
            s.add_argument("--n", type=int)
        else:
            s.add_argument("--reference", action="store_true",
                           help="measure against a Galerkin run at twice the largest N")
            s.add_argument("--sup-time", action="store_true",
                           help="max error over stored samples instead of final time")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except (ConfigError, ex.ExprError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StudyDivergenceError, DivergenceError) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
