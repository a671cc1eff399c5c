"""Command-line driver.

Subcommands:
  run CONFIG     execute one experiment config and write its output dir
  gibbs CONFIG   compute the equilibrium Gibbs state of a gradient config
  rates          closed-form vs estimated vs fitted rates on 1-d families
  order          grid-refinement study of the periodic heat flow

Exit codes: 0 success, 1 numerical failure (blow-up, lost mass,
non-convergence), 2 configuration or input error.
"""

import argparse
import math
import os
import sys

from .config import ConfigError, load_config
from .dynamics import MassConservationError, StiffnessError
from .energy import ConvergenceError, free_energy, gibbs_fixed_point, gibbs_residual
from .experiment import (
    OUTPUT_ROOT_ENV,
    build_graph,
    build_model,
    run_experiment,
    write_density_csv,
)
from .metric import SingularSystemError
from .rate import EstimationError, FitError
from .studies import periodic_heat_convergence, rates_table

_NUMERICAL = (
    StiffnessError,
    MassConservationError,
    ConvergenceError,
    SingularSystemError,
    EstimationError,
    FitError,
)


def _cmd_run(args):
    cfg = load_config(args.config)
    manifest = run_experiment(
        cfg, output_root=args.output_root, rate_restarts=args.restarts
    )
    print(f"name = {manifest['name']}")
    print(f"outdir = {manifest['outdir']}")
    print(f"steps = {manifest['steps']}")
    print(f"final_t = {manifest['final_t']:.15g}")
    print(f"stop_reason = {manifest['stop_reason']}")
    print(f"final_free_energy = {manifest['final_free_energy']:.15g}")
    print(f"final_dissipation = {manifest['final_dissipation']:.15g}")
    print(f"final_rhs_sup = {manifest['final_rhs_sup']:.15g}")
    print(f"max_mass_error = {manifest['max_mass_error']:.15g}")
    print(f"lyapunov_violations = {manifest['lyapunov_violations']}")
    print(f"strict_local_maxima = {manifest['strict_local_maxima']}")
    rate = manifest["rate"]
    if rate is not None:
        print(f"lambda_estimate = {rate['lambda_estimate']:.15g}")
        print(f"predicted_decay = {rate['predicted_decay']:.15g}")
        print(f"fitted_decay = {rate['fitted_decay']:.15g}")
        print(f"gibbs_residual = {rate['gibbs_residual']:.15g}")
    return 0


def _cmd_gibbs(args):
    cfg = load_config(args.config)
    if cfg.model.kind != "gradient":
        raise ConfigError(["gibbs requires a gradient-flow config"])
    g = build_graph(cfg.graph)
    spec, _ = build_model(cfg, g)
    rho = gibbs_fixed_point(spec, tol=args.tol, graph=g)
    root = args.output_root or os.environ.get(OUTPUT_ROOT_ENV) or os.getcwd()
    outdir = os.path.join(root, cfg.output.dir)
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "gibbs.csv")
    write_density_csv(path, g, rho)
    print(f"gibbs_csv = {path}")
    print(f"residual = {gibbs_residual(spec, rho):.15g}")
    print(f"free_energy = {free_energy(spec, rho):.15g}")
    return 0


def _cmd_rates(args):
    rows = rates_table(
        args.family,
        args.n_min,
        args.n_max,
        a=args.a,
        b=args.b,
        step=args.step,
        restarts=args.restarts,
        seed=args.seed,
        beta=args.beta,
        fit_runs=not args.no_fit,
    )
    header = (
        f"{'n':>5} {'dx':>10} {'closed_form':>14} {'estimate':>14} "
        f"{'fitted':>14} {'r2':>8} {'limit':>12} {'cycle/lattice':>14}"
    )
    print(header)
    for r in rows:
        print(
            f"{r['n']:>5d} {r['dx']:>10.5g} {r['lambda_closed_form']:>14.8g} "
            f"{r['lambda_estimate']:>14.8g} {r['fitted_decay']:>14.8g} "
            f"{r['fit_r_squared']:>8.4f} {r['limit']:>12.6g} "
            f"{r['cycle_over_lattice']:>14.8g}"
        )
    return 0


def _cmd_order(args):
    rows = periodic_heat_convergence(
        levels=args.levels,
        n0=args.n0,
        beta=args.beta,
        amplitude=args.amplitude,
        t_final=args.t_final,
    )
    print(f"{'n':>6} {'dx':>10} {'error':>14} {'order':>8} {'steps':>9}")
    for r in rows:
        order = "-" if math.isnan(r["order"]) else f"{r['order']:.3f}"
        print(
            f"{r['n']:>6d} {r['dx']:>10.5g} {r['error']:>14.6e} "
            f"{order:>8} {r['steps']:>9d}"
        )
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="graphfp",
        description=(
            "Entropy-dissipating flows on graphs: run experiments, compute "
            "Gibbs states, and tabulate convergence rates."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="path to a .cfg experiment file")
    p_run.add_argument(
        "--output-root",
        default=None,
        help=f"base directory for outputs (default: ${OUTPUT_ROOT_ENV} or cwd)",
    )
    p_run.add_argument(
        "--restarts", type=int, default=64,
        help="multistart count for the rate estimate (default 64)",
    )
    p_run.set_defaults(func=_cmd_run)

    p_gibbs = sub.add_parser("gibbs", help="equilibrium state of a gradient config")
    p_gibbs.add_argument("config", help="path to a .cfg experiment file")
    p_gibbs.add_argument("--output-root", default=None)
    p_gibbs.add_argument("--tol", type=float, default=1e-12)
    p_gibbs.set_defaults(func=_cmd_gibbs)

    p_rates = sub.add_parser(
        "rates", help="rate table for 1-d entropy flows (closed form vs numeric)"
    )
    p_rates.add_argument("--family", required=True, choices=("lattice", "cycle"))
    p_rates.add_argument("--n-min", type=int, required=True)
    p_rates.add_argument("--n-max", type=int, required=True)
    p_rates.add_argument("--step", type=int, default=1)
    p_rates.add_argument("--a", type=float, default=0.0)
    p_rates.add_argument("--b", type=float, default=1.0)
    p_rates.add_argument("--beta", type=float, default=1.0)
    p_rates.add_argument("--restarts", type=int, default=64)
    p_rates.add_argument("--seed", type=int, default=0)
    p_rates.add_argument(
        "--no-fit", action="store_true",
        help="skip the heat-flow runs (closed form and estimate only)",
    )
    p_rates.set_defaults(func=_cmd_rates)

    p_order = sub.add_parser(
        "order", help="observed spatial order on the periodic heat flow"
    )
    p_order.add_argument("--levels", type=int, default=3)
    p_order.add_argument("--n0", type=int, default=32)
    p_order.add_argument("--beta", type=float, default=0.25)
    p_order.add_argument("--amplitude", type=float, default=0.8)
    p_order.add_argument("--t-final", type=float, default=0.05)
    p_order.set_defaults(func=_cmd_order)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.errors:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except _NUMERICAL as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
