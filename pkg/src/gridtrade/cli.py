"""Command-line front end.

Subcommands: ``solve`` (one equilibrium computation), ``sweep <kind>``
(the experiment sweeps, CSV plus rendered figure), and ``stackelberg``
(leader price grid search). Exit codes: 0 on success, 1 on usage or
config errors, 2 when a solver fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .cgt import RelaxationSettings, kkt_verify, relaxation_solve, sequential_solve
from .config import DEFAULT_SEED, ConfigError, load_scenario, parse_config, default_config
from .market import company_utility, unit_price
from .pt_solver import PtSearchSettings, relaxation_solve_pt, sequential_best_response
from .stackelberg import epsilon_se_grid, verify_se
from .sweeps import SWEEP_KINDS, SweepSpec, run_sweep, _cell

__all__ = ["main"]

_SWEEP_CLI_NAMES = tuple(kind.replace("_", "-") for kind in SWEEP_KINDS)


class _Parser(argparse.ArgumentParser):
    # usage problems are exit code 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="scenario config file (default: built-in 9-prosumer grid)")
    common.add_argument("--out", type=Path, default=None, help="output CSV path")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help="64-bit seed for scenario generation")
    common.add_argument("--model", choices=("cgt", "pt"), default="pt",
                        help="follower behavior model")
    common.add_argument("--solver", choices=("relaxation", "sequential"), default=None,
                        help="equilibrium dynamics (default: relaxation for cgt, "
                             "sequential for pt)")
    common.add_argument("--epsilon", type=float, default=None,
                        help="leader grid step / SE precision")
    common.add_argument("--tol", type=float, default=None,
                        help="solver stopping tolerance")
    common.add_argument("--max-iters", type=int, default=None,
                        help="iteration / sweep budget")
    common.add_argument("--jobs", type=int, default=1,
                        help="concurrent sweep points")
    common.add_argument("--gnuplot", action="store_true",
                        help="also emit a gnuplot script next to the CSV")
    common.add_argument("--no-plot", action="store_true",
                        help="skip rendering the matplotlib figure")

    parser = _Parser(prog="gridtrade",
                     description="prosumer energy-trading equilibria and sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common],
                   help="solve one followers' game and print the equilibrium")
    sweep = sub.add_parser("sweep", parents=[common], help="run an experiment sweep")
    sweep.add_argument("kind", choices=_SWEEP_CLI_NAMES)
    sub.add_parser("stackelberg", parents=[common],
                   help="epsilon-grid leader search over the base price")
    return parser


def _solver_choice(args) -> str:
    if args.solver is not None:
        return args.solver
    return "relaxation" if args.model == "cgt" else "sequential"


def _search_settings(args) -> PtSearchSettings:
    kwargs = {}
    if args.tol is not None:
        kwargs["step_tol"] = args.tol
    if args.max_iters is not None:
        kwargs["max_sweeps"] = args.max_iters
    return PtSearchSettings(**kwargs)


def _relax_settings(args, default_tol: float, default_iters: int) -> RelaxationSettings:
    return RelaxationSettings(
        tol=args.tol if args.tol is not None else default_tol,
        max_iters=args.max_iters if args.max_iters is not None else default_iters,
    )


def _write_trace(report, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("t", "residual"))
        for t, value in report.residual_trace:
            writer.writerow((str(int(t)), repr(float(value))))


def _cmd_solve(args) -> int:
    scenario = load_scenario(args.config, args.seed)
    solver = _solver_choice(args)
    if args.model == "cgt":
        if solver == "relaxation":
            report = relaxation_solve(scenario, _relax_settings(args, 1e-12, 1_000_000))
        else:
            report = sequential_solve(
                scenario,
                step_tol=args.tol if args.tol is not None else 1e-9,
                max_sweeps=args.max_iters if args.max_iters is not None else 10_000,
            )
    else:
        if solver == "sequential":
            report = sequential_best_response(scenario, _search_settings(args))
        else:
            report = relaxation_solve_pt(scenario,
                                         _relax_settings(args, 1e-8, 50_000))

    profile = report.profile
    total = float(np.sum(profile))
    print(f"model={args.model} solver={report.method} prosumers={scenario.n}")
    print("profile_kwh=" + " ".join(f"{v:.6f}" for v in profile))
    print(f"total_load_kwh={total:.6f}")
    print(f"unit_price_usd_per_kwh={unit_price(profile, scenario.market):.6f}")
    print(f"company_profit_usd={company_utility(profile, scenario.market):.6f}")
    print(f"iterations={report.iterations} converged={str(report.converged).lower()}")
    print(f"final_residual={report.final_residual:.3e}")
    if report.epsilon is not None:
        print(f"certified_epsilon_usd={report.epsilon:.3e}")
    if report.concavity_certified is not None:
        print(f"concavity_certified={str(report.concavity_certified).lower()}")
    if args.model == "cgt":
        cert = kkt_verify(scenario, profile, tol=1e-6)
        print(
            "kkt stationarity={:.3e} complementarity={:.3e} duality_gap={:.3e} ok={}"
            .format(cert.stationarity_residual, cert.complementarity_residual,
                    cert.duality_gap, str(cert.ok).lower())
        )
    if args.out is not None:
        _write_trace(report, args.out)
        print(f"trace_csv={args.out}")
    return 0 if report.converged else 2


def _cmd_sweep(args) -> int:
    kind = args.kind.replace("-", "_")
    out = args.out if args.out is not None else Path(f"{kind}.csv")
    kwargs = {}
    if args.config is not None:
        kwargs["config"] = parse_config(args.config)
    if args.epsilon is not None:
        kwargs["epsilon"] = args.epsilon
    if args.tol is not None or args.max_iters is not None:
        search_kwargs = {}
        if args.tol is not None:
            search_kwargs["step_tol"] = args.tol
        if args.max_iters is not None:
            search_kwargs["max_sweeps"] = args.max_iters
        kwargs["search"] = PtSearchSettings(**search_kwargs)
    spec = SweepSpec(kind=kind, out=out, seed=args.seed, jobs=args.jobs, **kwargs)

    result = run_sweep(spec)
    print(f"sweep={kind} rows={len(result.rows)} failures={result.failures}")
    print(f"csv={out}")
    if not args.no_plot:
        from .plots import render_figure

        print(f"figure={render_figure(result, out)}")
    if args.gnuplot:
        from .plots import write_gnuplot_script

        print(f"gnuplot={write_gnuplot_script(result, out)}")
    return 2 if result.failures else 0


def _cmd_stackelberg(args) -> int:
    scenario = load_scenario(args.config, args.seed)
    epsilon = args.epsilon if args.epsilon is not None else 1e-3
    follower_settings = None
    if args.model == "cgt" and (args.tol is not None or args.max_iters is not None):
        follower_settings = _relax_settings(args, 1e-12, 200_000)
    try:
        result = epsilon_se_grid(
            scenario, epsilon,
            follower_model=args.model,
            follower_settings=follower_settings,
            search_settings=_search_settings(args) if args.model == "pt" else None,
            follower_solver=args.solver if args.model == "pt" else None,
        )
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    check = verify_se(result, scenario)
    print(f"follower_model={args.model} epsilon={epsilon}")
    print(f"rho_star_usd_per_kwh={result.rho_star:.6f}")
    print(f"leader_profit_usd={result.leader_profit:.6f}")
    print("follower_profile_kwh=" + " ".join(f"{v:.6f}" for v in result.follower_profile))
    print(f"grid_points={len(result.grid)} "
          f"total_follower_iterations={result.total_follower_iterations}")
    print(f"verified={str(check.ok).lower()} "
          f"follower_epsilon={check.follower_epsilon:.3e} "
          f"leader_gap={check.leader_gap:.3e}")
    if result.note:
        print(f"note: {result.note}")

    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("rho_base_usd_per_kwh", "profit_usd",
                             "follower_epsilon_usd", "converged"))
            for point in result.grid:
                writer.writerow((
                    _cell(point.rho_base), _cell(point.profit),
                    _cell(point.follower_epsilon),
                    "true" if point.converged else "false",
                ))
        print(f"csv={args.out}")
        if not args.no_plot:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt

            fig, ax = plt.subplots(figsize=(7, 4.2))
            ax.plot([p.rho_base for p in result.grid],
                    [p.profit for p in result.grid], "b-")
            ax.axvline(result.rho_star, color="r", linestyle="--",
                       label=f"rho* = {result.rho_star:.4f}")
            ax.set_xlabel("base price ($/kWh)")
            ax.set_ylabel("company profit ($)")
            ax.set_title("Leader profit over the price grid")
            ax.grid(True, alpha=0.3)
            ax.legend()
            fig.tight_layout()
            png = args.out.with_suffix(".png")
            fig.savefig(png, dpi=150)
            plt.close(fig)
            print(f"figure={png}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "stackelberg":
            return _cmd_stackelberg(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
