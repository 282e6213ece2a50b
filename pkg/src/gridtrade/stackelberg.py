"""Leader-side optimization: epsilon-grid search over the base price.

The company walks a price grid of step ``epsilon`` across its admissible
interval, solves the followers' game at every price with a pluggable
follower model, and keeps the price maximizing its profit (ties toward
the smaller price). The companion verifier re-checks both equilibrium
conditions at grid resolution: the follower profile must be an
epsilon-NE at the chosen price, and no grid price may beat the chosen
profit by more than epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .cgt import (
    RelaxationSettings,
    cgt_deviation_epsilon,
    relaxation_solve,
)
from .market import Scenario, company_utility
from .pt_solver import (
    PtSearchSettings,
    pt_deviation_epsilon,
    relaxation_solve_pt,
    sequential_best_response,
)

__all__ = [
    "GridPoint",
    "StackelbergResult",
    "SeVerification",
    "epsilon_se_grid",
    "verify_se",
]


@dataclass(frozen=True)
class GridPoint:
    """Diagnostics of one leader price on the search grid."""

    rho_base: float
    profit: float
    follower_epsilon: float
    converged: bool


@dataclass(frozen=True)
class StackelbergResult:
    """Outcome of the epsilon-grid leader search."""

    rho_star: float
    follower_profile: np.ndarray
    leader_profit: float
    grid: tuple[GridPoint, ...]
    epsilon: float
    follower_model: str
    total_follower_iterations: int
    note: str = ""


@dataclass(frozen=True)
class SeVerification:
    """Residuals of the two equilibrium conditions at grid resolution."""

    ok: bool
    follower_epsilon: float  # largest unilateral follower gain at rho_star
    leader_gap: float        # best grid profit minus profit at rho_star
    profit_mismatch: float   # |stored leader profit - recomputed profit|


def _leader_grid(lo: float, hi: float, epsilon: float) -> list[float]:
    span = hi - lo
    steps = int(math.floor(span / epsilon + 1e-9))
    points = [min(lo + k * epsilon, hi) for k in range(steps + 1)]
    if points[-1] < hi - 1e-9 * epsilon:
        points.append(hi)
    return points


def _solve_followers(scenario: Scenario, follower_model: str, follower_solver: str,
                     follower_settings: RelaxationSettings | None,
                     search_settings: PtSearchSettings | None):
    """Returns (profile, follower_epsilon, converged, iterations)."""
    if follower_model == "cgt":
        report = relaxation_solve(
            scenario,
            follower_settings or RelaxationSettings(tol=1e-12, max_iters=200_000),
        )
        eps = cgt_deviation_epsilon(scenario, report.profile)
        return report.profile, eps, report.converged, report.iterations
    if follower_model == "pt":
        if follower_solver == "sequential":
            report = sequential_best_response(scenario, search_settings)
            eps = report.epsilon
        elif follower_solver == "relaxation":
            report = relaxation_solve_pt(scenario, follower_settings, search_settings)
            eps = None
        else:
            raise ValueError(f"unknown follower solver: {follower_solver!r}")
        if eps is None:
            eps = pt_deviation_epsilon(scenario, report.profile,
                                       settings=search_settings)
        return report.profile, eps, report.converged, report.iterations
    raise ValueError(f"unknown follower model: {follower_model!r}")


def epsilon_se_grid(scenario: Scenario, epsilon: float,
                    follower_model: str = "cgt",
                    follower_settings: RelaxationSettings | None = None,
                    search_settings: PtSearchSettings | None = None,
                    follower_solver: str | None = None) -> StackelbergResult:
    """Grid search for an epsilon-Stackelberg equilibrium.

    At every grid price the followers' game is solved to an epsilon-NE
    and the leader profit recorded; non-converged prices stay in the
    diagnostics but cannot be selected. Raises only if every price fails.
    For prospect followers the fixed point found by the deterministic
    solver is reported as is: no uniqueness is guaranteed, which is
    flagged in ``note``.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    m = scenario.market
    if follower_solver is None:
        follower_solver = "sequential" if follower_model == "pt" else "relaxation"

    best: GridPoint | None = None
    best_profile: np.ndarray | None = None
    grid: list[GridPoint] = []
    total_iters = 0

    for rho in _leader_grid(m.leader_lo, m.leader_hi, epsilon):
        priced = replace(scenario, market=m.with_rho_base(rho))
        profile, f_eps, converged, iters = _solve_followers(
            priced, follower_model, follower_solver, follower_settings,
            search_settings,
        )
        total_iters += iters
        profit = company_utility(profile, priced.market)
        point = GridPoint(rho_base=rho, profit=profit,
                          follower_epsilon=f_eps, converged=converged)
        grid.append(point)
        if converged and (best is None or profit > best.profit):
            best = point
            best_profile = profile

    if best is None:
        raise RuntimeError(
            "follower solve failed to converge at every leader grid price"
        )

    note = ""
    if follower_model == "pt":
        note = ("prospect followers: equilibrium uniqueness not guaranteed; "
                f"reporting the {follower_solver} solver's fixed point")
    return StackelbergResult(
        rho_star=best.rho_base,
        follower_profile=best_profile,
        leader_profit=best.profit,
        grid=tuple(grid),
        epsilon=epsilon,
        follower_model=follower_model,
        total_follower_iterations=total_iters,
        note=note,
    )


def verify_se(result: StackelbergResult, scenario: Scenario,
              follower_model: str | None = None,
              epsilon: float | None = None,
              search_settings: PtSearchSettings | None = None) -> SeVerification:
    """Re-check both Stackelberg conditions on a grid-search result.

    (a) the follower profile at the chosen price is an epsilon-NE, and
    (b) no grid price earned more than the chosen profit plus epsilon.
    Returns the residuals; never raises on failure.
    """
    follower_model = follower_model or result.follower_model
    epsilon = epsilon if epsilon is not None else result.epsilon

    priced = replace(scenario, market=scenario.market.with_rho_base(result.rho_star))
    if follower_model == "cgt":
        f_eps = cgt_deviation_epsilon(priced, result.follower_profile)
    else:
        f_eps = pt_deviation_epsilon(priced, result.follower_profile,
                                     settings=search_settings)

    profit_here = company_utility(result.follower_profile, priced.market)
    mismatch = abs(result.leader_profit - profit_here)
    best_grid = max(
        (p.profit for p in result.grid if p.converged), default=-math.inf
    )
    leader_gap = best_grid - profit_here

    ok = f_eps <= epsilon and leader_gap <= epsilon and mismatch <= 1e-9
    return SeVerification(
        ok=ok,
        follower_epsilon=f_eps,
        leader_gap=leader_gap,
        profit_mismatch=mismatch,
    )
