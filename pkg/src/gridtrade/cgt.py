"""Followers' Nash equilibrium under classical expected utility.

The game is a box-constrained concave quadratic game with a closed-form
best response, so everything here is cheap and exact: the relaxation
learning iteration (convex combination of current action and best
response with weight 1/sqrt(t)), the Nikaido-Isoda deviation-gain
function used both as a stopping rule and a convergence diagnostic, a
KKT certificate with analytically recovered duals, and an exhaustive
grid oracle for small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .market import MarketParams, Scenario

__all__ = [
    "RelaxationSettings",
    "EquilibriumReport",
    "KKTCertificate",
    "best_response_cgt",
    "best_responses_cgt",
    "cgt_deviation_epsilon",
    "project_onto_box",
    "nikaido_isoda",
    "ni_residual",
    "relaxation_solve",
    "sequential_solve",
    "kkt_verify",
    "brute_force_ne",
]


@dataclass(frozen=True)
class RelaxationSettings:
    """Stopping rule and initialization for the relaxation iteration."""

    max_iters: int = 1_000_000
    tol: float = 1e-8                      # Nikaido-Isoda residual threshold, $
    initial_profile: np.ndarray | None = None  # None -> midpoint of each box

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")


@dataclass(frozen=True)
class EquilibriumReport:
    """Outcome of one equilibrium computation.

    ``residual_trace`` is an (iterations, 2) array of (t, residual) rows;
    the residual is the Nikaido-Isoda deviation gain for relaxation runs
    and the sup-norm profile change per sweep for sequential runs.
    ``epsilon`` carries the post-hoc best-deviation certificate when one
    was computed, ``concavity_certified`` whether every player stayed in
    a provably concave regime at every visited profile (prospect runs).
    """

    profile: np.ndarray
    iterations: int
    residual_trace: np.ndarray
    converged: bool
    method: str = "relaxation"
    epsilon: float | None = None
    concavity_certified: bool | None = None

    @property
    def final_residual(self) -> float:
        return float(self.residual_trace[-1, 1])


@dataclass(frozen=True)
class KKTCertificate:
    """Per-player optimality certificate at a candidate equilibrium.

    ``mu``/``nu`` are the nonnegative duals of the upper/lower action
    bounds recovered in closed form from the active set; the three
    residuals witness stationarity, complementary slackness, and strong
    duality of the equivalent projection problem.
    """

    mu: np.ndarray
    nu: np.ndarray
    stationarity_residual: float
    complementarity_residual: float
    duality_gap: float
    ok: bool


def best_response_cgt(
    others_sum: float, m: MarketParams, bounds: tuple[float, float]
) -> float:
    """Optimal action of one prosumer given the others' total, kWh."""
    target = -m.theta / (2.0 * m.alpha) - 0.5 * others_sum
    return min(max(target, bounds[0]), bounds[1])


def best_responses_cgt(
    x: np.ndarray, m: MarketParams, lo: np.ndarray, hi: np.ndarray
) -> np.ndarray:
    """All players' best responses to profile ``x`` at once."""
    others = np.sum(x) - x
    return np.clip(-m.theta / (2.0 * m.alpha) - 0.5 * others, lo, hi)


def project_onto_box(x: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Componentwise clamp of a profile onto the feasible cube."""
    lo, hi = scenario.bounds_arrays()
    return np.clip(np.asarray(x, dtype=float), lo, hi)


def _psi(x: np.ndarray, y: np.ndarray, m: MarketParams) -> float:
    # Factored evaluation of sum_n [alpha(x_n^2-y_n^2) + (theta+alpha*xbar_-n)(x_n-y_n)]:
    # the (x-y) factor keeps the residual accurate near the fixed point.
    others = np.sum(x) - x
    return float(np.sum((x - y) * (m.alpha * (x + y) + m.theta + m.alpha * others)))


def nikaido_isoda(scenario: Scenario, x: np.ndarray, y: np.ndarray) -> float:
    """Aggregate gain when each player deviates unilaterally from x to y, $."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"profile shapes differ: {x.shape} vs {y.shape}")
    return _psi(x, y, scenario.market)


def ni_residual(scenario: Scenario, x: np.ndarray) -> float:
    """Nikaido-Isoda distance of ``x`` from equilibrium: zero iff x is the NE."""
    x = np.asarray(x, dtype=float)
    lo, hi = scenario.bounds_arrays()
    return _psi(x, best_responses_cgt(x, scenario.market, lo, hi), scenario.market)


def _initial_profile(
    settings_profile: np.ndarray | None, lo: np.ndarray, hi: np.ndarray
) -> np.ndarray:
    if settings_profile is None:
        return 0.5 * (lo + hi)
    x0 = np.asarray(settings_profile, dtype=float)
    if x0.shape != lo.shape:
        raise ValueError(f"initial profile has shape {x0.shape}, expected {lo.shape}")
    return np.clip(x0, lo, hi)


def relaxation_solve(
    scenario: Scenario, settings: RelaxationSettings | None = None
) -> EquilibriumReport:
    """Run the relaxation learning iteration to the unique pure NE.

    Each step all players move simultaneously to the convex combination
    (1 - 1/sqrt(t)) * current + (1/sqrt(t)) * best response, starting at
    t = 1 so the first step adopts the best response outright. Stops when
    the Nikaido-Isoda residual drops to ``tol``; non-convergence within
    ``max_iters`` is reported, not raised.
    """
    s = settings or RelaxationSettings()
    m = scenario.market
    lo, hi = scenario.bounds_arrays()
    x = _initial_profile(s.initial_profile, lo, hi)

    residuals = []
    for t in range(1, s.max_iters + 1):
        xr = best_responses_cgt(x, m, lo, hi)
        psi = _psi(x, xr, m)
        residuals.append(psi)
        if psi <= s.tol:
            return EquilibriumReport(
                profile=x,
                iterations=t,
                residual_trace=_trace(residuals),
                converged=True,
            )
        gamma = 1.0 / math.sqrt(t)
        x = (1.0 - gamma) * x + gamma * xr

    return EquilibriumReport(
        profile=x,
        iterations=s.max_iters,
        residual_trace=_trace(residuals),
        converged=False,
    )


def _trace(residuals: list[float]) -> np.ndarray:
    out = np.empty((len(residuals), 2))
    out[:, 0] = np.arange(1, len(residuals) + 1)
    out[:, 1] = residuals
    return out


def sequential_solve(
    scenario: Scenario,
    step_tol: float = 1e-9,
    max_sweeps: int = 10_000,
    initial_profile: np.ndarray | None = None,
) -> EquilibriumReport:
    """Round-robin closed-form best responses (Gauss-Seidel on the game).

    Undamped counterpart of :func:`relaxation_solve`; one iteration is a
    full sweep over the players, stopping when the sup-norm change of a
    sweep falls to ``step_tol``. The trace records per-sweep changes.
    """
    m = scenario.market
    lo, hi = scenario.bounds_arrays()
    x = _initial_profile(initial_profile, lo, hi)
    target = -m.theta / (2.0 * m.alpha)

    changes = []
    total = float(np.sum(x))
    for sweep in range(1, max_sweeps + 1):
        sup_change = 0.0
        for n in range(scenario.n):
            others = total - float(x[n])
            new_x = min(max(target - 0.5 * others, lo[n]), hi[n])
            sup_change = max(sup_change, abs(new_x - float(x[n])))
            total = others + new_x
            x[n] = new_x
        changes.append(sup_change)
        if sup_change <= step_tol:
            return EquilibriumReport(
                profile=x, iterations=sweep, residual_trace=_trace(changes),
                converged=True, method="sequential",
                epsilon=cgt_deviation_epsilon(scenario, x),
            )
    return EquilibriumReport(
        profile=x, iterations=max_sweeps, residual_trace=_trace(changes),
        converged=False, method="sequential",
    )


def cgt_deviation_epsilon(scenario: Scenario, x: np.ndarray) -> float:
    """Largest unilateral expected-utility gain any player can realize.

    Exact (the best response is closed form); zero at the equilibrium.
    """
    x = np.asarray(x, dtype=float)
    m = scenario.market
    lo, hi = scenario.bounds_arrays()
    y = best_responses_cgt(x, m, lo, hi)
    others = np.sum(x) - x
    gains = (x - y) * (m.alpha * (x + y) + m.theta + m.alpha * others)
    return max(0.0, float(np.max(gains)))


def kkt_verify(scenario: Scenario, x_star: np.ndarray, tol: float = 1e-8) -> KKTCertificate:
    """Certify a candidate NE through the per-player KKT system.

    Duals are analytic: each player's problem is a one-dimensional
    concave quadratic, so the bound multiplier on an active side is just
    the clipped utility gradient there. The duality gap compares the dual
    value of the equivalent box-projection program against its primal
    optimum; all three residuals vanish exactly at the true equilibrium.
    """
    x = np.asarray(x_star, dtype=float)
    m = scenario.market
    lo, hi = scenario.bounds_arrays()

    others = np.sum(x) - x
    grad = -2.0 * m.alpha * x - m.theta - m.alpha * others

    margin = math.sqrt(tol) * max(1.0, float(np.max(hi - lo)))
    near_hi = (hi - x) <= margin
    near_lo = (x - lo) <= margin
    mu = np.where(near_hi, np.maximum(grad, 0.0), 0.0)
    nu = np.where(near_lo, np.maximum(-grad, 0.0), 0.0)

    stationarity = float(np.max(np.abs(grad + nu - mu)))
    complementarity = float(
        max(np.max(np.abs(mu * (x - hi))), np.max(np.abs(nu * (x - lo))))
    )

    # Strong duality of x* = argmin ||z - (a + A x*)||^2 over the box; the
    # projection-scale duals are the economic duals divided by alpha.
    v = -m.theta / (2.0 * m.alpha) - 0.5 * others
    primal = float(np.sum((x - v) ** 2))
    mu_p = mu / m.alpha
    nu_p = nu / m.alpha
    dual = float(
        -0.25 * np.sum((mu_p - nu_p) ** 2)
        + np.dot(mu_p - nu_p, v)
        - np.dot(mu_p, hi)
        + np.dot(nu_p, lo)
    )
    gap = abs(dual - primal)

    ok = stationarity <= tol and complementarity <= tol and gap <= tol
    return KKTCertificate(
        mu=mu,
        nu=nu,
        stationarity_residual=stationarity,
        complementarity_residual=complementarity,
        duality_gap=gap,
        ok=ok,
    )


def brute_force_ne(
    scenario: Scenario,
    grid_points_per_axis: int,
    utility=None,
) -> tuple[np.ndarray, float]:
    """Exhaustive grid oracle for tiny instances (at most 3 prosumers).

    Discretizes every action interval, scores each grid profile by the
    worst unilateral grid-deviation gain any player could realize, and
    returns the profile minimizing that worst gain together with the gain
    itself (the epsilon of the certified epsilon-NE).

    ``utility`` may replace the expected-utility payoff with any function
    ``(n, own_action_array, others_sum_array) -> array``, which is how the
    prospect-theoretic oracle reuses this machinery.
    """
    n_players = scenario.n
    if n_players > 3:
        raise ValueError(
            f"brute force supports at most 3 prosumers, got {n_players}"
        )
    if grid_points_per_axis < 11:
        raise ValueError(
            f"grid_points_per_axis must be >= 11, got {grid_points_per_axis}"
        )

    m = scenario.market
    if utility is None:
        def utility(n, own, others_sum):
            delta_n = scenario.prosumers[n].k * m.mid_price
            return -m.alpha * own**2 - (m.theta + m.alpha * others_sum) * own + delta_n

    lo, hi = scenario.bounds_arrays()
    axes = [np.linspace(lo[i], hi[i], grid_points_per_axis) for i in range(n_players)]
    mesh = np.meshgrid(*axes, indexing="ij")
    total = sum(mesh)

    worst_gain = None
    for i in range(n_players):
        u_i = utility(i, mesh[i], total - mesh[i])
        gain_i = u_i.max(axis=i, keepdims=True) - u_i
        worst_gain = gain_i if worst_gain is None else np.maximum(worst_gain, gain_i)

    flat = int(np.argmin(worst_gain))
    idx = np.unravel_index(flat, worst_gain.shape)
    profile = np.array([axes[i][idx[i]] for i in range(n_players)])
    return profile, float(worst_gain[idx])
