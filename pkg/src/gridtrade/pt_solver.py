"""Follower equilibria under prospect-theoretic valuation.

The framed objective is smooth between the (at most four) actions where
the reference point crosses the payoff envelope, so the single-player
best response splits the interval at those breakpoints and refines each
piece with a coarse grid, golden-section search, and one safeguarded
parabolic polish. On top of that sit the two dynamics from the
expected-utility side: the damped relaxation iteration (valid whenever
the concavity classifier certifies every player) and the undamped
sequential round-robin used when no guarantee exists, whose fixed points
are certified post hoc by a per-player deviation-gain check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cgt import EquilibriumReport, RelaxationSettings, _initial_profile, _trace
from .market import MarketParams, ProsumerParams, Scenario
from .prospect import (
    UNCLASSIFIED,
    classify_concavity,
    pt_value,
    pt_value_on_grid,
)

__all__ = [
    "PtSearchSettings",
    "best_response_pt",
    "pt_nikaido_isoda",
    "pt_ni_residual",
    "relaxation_solve_pt",
    "sequential_best_response",
    "pt_deviation_epsilon",
]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PtSearchSettings:
    """Knobs of the piecewise one-dimensional maximizer and sequential sweep."""

    coarse_points: int = 512   # grid points budgeted across the whole interval
    refine_tol: float = 1e-9   # target accuracy of the returned action, kWh
    max_sweeps: int = 500      # sequential round-robin budget
    step_tol: float = 1e-7     # sup-norm profile change that counts as converged, kWh

    def __post_init__(self):
        if self.coarse_points < 64:
            raise ValueError(f"coarse_points must be >= 64, got {self.coarse_points}")
        if not (self.refine_tol > 0 and self.step_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be >= 1, got {self.max_sweeps}")


def _branch_breakpoints(prosumer: ProsumerParams, others_sum: float,
                        m: MarketParams, lo: float, hi: float) -> list[float]:
    # Real roots of the two quadratics where the reference point meets the
    # lowest/highest payoff realization; only these can switch the branch
    # of the framed objective inside (lo, hi).
    k = prosumer.k
    r_ref = prosumer.prospect.reference
    points = []
    for rho in (m.rho_min, m.rho_max):
        lin = rho - m.rho_base - m.alpha * others_sum
        disc = lin**2 + 4.0 * m.alpha * (k * rho - r_ref)
        if disc >= 0.0:
            s = math.sqrt(disc)
            points.append((lin - s) / (2.0 * m.alpha))
            points.append((lin + s) / (2.0 * m.alpha))
    inner = sorted(p for p in points if lo < p < hi)
    dedup = []
    for p in inner:
        if not dedup or p - dedup[-1] > 1e-12:
            dedup.append(p)
    return [lo, *dedup, hi]


def _golden_max(f, a: float, b: float, width: float) -> tuple[float, float]:
    # golden-section ascent; returns (argmax estimate, value there)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > width:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _parabolic_polish(f, x0: float, f0: float, a: float, b: float,
                      h: float) -> tuple[float, float]:
    # One safeguarded three-point parabola fit; exact for quadratic pieces,
    # which is what makes the risk-neutral reduction land on the closed-form
    # best response to well below the refinement tolerance.
    left = max(a, x0 - h)
    right = min(b, x0 + h)
    if right - left < 0.25 * h:
        return x0, f0
    mid = 0.5 * (left + right)
    fl, fm, fr = f(left), f(mid), f(right)
    denom = fl - 2.0 * fm + fr
    if denom >= 0.0:
        return x0, f0
    vertex = mid - 0.5 * (right - left) * 0.5 * (fr - fl) / denom
    if not (a <= vertex <= b):
        return x0, f0
    fv = f(vertex)
    return (vertex, fv) if fv > f0 else (x0, f0)


def best_response_pt(prosumer: ProsumerParams, others_sum: float, m: MarketParams,
                     bounds: tuple[float, float],
                     settings: PtSearchSettings | None = None) -> float:
    """Globally maximize one prosumer's framed objective over its interval.

    Ties across segments break toward the smaller action.
    """
    x, _ = _best_response_pt_valued(prosumer, others_sum, m, bounds, settings)
    return x


def _best_response_pt_valued(prosumer: ProsumerParams, others_sum: float,
                             m: MarketParams, bounds: tuple[float, float],
                             settings: PtSearchSettings | None
                             ) -> tuple[float, float]:
    s = settings or PtSearchSettings()
    lo, hi = bounds
    if not lo <= hi:
        raise ValueError(f"empty action interval [{lo}, {hi}]")
    k = prosumer.k
    p = prosumer.prospect

    def f(x):
        return pt_value(x, others_sum, k, m, p)

    if hi == lo:
        return lo, f(lo)

    edges = _branch_breakpoints(prosumer, others_sum, m, lo, hi)
    span = hi - lo
    best_x, best_v = lo, f(lo)

    for seg_a, seg_b in zip(edges[:-1], edges[1:]):
        width = seg_b - seg_a
        if width <= 0.0:
            continue
        npts = max(16, int(round(s.coarse_points * width / span)))
        xs = np.linspace(seg_a, seg_b, npts)
        vals = pt_value_on_grid(xs, others_sum, k, m, p)
        i = int(np.argmax(vals))

        cand_x, cand_v = float(xs[i]), float(vals[i])
        br_a = float(xs[max(i - 1, 0)])
        br_b = float(xs[min(i + 1, npts - 1)])
        if br_b - br_a > s.refine_tol:
            gx, gv = _golden_max(f, br_a, br_b, max(1e-4 * width, s.refine_tol, 1e-7))
            if gv > cand_v:
                cand_x, cand_v = gx, gv
            cand_x, cand_v = _parabolic_polish(
                f, cand_x, cand_v, seg_a, seg_b, max(1e-5, 10.0 * s.refine_tol)
            )
        for endpoint in (seg_a, seg_b):
            ev = f(endpoint)
            if ev > cand_v or (ev == cand_v and endpoint < cand_x):
                cand_x, cand_v = endpoint, ev

        if cand_v > best_v:
            best_x, best_v = cand_x, cand_v
    return best_x, best_v


def pt_nikaido_isoda(scenario: Scenario, x: np.ndarray, y: np.ndarray) -> float:
    """Deviation-gain sum of the framed game (the expected-utility form of
    the function, reused with framed utilities)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = scenario.market
    total = float(np.sum(x))
    out = 0.0
    for n, prosumer in enumerate(scenario.prosumers):
        others = total - float(x[n])
        out += pt_value(float(y[n]), others, prosumer.k, m, prosumer.prospect)
        out -= pt_value(float(x[n]), others, prosumer.k, m, prosumer.prospect)
    return out


def pt_ni_residual(scenario: Scenario, x: np.ndarray,
                   settings: PtSearchSettings | None = None) -> float:
    """Framed-game residual: deviation-gain sum at every player's best response."""
    x = np.asarray(x, dtype=float)
    m = scenario.market
    lo, hi = scenario.bounds_arrays()
    total = float(np.sum(x))
    out = 0.0
    for n, prosumer in enumerate(scenario.prosumers):
        others = total - float(x[n])
        _, v_best = _best_response_pt_valued(
            prosumer, others, m, (float(lo[n]), float(hi[n])), settings
        )
        out += v_best - pt_value(float(x[n]), others, prosumer.k, m, prosumer.prospect)
    return out


def relaxation_solve_pt(scenario: Scenario,
                        settings: RelaxationSettings | None = None,
                        search: PtSearchSettings | None = None
                        ) -> EquilibriumReport:
    """Relaxation iteration with the framed best response.

    Intended for scenarios the concavity classifier can certify; whether
    every player at every visited profile fell into a certified case is
    checked opportunistically and recorded. Stops when the framed
    deviation-gain residual drops to ``tol``.
    """
    s = settings or RelaxationSettings(max_iters=50_000)
    search = search or PtSearchSettings()
    m = scenario.market
    lo, hi = scenario.bounds_arrays()
    x = _initial_profile(s.initial_profile, lo, hi)
    n_players = scenario.n

    certified = True
    residuals = []
    for t in range(1, s.max_iters + 1):
        total = float(np.sum(x))
        xr = np.empty(n_players)
        psi = 0.0
        for n, prosumer in enumerate(scenario.prosumers):
            others = total - float(x[n])
            if certified:
                report = classify_concavity(
                    prosumer, others, m, (float(lo[n]), float(hi[n]))
                )
                certified = report.case_id != UNCLASSIFIED
            xr[n], v_best = _best_response_pt_valued(
                prosumer, others, m, (float(lo[n]), float(hi[n])), search
            )
            psi += v_best - pt_value(float(x[n]), others, prosumer.k, m,
                                     prosumer.prospect)
        residuals.append(psi)
        if psi <= s.tol:
            return EquilibriumReport(
                profile=x, iterations=t, residual_trace=_trace(residuals),
                converged=True, method="pt_relaxation",
                concavity_certified=certified,
            )
        gamma = 1.0 / math.sqrt(t)
        x = (1.0 - gamma) * x + gamma * xr

    return EquilibriumReport(
        profile=x, iterations=s.max_iters, residual_trace=_trace(residuals),
        converged=False, method="pt_relaxation", concavity_certified=certified,
    )


def sequential_best_response(scenario: Scenario,
                             settings: PtSearchSettings | None = None,
                             initial_profile: np.ndarray | None = None,
                             certify_grid: int = 10_000) -> EquilibriumReport:
    """Round-robin framed best responses in fixed ascending player order.

    One iteration is one full sweep; the run stops when the sup-norm
    profile change over a sweep falls to ``step_tol``. There is no
    convergence guarantee without concavity, so converged profiles are
    certified post hoc by the deviation-gain check and the certified
    epsilon is recorded on the report.
    """
    s = settings or PtSearchSettings()
    m = scenario.market
    lo, hi = scenario.bounds_arrays()
    x = _initial_profile(initial_profile, lo, hi)

    changes = []
    converged = False
    sweeps = 0
    total = float(np.sum(x))
    for sweeps in range(1, s.max_sweeps + 1):
        sup_change = 0.0
        for n, prosumer in enumerate(scenario.prosumers):
            others = total - float(x[n])
            new_x, _ = _best_response_pt_valued(
                prosumer, others, m, (float(lo[n]), float(hi[n])), s
            )
            sup_change = max(sup_change, abs(new_x - float(x[n])))
            total = others + new_x
            x[n] = new_x
        changes.append(sup_change)
        if sup_change <= s.step_tol:
            converged = True
            break

    epsilon = (
        pt_deviation_epsilon(scenario, x, grid_points=certify_grid, settings=s)
        if converged
        else None
    )
    return EquilibriumReport(
        profile=x, iterations=sweeps, residual_trace=_trace(changes),
        converged=converged, method="sequential", epsilon=epsilon,
    )


def pt_deviation_epsilon(scenario: Scenario, x: np.ndarray,
                         grid_points: int = 10_000,
                         settings: PtSearchSettings | None = None) -> float:
    """Largest unilateral framed-utility gain any player can find.

    Candidates are a dense grid over each player's interval plus its
    refined best response, so the bound is honest up to grid resolution.
    """
    x = np.asarray(x, dtype=float)
    m = scenario.market
    lo, hi = scenario.bounds_arrays()
    total = float(np.sum(x))
    eps = 0.0
    for n, prosumer in enumerate(scenario.prosumers):
        others = total - float(x[n])
        current = pt_value(float(x[n]), others, prosumer.k, m, prosumer.prospect)
        xs = np.linspace(lo[n], hi[n], grid_points)
        grid_best = float(
            np.max(pt_value_on_grid(xs, others, prosumer.k, m, prosumer.prospect))
        )
        _, br_best = _best_response_pt_valued(
            prosumer, others, m, (float(lo[n]), float(hi[n])), settings
        )
        eps = max(eps, max(grid_best, br_best) - current)
    return eps
