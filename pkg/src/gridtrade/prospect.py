"""Prospect-theoretic valuation of the uncertain trading payoff.

A prosumer's realized payoff is affine in the random future price, so
the expected framed value has a closed form with three branches: all
realizations above the reference point (pure gain), all below (pure
loss), or straddling it. The outer branches are evaluated through
expm1/log1p so they stay accurate when the stored energy ``c`` is tiny
and the two power terms nearly cancel; the Monte Carlo estimator is kept
as an independent oracle.

The concavity classifier evaluates the published sufficient conditions
(discriminants, quadratic roots, and the case-3 slope threshold) for the
loss-averse game with unit gain/loss exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .market import MarketParams, ProspectParams, ProsumerParams, Scenario, feasible_bounds, unit_price

__all__ = [
    "PtUtilityTerms",
    "ConcavityCaseReport",
    "CASE1",
    "CASE2",
    "CASE3",
    "UNCLASSIFIED",
    "framing_value",
    "pt_terms",
    "pt_value",
    "pt_value_on_grid",
    "pt_expected_utility",
    "pt_expected_utility_mc",
    "classify_concavity",
]

CASE1 = "case1"
CASE2 = "case2"
CASE3 = "case3"
UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class PtUtilityTerms:
    """Building blocks of the framed payoff at one action.

    The payoff realization is ``c * rho_f + d``: ``c`` is the energy held
    after trading (never negative for feasible actions) and ``d`` the
    deterministic trade revenue.
    """

    c: float      # future stored energy, kWh
    d: float      # trade revenue at the realized current price, $
    rho_d: float  # width of the future price interval, $/kWh

    def __post_init__(self):
        if self.c < 0:
            raise ValueError(f"c must be >= 0, got {self.c}")
        if not self.rho_d > 0:
            raise ValueError(f"rho_d must be > 0, got {self.rho_d}")


@dataclass(frozen=True)
class ConcavityCaseReport:
    """Outcome of the sufficient-condition concavity tests for one player.

    Roots are present only when the matching discriminant is nonnegative
    and are ordered (x_r1 <= x_r2, x_r3 <= x_r4). ``case3_threshold`` is
    the 1 - b/a1 bound, undefined when loss aversion is 1 (then a1 = 0
    and the game is the expected-utility game shifted by the reference,
    concave regardless).
    """

    case_id: str
    delta1: float
    delta2: float
    x_r1: float | None
    x_r2: float | None
    x_r3: float | None
    x_r4: float | None
    m1: float
    a1: float
    b: float
    case3_threshold: float | None
    note: str = ""


def framing_value(u, p: ProspectParams):
    """Framed value of a payoff relative to the reference point.

    Concave power curve above the reference, convex and loss-amplified
    below it, zero at the reference itself. Accepts scalars or arrays.
    """
    u = np.asarray(u, dtype=float)
    gains = np.maximum(u - p.reference, 0.0)
    losses = np.maximum(p.reference - u, 0.0)
    out = gains**p.beta_plus - p.loss_aversion * losses**p.beta_minus
    return float(out) if out.ndim == 0 else out


def pt_terms(x_n: float, others_sum: float, k: float, m: MarketParams) -> PtUtilityTerms:
    """Terms (c, d, rho_d) of the framed payoff at one action."""
    price = m.rho_base + m.alpha * (x_n + others_sum)
    return PtUtilityTerms(c=max(k + x_n, 0.0), d=-price * x_n, rho_d=m.rho_d)


def _one_sided_mean(base: float, width: float, exponent: float) -> float:
    # mean of u^(exponent-1) over u in [base, base+width], times width, i.e.
    # ((base+width)^exponent - base^exponent) / exponent, evaluated stably.
    if base == 0.0:
        return width**exponent / exponent
    return base**exponent * math.expm1(exponent * math.log1p(width / base)) / exponent


def _pt_value_terms(c: float, d: float, rho_min: float, rho_max: float,
                    p: ProspectParams) -> float:
    rho_d = rho_max - rho_min
    if c <= 0.0:
        u = d - p.reference
        if u > 0.0:
            return u**p.beta_plus
        if u < 0.0:
            return -p.loss_aversion * (-u) ** p.beta_minus
        return 0.0

    lo_u = c * rho_min + d
    hi_u = c * rho_max + d
    span = c * rho_d
    if p.reference <= lo_u:
        return _one_sided_mean(lo_u - p.reference, span, p.beta_plus + 1.0) / (c * rho_d)
    if p.reference >= hi_u:
        return -p.loss_aversion * _one_sided_mean(
            p.reference - hi_u, span, p.beta_minus + 1.0
        ) / (c * rho_d)
    gain = max(hi_u - p.reference, 0.0)
    loss = max(p.reference - lo_u, 0.0)
    return (
        gain ** (p.beta_plus + 1.0) / ((p.beta_plus + 1.0) * c * rho_d)
        - p.loss_aversion * loss ** (p.beta_minus + 1.0) / ((p.beta_minus + 1.0) * c * rho_d)
    )


def pt_value(x_n: float, others_sum: float, k: float, m: MarketParams,
             p: ProspectParams) -> float:
    """Expected framed payoff of one prosumer at action ``x_n``, scalar path."""
    price = m.rho_base + m.alpha * (x_n + others_sum)
    return _pt_value_terms(max(k + x_n, 0.0), -price * x_n, m.rho_min, m.rho_max, p)


def pt_value_on_grid(xs: np.ndarray, others_sum: float, k: float, m: MarketParams,
                     p: ProspectParams) -> np.ndarray:
    """Vectorized :func:`pt_value` over an array of own actions."""
    xs = np.asarray(xs, dtype=float)
    price = m.rho_base + m.alpha * (xs + others_sum)
    c = np.maximum(k + xs, 0.0)
    d = -price * xs
    rho_d = m.rho_d

    lo_u = c * m.rho_min + d
    hi_u = c * m.rho_max + d
    r = p.reference
    gp1 = p.beta_plus + 1.0
    lp1 = p.beta_minus + 1.0

    out = np.empty_like(xs)

    degenerate = c <= 0.0
    all_gain = ~degenerate & (r <= lo_u)
    all_loss = ~degenerate & (r >= hi_u)
    mixed = ~(degenerate | all_gain | all_loss)

    if np.any(degenerate):
        u = d[degenerate] - r
        out[degenerate] = (
            np.maximum(u, 0.0) ** p.beta_plus
            - p.loss_aversion * np.maximum(-u, 0.0) ** p.beta_minus
        )

    def one_sided(base, span, exponent):
        safe = np.where(base > 0.0, base, 1.0)
        stable = safe**exponent * np.expm1(exponent * np.log1p(span / safe)) / exponent
        return np.where(base > 0.0, stable, span**exponent / exponent)

    if np.any(all_gain):
        cg = c[all_gain]
        out[all_gain] = one_sided(lo_u[all_gain] - r, cg * rho_d, gp1) / (cg * rho_d)
    if np.any(all_loss):
        cl = c[all_loss]
        out[all_loss] = -p.loss_aversion * one_sided(
            r - hi_u[all_loss], cl * rho_d, lp1
        ) / (cl * rho_d)
    if np.any(mixed):
        cm = c[mixed]
        gain = np.maximum(hi_u[mixed] - r, 0.0)
        loss = np.maximum(r - lo_u[mixed], 0.0)
        out[mixed] = gain**gp1 / (gp1 * cm * rho_d) - p.loss_aversion * loss**lp1 / (
            lp1 * cm * rho_d
        )
    return out


def pt_expected_utility(scenario: Scenario, n: int, x: np.ndarray,
                        prospect: ProspectParams | None = None) -> float:
    """Expected framed payoff of prosumer ``n`` at profile ``x``.

    Matches the expectation of ``framing_value(realized payoff)`` over
    the uniform future price exactly; the degenerate zero-storage action
    is valued deterministically. ``prospect`` overrides the prosumer's
    own behavioral constants when given.
    """
    m = scenario.market
    p = prospect if prospect is not None else scenario.prosumers[n].prospect
    x_n = float(x[n])
    c = max(scenario.prosumers[n].k + x_n, 0.0)
    d = -unit_price(x, m) * x_n
    return _pt_value_terms(c, d, m.rho_min, m.rho_max, p)


def pt_expected_utility_mc(scenario: Scenario, n: int, x: np.ndarray,
                           samples: int = 1_000_000, seed: int = 0,
                           prospect: ProspectParams | None = None
                           ) -> tuple[float, float]:
    """Monte Carlo oracle for :func:`pt_expected_utility`.

    Averages the framed realized payoff over i.i.d. uniform future-price
    draws; returns (mean, standard error). Deterministic for a given seed.
    """
    if samples < 10_000:
        raise ValueError(f"samples must be >= 10000, got {samples}")
    m = scenario.market
    p = prospect if prospect is not None else scenario.prosumers[n].prospect
    x_n = float(x[n])
    c = max(scenario.prosumers[n].k + x_n, 0.0)
    d = -unit_price(x, m) * x_n

    rng = np.random.default_rng(seed)
    rho_f = rng.uniform(m.rho_min, m.rho_max, samples)
    values = framing_value(c * rho_f + d, p)
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(samples))
    return mean, se


def classify_concavity(prosumer: ProsumerParams, others_sum: float, m: MarketParams,
                       bounds: tuple[float, float] | None = None
                       ) -> ConcavityCaseReport:
    """Test the sufficient concavity conditions for one player's framed game.

    Only defined for unit gain/loss exponents; anything else abstains.
    Checks, in order: the whole action interval valued as gains (case 1),
    as losses (case 2), or straddling the reference with the extra slope
    bound ``x_max < 1 - b/a1`` (case 3, vacuous when loss aversion is 1).
    Note the two branch quadratics coincide at the zero-storage action, so
    case 3 cannot trigger on a full feasible interval; it needs a
    restricted ``bounds`` box.
    """
    p = prosumer.prospect
    k = prosumer.k
    if bounds is None:
        bounds = feasible_bounds(prosumer)
    x_lo, x_hi = bounds

    if p.beta_plus != 1.0 or p.beta_minus != 1.0:
        return ConcavityCaseReport(
            case_id=UNCLASSIFIED,
            delta1=math.nan, delta2=math.nan,
            x_r1=None, x_r2=None, x_r3=None, x_r4=None,
            m1=64.0 * k, a1=48.0 * m.alpha**2 * (1.0 - p.loss_aversion),
            b=math.nan, case3_threshold=None,
            note="classification requires beta_plus = beta_minus = 1",
        )

    lam = p.loss_aversion
    r_ref = p.reference
    b1 = m.rho_min - m.rho_base - m.alpha * others_sum
    b2 = m.rho_max - m.rho_base - m.alpha * others_sum
    delta1 = b1**2 + 4.0 * m.alpha * (k * m.rho_min - r_ref)
    delta2 = b2**2 + 4.0 * m.alpha * (k * m.rho_max - r_ref)

    def roots(disc, lin):
        if disc < 0.0:
            return None, None
        s = math.sqrt(disc)
        return (lin - s) / (2.0 * m.alpha), (lin + s) / (2.0 * m.alpha)

    x_r1, x_r2 = roots(delta1, b1)
    x_r3, x_r4 = roots(delta2, b2)

    m1 = 64.0 * k
    a1 = 48.0 * m.alpha**2 * (1.0 - lam)
    b_const = (176.0 * m.alpha**2 * k
               + 32.0 * m.alpha * (m.rho_base - m.rho_max + m.alpha * others_sum)
               ) * (1.0 - lam)
    threshold = None if a1 == 0.0 else 1.0 - b_const / a1
    note = ""
    if lam == 1.0:
        note = ("loss_aversion 1: framed objective is the expected-utility "
                "objective shifted by the reference, concave for any case")

    case1 = delta1 > 0.0 and x_r1 < x_lo and x_hi < x_r2
    case2 = delta2 < 0.0 or (x_r3 is not None and (x_hi < x_r3 or x_r4 < x_lo))
    case3_band = delta2 > 0.0 and x_r3 is not None and x_r3 < x_lo and x_hi < x_r4
    case3_outside = delta1 < 0.0 or (
        x_r1 is not None and (x_hi < x_r1 or x_r2 < x_lo)
    )
    case3_slope = True if threshold is None else x_hi < threshold
    case3 = case3_band and case3_outside and case3_slope

    if case1:
        case_id = CASE1
    elif case2:
        case_id = CASE2
    elif case3:
        case_id = CASE3
    else:
        case_id = UNCLASSIFIED

    return ConcavityCaseReport(
        case_id=case_id,
        delta1=delta1, delta2=delta2,
        x_r1=x_r1, x_r2=x_r2, x_r3=x_r3, x_r4=x_r4,
        m1=m1, a1=a1, b=b_const, case3_threshold=threshold,
        note=note,
    )
