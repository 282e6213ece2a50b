"""Domain types and raw economic functions of the prosumer energy-trading game.

Everything here is a pure function of immutable parameter objects: the
linear pricing rule, the realized and expected prosumer utilities, the
power company's profit, and the per-prosumer feasible action interval.
Action profiles are plain float64 numpy arrays (one signed kWh entry per
prosumer; positive = buy, negative = sell).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ProspectParams",
    "ProsumerParams",
    "MarketParams",
    "Scenario",
    "feasible_bounds",
    "unit_price",
    "realized_utility",
    "cgt_expected_utility",
    "company_utility",
]


@dataclass(frozen=True)
class ProspectParams:
    """Behavioral constants of one prosumer's framing value function.

    Losses (payoffs below the reference point) are amplified by
    ``loss_aversion`` and curved by ``beta_minus``; gains are curved by
    ``beta_plus``.
    """

    loss_aversion: float = 2.25  # lambda >= 1
    beta_plus: float = 0.88     # gain exponent, in (0, 1]
    beta_minus: float = 0.88    # loss exponent, in (0, 1]
    reference: float = 1.0      # reference payoff in $

    def __post_init__(self):
        if not self.loss_aversion >= 1.0:
            raise ValueError(f"loss_aversion must be >= 1, got {self.loss_aversion}")
        if not 0.0 < self.beta_plus <= 1.0:
            raise ValueError(f"beta_plus must be in (0, 1], got {self.beta_plus}")
        if not 0.0 < self.beta_minus <= 1.0:
            raise ValueError(f"beta_minus must be in (0, 1], got {self.beta_minus}")

    @property
    def is_risk_neutral(self) -> bool:
        """True when the value function is the identity shifted by the reference."""
        return self.loss_aversion == 1.0 and self.beta_plus == 1.0 and self.beta_minus == 1.0


#: Prospect parameters that reduce the behavioral model to plain expected utility.
RATIONAL = ProspectParams(loss_aversion=1.0, beta_plus=1.0, beta_minus=1.0, reference=0.0)


@dataclass(frozen=True)
class ProsumerParams:
    """Physical and behavioral constants of one prosumer."""

    w: float                    # PV production, kWh
    q: float                    # initially stored energy, kWh
    l: float                    # load that must be met, kWh
    q_max: float = 25.0         # storage capacity, kWh
    prospect: ProspectParams = field(default_factory=ProspectParams)

    def __post_init__(self):
        for name in ("w", "q", "l"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not self.q_max > 0:
            raise ValueError(f"q_max must be > 0, got {self.q_max}")
        if not self.q <= self.q_max:
            raise ValueError(f"q must be <= q_max, got q={self.q}, q_max={self.q_max}")

    @property
    def k(self) -> float:
        """Net stored energy before trading: production + storage - load, kWh."""
        return self.w + self.q - self.l


@dataclass(frozen=True)
class MarketParams:
    """Leader-side market constants.

    The realized unit price is ``rho_base + alpha * sum(x)`` and is used
    unclamped in all utilities; the regulated interval [rho_min, rho_max]
    constrains only the leader's choice of rho_base and bounds the random
    future price. The leader's admissible interval defaults to
    [rho_min, rho_max] but may be widened (price-response sweeps go below
    rho_min).
    """

    alpha: float            # price slope, $/kWh per kWh, > 0
    rho_base: float         # base price, $/kWh
    rho_min: float = 0.0    # lower regulated price, $/kWh
    rho_max: float = 0.12   # upper regulated price, $/kWh
    rho_mar: float = 0.06   # market clearing price, $/kWh
    leader_lo: float | None = None
    leader_hi: float | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.rho_min < self.rho_max:
            raise ValueError(
                f"rho_min must be < rho_max, got [{self.rho_min}, {self.rho_max}]"
            )
        if self.leader_lo is None:
            object.__setattr__(self, "leader_lo", self.rho_min)
        if self.leader_hi is None:
            object.__setattr__(self, "leader_hi", self.rho_max)
        if not self.leader_lo <= self.leader_hi:
            raise ValueError(
                f"leader interval is empty: [{self.leader_lo}, {self.leader_hi}]"
            )

    @property
    def mid_price(self) -> float:
        """Mean of the uniform future price, $/kWh."""
        return 0.5 * (self.rho_max + self.rho_min)

    @property
    def theta(self) -> float:
        """Base price offset from the future mean price, $/kWh."""
        return self.rho_base - self.mid_price

    @property
    def rho_d(self) -> float:
        """Width of the future price interval, $/kWh."""
        return self.rho_max - self.rho_min

    def with_rho_base(self, rho_base: float) -> "MarketParams":
        """Copy with a different leader action (used by price sweeps)."""
        return replace(self, rho_base=rho_base)


@dataclass(frozen=True)
class Scenario:
    """One complete game instance: a set of prosumers facing one market."""

    prosumers: tuple[ProsumerParams, ...]
    market: MarketParams

    def __post_init__(self):
        object.__setattr__(self, "prosumers", tuple(self.prosumers))
        if len(self.prosumers) == 0:
            raise ValueError("scenario needs at least one prosumer")

    @property
    def n(self) -> int:
        return len(self.prosumers)

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(lower, upper) action bound vectors, kWh."""
        lo = np.array([feasible_bounds(p)[0] for p in self.prosumers])
        hi = np.array([feasible_bounds(p)[1] for p in self.prosumers])
        return lo, hi

    def k_array(self) -> np.ndarray:
        return np.array([p.k for p in self.prosumers])


def feasible_bounds(p: ProsumerParams) -> tuple[float, float]:
    """Action interval of one prosumer, kWh.

    The most it can sell is everything it has net of load (x_min, usually
    negative); the most it can buy is limited by filling its storage
    (x_max = x_min + q_max).
    """
    x_min = p.l - p.w - p.q
    return x_min, x_min + p.q_max


def unit_price(x: np.ndarray, m: MarketParams) -> float:
    """Realized unit energy price for an action profile, $/kWh.

    Linear in aggregate declared demand; intentionally not clamped to
    [rho_min, rho_max] (the utilities use the raw linear rule, regulation
    binds the leader's rho_base only).
    """
    return m.rho_base + m.alpha * float(np.sum(x))


def realized_utility(scenario: Scenario, n: int, x: np.ndarray, rho_f: float) -> float:
    """Prosumer n's payoff in $ once the future price rho_f is known.

    Trade revenue/cost at the realized current price plus the future
    monetary value of the energy left in storage.
    """
    c = scenario.prosumers[n].k + x[n]
    return -unit_price(x, scenario.market) * x[n] + c * rho_f


def cgt_expected_utility(scenario: Scenario, n: int, x: np.ndarray) -> float:
    """Prosumer n's expected payoff in $ under a uniform future price.

    Closed form of the expectation of :func:`realized_utility`; quadratic
    and strictly concave in the prosumer's own action.
    """
    m = scenario.market
    x_n = float(x[n])
    others = float(np.sum(x)) - x_n
    delta_n = scenario.prosumers[n].k * m.mid_price
    return -m.alpha * x_n**2 - (m.theta + m.alpha * others) * x_n + delta_n


def company_utility(x: np.ndarray, m: MarketParams) -> float:
    """Power company profit in $: resale margin on the aggregate trade."""
    total = float(np.sum(x))
    return (m.rho_base + m.alpha * total) * total - m.rho_mar * total
