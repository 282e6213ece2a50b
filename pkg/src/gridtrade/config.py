"""Scenario ingestion: config files, defaults, and seeded generation.

Config files are flat INI text with a ``[market]`` section plus exactly
one of ``[prosumers]`` (explicit per-prosumer arrays) or ``[generator]``
(population drawn from uniform ranges). Generation uses numpy's
``default_rng`` (PCG64) with a 64-bit seed and a fixed draw order
(loads, then production, then initial storage), so a (config, seed) pair
always expands to the same scenario. With no file at all you get the
default nine-prosumer grid: loads uniform on [10, 30] kWh, capacity
25 kWh, alpha = 1/N, loss aversion 2.25, gain/loss exponents 0.88, base
price $0.04/kWh, reference point $1.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .market import MarketParams, ProspectParams, ProsumerParams, Scenario

__all__ = [
    "ConfigError",
    "GeneratorConfig",
    "ScenarioConfig",
    "DEFAULT_SEED",
    "default_config",
    "parse_config",
    "load_scenario",
    "build_scenario",
    "generate_prosumers",
]

DEFAULT_SEED = 12

_MARKET_KEYS = {"alpha", "rho_min", "rho_max", "rho_base", "rho_mar",
                "leader_lo", "leader_hi"}
_PROSUMER_KEYS = {"w", "q", "l", "q_max", "lambda", "beta_plus", "beta_minus", "r"}
_GENERATOR_KEYS = {"n", "seed", "l_range", "w_range", "q_range", "q_max",
                   "lambda", "beta_plus", "beta_minus", "r"}


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


@dataclass(frozen=True)
class GeneratorConfig:
    """Population block: draw n prosumers from uniform parameter ranges."""

    n: int = 9
    seed: int | None = None          # falls back to the run seed
    l_range: tuple[float, float] = (10.0, 30.0)
    w_range: tuple[float, float] = (10.0, 30.0)
    q_range: tuple[float, float] = (0.0, 10.0)
    q_max: float = 25.0
    loss_aversion: float = 2.25
    beta_plus: float = 0.88
    beta_minus: float = 0.88
    reference: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"generator key 'n' must be >= 1, got {self.n}")
        for key in ("l_range", "w_range", "q_range"):
            lo, hi = getattr(self, key)
            if not lo <= hi:
                raise ConfigError(f"generator key '{key}' has lo > hi: ({lo}, {hi})")


@dataclass(frozen=True)
class ScenarioConfig:
    """Parsed configuration: market values plus one prosumer source."""

    market: dict = field(default_factory=dict)      # raw [market] values
    prosumers: dict | None = None                   # explicit arrays, or None
    generator: GeneratorConfig | None = None

    def __post_init__(self):
        if (self.prosumers is None) == (self.generator is None):
            raise ConfigError(
                "config needs exactly one of a [prosumers] or a [generator] section"
            )
        if self.prosumers is not None:
            lengths = {key: len(vals) for key, vals in self.prosumers.items()}
            if len(set(lengths.values())) > 1:
                detail = ", ".join(f"{k}={v}" for k, v in sorted(lengths.items()))
                raise ConfigError(f"[prosumers] arrays disagree in length: {detail}")
            if "l" not in self.prosumers:
                raise ConfigError("[prosumers] requires the 'l' array")


def default_config() -> ScenarioConfig:
    """The baseline nine-prosumer grid used when no file is given."""
    return ScenarioConfig(market={}, generator=GeneratorConfig())


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] key '{key}' is not a number: {raw!r}") from None


def _parse_list(section: str, key: str, raw: str) -> list[float]:
    parts = [p for chunk in raw.split(",") for p in chunk.split()]
    if not parts:
        raise ConfigError(f"[{section}] key '{key}' is empty")
    return [_parse_float(section, key, p) for p in parts]


def _parse_range(section: str, key: str, raw: str) -> tuple[float, float]:
    vals = _parse_list(section, key, raw)
    if len(vals) != 2:
        raise ConfigError(f"[{section}] key '{key}' needs two values, got {len(vals)}")
    return vals[0], vals[1]


def parse_config(path: str | Path) -> ScenarioConfig:
    """Parse a scenario config file; all diagnostics name the offending key."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None

    known = {"market", "prosumers", "generator"}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")

    market: dict = {}
    if parser.has_section("market"):
        for key, raw in parser.items("market"):
            if key not in _MARKET_KEYS:
                raise ConfigError(f"unknown [market] key '{key}'")
            if key == "alpha" and raw.strip().replace(" ", "").lower() == "1/n":
                market[key] = "1/N"
            else:
                market[key] = _parse_float("market", key, raw)

    prosumers = None
    if parser.has_section("prosumers"):
        prosumers = {}
        for key, raw in parser.items("prosumers"):
            if key not in _PROSUMER_KEYS:
                raise ConfigError(f"unknown [prosumers] key '{key}'")
            prosumers[key] = _parse_list("prosumers", key, raw)

    generator = None
    if parser.has_section("generator"):
        kwargs: dict = {}
        for key, raw in parser.items("generator"):
            if key not in _GENERATOR_KEYS:
                raise ConfigError(f"unknown [generator] key '{key}'")
            if key == "n":
                kwargs["n"] = int(_parse_float("generator", key, raw))
            elif key == "seed":
                kwargs["seed"] = int(_parse_float("generator", key, raw))
            elif key.endswith("_range"):
                kwargs[key] = _parse_range("generator", key, raw)
            elif key == "lambda":
                kwargs["loss_aversion"] = _parse_float("generator", key, raw)
            elif key == "r":
                kwargs["reference"] = _parse_float("generator", key, raw)
            else:
                kwargs[key] = _parse_float("generator", key, raw)
        generator = GeneratorConfig(**kwargs)

    return ScenarioConfig(market=market, prosumers=prosumers, generator=generator)


def generate_prosumers(gen: GeneratorConfig,
                       seed: int | Sequence[int]) -> tuple[ProsumerParams, ...]:
    """Expand a generator block deterministically from a seed."""
    rng = np.random.default_rng(gen.seed if gen.seed is not None else seed)
    loads = rng.uniform(*gen.l_range, gen.n)
    production = rng.uniform(*gen.w_range, gen.n)
    stored = rng.uniform(*gen.q_range, gen.n)
    prospect = ProspectParams(
        loss_aversion=gen.loss_aversion,
        beta_plus=gen.beta_plus,
        beta_minus=gen.beta_minus,
        reference=gen.reference,
    )
    try:
        return tuple(
            ProsumerParams(w=float(w), q=float(q), l=float(l), q_max=gen.q_max,
                           prospect=prospect)
            for w, q, l in zip(production, stored, loads)
        )
    except ValueError as exc:
        raise ConfigError(f"[generator] produced invalid prosumers: {exc}") from None


def _explicit_prosumers(arrays: dict) -> tuple[ProsumerParams, ...]:
    n = len(arrays["l"])
    def column(key, default):
        return arrays.get(key, [default] * n)

    out = []
    for i in range(n):
        try:
            prospect = ProspectParams(
                loss_aversion=column("lambda", 2.25)[i],
                beta_plus=column("beta_plus", 0.88)[i],
                beta_minus=column("beta_minus", 0.88)[i],
                reference=column("r", 1.0)[i],
            )
            out.append(ProsumerParams(
                w=column("w", 0.0)[i],
                q=column("q", 0.0)[i],
                l=arrays["l"][i],
                q_max=column("q_max", 25.0)[i],
                prospect=prospect,
            ))
        except ValueError as exc:
            raise ConfigError(f"[prosumers] entry {i}: {exc}") from None
    return tuple(out)


def _resolve_market(raw: dict, n: int) -> MarketParams:
    alpha = raw.get("alpha", "1/N")
    if alpha == "1/N":
        alpha = 1.0 / n
    try:
        return MarketParams(
            alpha=alpha,
            rho_base=raw.get("rho_base", 0.04),
            rho_min=raw.get("rho_min", 0.0),
            rho_max=raw.get("rho_max", 0.12),
            rho_mar=raw.get("rho_mar", 0.06),
            leader_lo=raw.get("leader_lo"),
            leader_hi=raw.get("leader_hi"),
        )
    except ValueError as exc:
        raise ConfigError(f"[market]: {exc}") from None


def build_scenario(cfg: ScenarioConfig, seed: int | Sequence[int]) -> Scenario:
    """Turn a parsed config into a concrete scenario."""
    if cfg.prosumers is not None:
        prosumers = _explicit_prosumers(cfg.prosumers)
    else:
        prosumers = generate_prosumers(cfg.generator, seed)
    market = _resolve_market(cfg.market, len(prosumers))
    return Scenario(prosumers=prosumers, market=market)


def load_scenario(path: str | Path | None, seed: int = DEFAULT_SEED) -> Scenario:
    """Load a scenario file, or the default grid when ``path`` is None."""
    cfg = default_config() if path is None else parse_config(path)
    return build_scenario(cfg, seed)


def with_reference(scenario: Scenario, reference: float,
                   loss_aversion: float | None = None) -> Scenario:
    """Copy of a scenario with every prosumer's reference point replaced
    (and optionally its loss aversion); physical parameters untouched."""
    prosumers = []
    for p in scenario.prosumers:
        prospect = replace(p.prospect, reference=reference)
        if loss_aversion is not None:
            prospect = replace(prospect, loss_aversion=loss_aversion)
        prosumers.append(replace(p, prospect=prospect))
    return replace(scenario, prosumers=tuple(prosumers))
