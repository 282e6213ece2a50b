"""The six experiment sweeps behind the report figures.

Every sweep resolves to a list of CSV rows with a fixed header, written
in grid order regardless of how the points were scheduled, so a
(config, seed, flags) triple always produces byte-identical output.
Solver failures flag their row with ``nan`` cells (or ``false`` in the
convergence sweep) and are counted; the CLI turns a nonzero count into
exit code 2.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cgt import RelaxationSettings, relaxation_solve
from .config import (
    DEFAULT_SEED,
    ConfigError,
    ScenarioConfig,
    build_scenario,
    default_config,
    with_reference,
)
from .market import RATIONAL, Scenario, company_utility
from .pt_solver import PtSearchSettings, sequential_best_response
from .stackelberg import epsilon_se_grid

__all__ = ["SweepSpec", "SweepResult", "run_sweep", "write_csv", "SWEEP_KINDS"]

SWEEP_KINDS = ("reference", "lambda", "profit_gap", "population",
               "price_response", "convergence")

_HEADERS = {
    "reference": ("r", "total_load_cgt_kwh", "total_load_pt_kwh"),
    "lambda": ("lambda", "r", "total_load_kwh"),
    "profit_gap": ("r", "profit_pt_aware_usd", "profit_cgt_assuming_usd"),
    "population": ("n", "total_load_cgt_kwh", "total_load_pt_kwh"),
    "price_response": ("rho_base_usd_per_kwh", "group", "group_load_kwh"),
    "convergence": ("n", "iterations", "converged"),
}

_CGT_SETTINGS = RelaxationSettings(tol=1e-12, max_iters=200_000)

#: Reference points of the three price-response groups (None = rational).
PRICE_RESPONSE_GROUPS = (("rational", None), ("r1", 1.0), ("r3", 3.0))


def _dyadic_range(lo: float, hi: float, step: float) -> tuple[float, ...]:
    count = int(round((hi - lo) / step))
    return tuple(lo + k * step for k in range(count + 1))


def _cents(lo_cents: int, hi_cents: int) -> tuple[float, ...]:
    return tuple(c / 100.0 for c in range(lo_cents, hi_cents + 1))


@dataclass(frozen=True)
class SweepSpec:
    """One experiment sweep: kind, grids, scenario source, output path."""

    kind: str
    out: Path
    seed: int = DEFAULT_SEED
    config: ScenarioConfig | None = None   # None -> default grid
    r_values: tuple[float, ...] = _dyadic_range(-4.0, 8.0, 0.25)
    lambda_values: tuple[float, ...] = (2.0, 4.0, 6.0)
    n_values: tuple[int, ...] = (10, 20, 30, 40, 50, 60, 70)
    rho_values: tuple[float, ...] = _cents(-10, 10)
    profit_r_values: tuple[float, ...] = _dyadic_range(-4.0, 8.0, 1.0)
    epsilon: float = 2e-3                  # leader grid step (profit_gap)
    search: PtSearchSettings = field(default_factory=PtSearchSettings)
    jobs: int = 1

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ConfigError(f"unknown sweep kind {self.kind!r}")
        for name in ("r_values", "lambda_values", "n_values", "rho_values",
                     "profit_r_values"):
            vals = getattr(self, name)
            if len(vals) == 0:
                raise ConfigError(f"sweep grid {name} is empty")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ConfigError(f"sweep grid {name} must be strictly increasing")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")


@dataclass(frozen=True)
class SweepResult:
    kind: str
    header: tuple[str, ...]
    rows: list[tuple]
    failures: int


def _base_scenario(spec: SweepSpec) -> Scenario:
    return build_scenario(spec.config or default_config(), spec.seed)


def _scenario_for_n(spec: SweepSpec, n: int) -> Scenario:
    """Population-style scenario: regenerate n prosumers from a child seed."""
    cfg = spec.config or default_config()
    if cfg.generator is None:
        raise ConfigError(
            f"the {spec.kind} sweep varies the population and needs a "
            "[generator] config block, not explicit [prosumers] arrays"
        )
    root = cfg.generator.seed if cfg.generator.seed is not None else spec.seed
    gen = replace(cfg.generator, n=n, seed=None)
    return build_scenario(replace(cfg, generator=gen), [root, n])


def _pmap(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _pt_total_load(args) -> float:
    scenario, search = args
    report = sequential_best_response(scenario, search)
    return float(np.sum(report.profile)) if report.converged else float("nan")


def _sweep_reference(spec: SweepSpec) -> SweepResult:
    base = _base_scenario(spec)
    cgt_load = float(np.sum(relaxation_solve(base, _CGT_SETTINGS).profile))
    tasks = [(with_reference(base, r), spec.search) for r in spec.r_values]
    pt_loads = _pmap(_pt_total_load, tasks, spec.jobs)
    rows = [(r, cgt_load, load) for r, load in zip(spec.r_values, pt_loads)]
    failures = sum(1 for v in pt_loads if np.isnan(v))
    return SweepResult("reference", _HEADERS["reference"], rows, failures)


def _sweep_lambda(spec: SweepSpec) -> SweepResult:
    base = _base_scenario(spec)
    tasks = [
        (with_reference(base, r, loss_aversion=lam), spec.search)
        for lam in spec.lambda_values
        for r in spec.r_values
    ]
    loads = _pmap(_pt_total_load, tasks, spec.jobs)
    keys = [(lam, r) for lam in spec.lambda_values for r in spec.r_values]
    rows = [(lam, r, load) for (lam, r), load in zip(keys, loads)]
    failures = sum(1 for v in loads if np.isnan(v))
    return SweepResult("lambda", _HEADERS["lambda"], rows, failures)


def _profit_gap_point(args) -> tuple[float, float, float, int]:
    scenario, epsilon, search = args
    failures = 0
    try:
        aware = epsilon_se_grid(scenario, epsilon, follower_model="pt",
                                search_settings=search)
        profit_aware = aware.leader_profit
    except RuntimeError:
        profit_aware, failures = float("nan"), failures + 1

    try:
        assuming = epsilon_se_grid(scenario, epsilon, follower_model="cgt")
        priced = replace(
            scenario, market=scenario.market.with_rho_base(assuming.rho_star)
        )
        actual = sequential_best_response(priced, search)
        if actual.converged:
            profit_assuming = company_utility(actual.profile, priced.market)
        else:
            profit_assuming, failures = float("nan"), failures + 1
    except RuntimeError:
        profit_assuming, failures = float("nan"), failures + 1
    return profit_aware, profit_assuming, failures


def _sweep_profit_gap(spec: SweepSpec) -> SweepResult:
    base = _base_scenario(spec)
    tasks = [(with_reference(base, r), spec.epsilon, spec.search)
             for r in spec.profit_r_values]
    outcomes = _pmap(_profit_gap_point, tasks, spec.jobs)
    rows = [
        (r, aware, assuming)
        for r, (aware, assuming, _) in zip(spec.profit_r_values, outcomes)
    ]
    failures = sum(f for _, _, f in outcomes)
    return SweepResult("profit_gap", _HEADERS["profit_gap"], rows, failures)


def _population_point(args) -> tuple[float, float]:
    scenario, search = args
    cgt_load = float(np.sum(relaxation_solve(scenario, _CGT_SETTINGS).profile))
    return cgt_load, _pt_total_load((scenario, search))


def _sweep_population(spec: SweepSpec) -> SweepResult:
    tasks = [(_scenario_for_n(spec, n), spec.search) for n in spec.n_values]
    outcomes = _pmap(_population_point, tasks, spec.jobs)
    rows = [(n, cgt, pt) for n, (cgt, pt) in zip(spec.n_values, outcomes)]
    failures = sum(1 for _, pt in outcomes if np.isnan(pt))
    return SweepResult("population", _HEADERS["population"], rows, failures)


def _grouped_scenario(spec: SweepSpec) -> tuple[Scenario, list[list[int]]]:
    """Base scenario split into the three behavioral groups, cyclically."""
    base = _base_scenario(spec)
    groups: list[list[int]] = [[] for _ in PRICE_RESPONSE_GROUPS]
    prosumers = list(base.prosumers)
    for i, p in enumerate(prosumers):
        g = i % len(PRICE_RESPONSE_GROUPS)
        groups[g].append(i)
        _, reference = PRICE_RESPONSE_GROUPS[g]
        if reference is None:
            prospect = RATIONAL
        else:
            prospect = replace(p.prospect, reference=reference)
        prosumers[i] = replace(p, prospect=prospect)
    return replace(base, prosumers=tuple(prosumers)), groups


def _price_response_point(args) -> list[float]:
    scenario, rho, groups, search = args
    priced = replace(scenario, market=scenario.market.with_rho_base(rho))
    report = sequential_best_response(priced, search)
    if not report.converged:
        return [float("nan")] * len(groups)
    return [float(np.sum(report.profile[idx])) for idx in groups]


def _sweep_price_response(spec: SweepSpec) -> SweepResult:
    scenario, groups = _grouped_scenario(spec)
    tasks = [(scenario, rho, groups, spec.search) for rho in spec.rho_values]
    outcomes = _pmap(_price_response_point, tasks, spec.jobs)
    rows = []
    failures = 0
    for rho, loads in zip(spec.rho_values, outcomes):
        if any(np.isnan(v) for v in loads):
            failures += 1
        for (name, _), load in zip(PRICE_RESPONSE_GROUPS, loads):
            rows.append((rho, name, load))
    return SweepResult("price_response", _HEADERS["price_response"], rows, failures)


def _convergence_point(args) -> tuple[int, bool]:
    scenario, search = args
    report = sequential_best_response(scenario, search)
    return report.iterations, report.converged


def _sweep_convergence(spec: SweepSpec) -> SweepResult:
    tasks = [(_scenario_for_n(spec, n), spec.search) for n in spec.n_values]
    outcomes = _pmap(_convergence_point, tasks, spec.jobs)
    rows = [(n, iters, "true" if ok else "false")
            for n, (iters, ok) in zip(spec.n_values, outcomes)]
    failures = sum(1 for _, ok in outcomes if not ok)
    return SweepResult("convergence", _HEADERS["convergence"], rows, failures)


_RUNNERS = {
    "reference": _sweep_reference,
    "lambda": _sweep_lambda,
    "profit_gap": _sweep_profit_gap,
    "population": _sweep_population,
    "price_response": _sweep_price_response,
    "convergence": _sweep_convergence,
}


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Execute one sweep and write its CSV to ``spec.out``."""
    result = _RUNNERS[spec.kind](spec)
    write_csv(result, spec.out)
    return result


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(result: SweepResult, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(result.header)
        for row in result.rows:
            writer.writerow([_cell(v) for v in row])
