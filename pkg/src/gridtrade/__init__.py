"""Prosumer-company energy trading: equilibria under expected utility and
prospect-theoretic framing, plus the experiment sweeps behind the CLI."""

from .market import (
    MarketParams,
    ProspectParams,
    ProsumerParams,
    RATIONAL,
    Scenario,
    cgt_expected_utility,
    company_utility,
    feasible_bounds,
    realized_utility,
    unit_price,
)
from .cgt import (
    EquilibriumReport,
    KKTCertificate,
    RelaxationSettings,
    best_response_cgt,
    brute_force_ne,
    cgt_deviation_epsilon,
    kkt_verify,
    ni_residual,
    nikaido_isoda,
    project_onto_box,
    relaxation_solve,
)
from .prospect import (
    ConcavityCaseReport,
    PtUtilityTerms,
    classify_concavity,
    framing_value,
    pt_expected_utility,
    pt_expected_utility_mc,
)
from .pt_solver import (
    PtSearchSettings,
    best_response_pt,
    pt_deviation_epsilon,
    relaxation_solve_pt,
    sequential_best_response,
)
from .stackelberg import (
    SeVerification,
    StackelbergResult,
    epsilon_se_grid,
    verify_se,
)

__version__ = "0.1.0"
