"""Exact and Monte Carlo checks for posted prices and score-based thresholds
in sequential combinatorial auctions.

Item sets are ``int`` bitmasks over items ``0 .. m-1``.  Every expectation
with an ``_exact`` suffix enumerates the full product distribution.
"""

from .allocation import Demand, OptResult, check_allocation, demand_set, optimal_allocation, welfare
from .errors import (
    AlignmentError,
    CapacityError,
    InfeasibleAllocationError,
    MalformedSpecError,
    ParameterError,
    PreconditionError,
    ProphetLabError,
    ValidationError,
    WitnessNotFound,
    WrongVariantError,
)
from .fixedpoint import (
    BoundReport,
    FixedPointResult,
    IRSGVector,
    ScoreGrid,
    best_fixed_point,
    build_grid,
    construct_fhat,
    find_fixed_point,
    helper1_witness,
    phi_residual,
    price_marginal,
    proof_chain,
    verify_constant_bound,
)
from .mechanisms import (
    BalanceReport,
    ExpectedOutcome,
    MechanismTrace,
    balanced_prices_xos,
    check_balanced,
    expected_opt,
    expected_welfare_exact,
    run_posted_price,
    single_item_price,
    supporting_clause_prices,
)
from .rsg import (
    IRSG,
    PriceLaw,
    ScoreDistribution,
    expected_alg_exact,
    mirror_sides_exact,
    mirror_sides_mc,
    price_law,
    random_irsg,
    run_correa_cristi,
)
from .stats import RunningStats, substream
from .subgood import SubgoodSolution, solve_subgood, verify_subgood
from .valuations import (
    Additive,
    BidderDistribution,
    Instance,
    SqrtAdditive,
    Table,
    UnitDemand,
    Valuation,
    Xos,
    check_class,
    deterministic,
    full_set,
    items_of,
    itemset,
    sample_valuation,
    supporting_clause,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
