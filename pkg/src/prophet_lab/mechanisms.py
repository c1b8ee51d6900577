"""Sequential posted-price mechanisms and balanced item prices.

Prices are static, anonymous item prices: one non-negative number per item.
Buyers arrive in a given order and take a utility-maximising bundle among
the items still unsold (see :func:`prophet_lab.allocation.demand_set`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .allocation import check_allocation, demand_set, optimal_allocation, price_table
from .errors import CapacityError, ValidationError, WrongVariantError
from .valuations import (
    Instance,
    Valuation,
    Xos,
    full_set,
    sample_valuation,
    supporting_clause,
)

PROFILE_CAP = 10**6
BALANCE_TOL = 1e-9


def as_prices(p, m: int) -> np.ndarray:
    """Validate and copy a static anonymous item price vector."""
    arr = np.array(p, dtype=float).reshape(-1)
    if arr.shape != (m,):
        raise ValidationError(f"price vector has {arr.size} entries, expected {m}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValidationError("prices must be finite and non-negative")
    arr.setflags(write=False)
    return arr


def check_order(order, n: int) -> tuple[int, ...]:
    if order is None:
        return tuple(range(n))
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(n)):
        raise ValidationError(f"order {order} is not a permutation of range({n})")
    return order


@dataclass(frozen=True)
class MechanismTrace:
    """Outcome of one sequential run.  Per-bidder fields are indexed by bidder id."""

    order: tuple[int, ...]
    support_index: tuple[int, ...]
    bundles: tuple[int, ...]
    values: tuple[float, ...]
    payments: tuple[float, ...]
    utilities: tuple[float, ...]
    thresholds: tuple[float, ...] | None = None
    phantom_index: tuple[int, ...] | None = None

    @property
    def welfare(self) -> float:
        return math.fsum(self.values)

    @property
    def revenue(self) -> float:
        return math.fsum(self.payments)

    @property
    def utility(self) -> float:
        return math.fsum(self.utilities)

    def to_dict(self) -> dict:
        out = {
            "order": list(self.order),
            "support_index": list(self.support_index),
            "bundles": list(self.bundles),
            "values": list(self.values),
            "payments": list(self.payments),
            "utilities": list(self.utilities),
            "welfare": self.welfare,
            "revenue": self.revenue,
            "utility": self.utility,
        }
        if self.thresholds is not None:
            out["thresholds"] = list(self.thresholds)
            out["phantom_index"] = list(self.phantom_index)
        return out


def posted_price_outcome(
    profile: Sequence[Valuation], prices, order=None, support_index=None
) -> MechanismTrace:
    """Run the posted-price mechanism on a realised valuation profile."""
    n = len(profile)
    m = profile[0].m
    p = as_prices(prices, m)
    ptable = price_table(p)
    order = check_order(order, n)
    remaining = full_set(m)
    bundles = [0] * n
    values = [0.0] * n
    payments = [0.0] * n
    utilities = [0.0] * n
    for i in order:
        S, u = demand_set(profile[i], p, remaining, ptable)
        remaining &= ~S
        bundles[i] = S
        values[i] = float(profile[i].table[S])
        payments[i] = float(ptable[S])
        utilities[i] = u
    if support_index is None:
        support_index = (0,) * n
    return MechanismTrace(order, tuple(support_index), tuple(bundles), tuple(values),
                          tuple(payments), tuple(utilities))


def run_posted_price(inst: Instance, prices, order=None, rng=None) -> MechanismTrace:
    """Sample each bidder's valuation on arrival and let them buy their demand set."""
    rng = np.random.default_rng() if rng is None else rng
    order = check_order(order, inst.n)
    idx = [0] * inst.n
    profile: list[Valuation | None] = [None] * inst.n
    for i in order:
        idx[i], profile[i] = sample_valuation(inst.bidders[i], rng)
    return posted_price_outcome(profile, prices, order, idx)


def _check_profile_cap(inst: Instance, cap: int = PROFILE_CAP) -> None:
    if inst.num_profiles > cap:
        raise CapacityError(f"{inst.num_profiles} valuation profiles exceeds the cap {cap}")


def single_item_price(inst: Instance) -> np.ndarray:
    """Half the expected maximum value, by enumerating the product distribution."""
    if inst.m != 1:
        raise ValidationError(f"single-item pricing needs m = 1, instance has m = {inst.m}")
    _check_profile_cap(inst)
    e_max = 0.0
    for prob, _, vals in inst.profiles():
        e_max += prob * max(v.grand() for v in vals)
    return as_prices([0.5 * e_max], 1)


class ExpectedOutcome(NamedTuple):
    welfare: float
    revenue: float
    utility: float


def expected_welfare_exact(inst: Instance, prices, order=None) -> ExpectedOutcome:
    """Exact expected welfare, revenue and buyer utility of the posted-price mechanism."""
    _check_profile_cap(inst)
    p = as_prices(prices, inst.m)
    order = check_order(order, inst.n)
    w = r = u = 0.0
    for prob, idx, vals in inst.profiles():
        tr = posted_price_outcome(vals, p, order, idx)
        w += prob * tr.welfare
        r += prob * tr.revenue
        u += prob * tr.utility
    return ExpectedOutcome(w, r, u)


def expected_opt(inst: Instance) -> float:
    _check_profile_cap(inst)
    return sum(prob * optimal_allocation(vals).value for prob, _, vals in inst.profiles())


# ---------------------------------------------------------------------------
# balanced prices for XOS valuations
# ---------------------------------------------------------------------------


def supporting_clause_prices(profile: Sequence[Valuation], allocation=None) -> np.ndarray:
    """Item prices read off the supporting clauses of an optimal allocation.

    Item ``j`` in bidder ``i``'s optimal bundle ``U_i`` is priced at ``a_j``
    for the clause ``a`` of ``v_i`` supporting ``U_i``; unallocated items cost 0.
    """
    for i, v in enumerate(profile):
        if not isinstance(v, Xos):
            raise WrongVariantError(f"bidder {i}: supporting-clause prices need XOS, got {v.kind}")
    m = profile[0].m
    if allocation is None:
        allocation = optimal_allocation(profile).allocation
    allocation = check_allocation(allocation, m, len(profile))
    prices = np.zeros(m)
    for v, U in zip(profile, allocation):
        if U == 0:
            continue
        clause = v.clauses[supporting_clause(v, U)]
        for j in range(m):
            if U >> j & 1:
                prices[j] = clause[j]
    return prices


def balanced_prices_xos(inst: Instance, scale: float = 0.5) -> np.ndarray:
    """``scale`` times the expected supporting-clause prices over all profiles.

    With the default ``scale = 1/2`` this is the (1,1)-balanced rule scaled by
    ``alpha / (1 + alpha * beta)``.
    """
    for i, d in enumerate(inst.bidders):
        for k, v in enumerate(d.valuations):
            if not isinstance(v, Xos):
                raise WrongVariantError(f"bidder {i}, support {k}: expected XOS, got {v.kind}")
    _check_profile_cap(inst)
    acc = np.zeros(inst.m)
    for prob, _, vals in inst.profiles():
        acc = acc + prob * supporting_clause_prices(vals)
    return as_prices(scale * acc, inst.m)


@dataclass(frozen=True)
class BalanceReport:
    cond1_ok: bool
    cond2_ok: bool
    cond1_slack: float
    cond2_slack: float
    cond1_witness: tuple[int, ...] | None
    cond2_witness: tuple[tuple[int, ...], tuple[int, ...]] | None

    @property
    def balanced(self) -> bool:
        return self.cond1_ok and self.cond2_ok

    @property
    def worst_slack(self) -> float:
        return min(self.cond1_slack, self.cond2_slack)


PricingRule = Callable[[int, int], float]


def _as_rule(prices, n: int, m: int) -> PricingRule:
    if callable(prices):
        return prices
    arr = np.asarray(prices, dtype=float)
    if arr.shape == (m,):
        table = price_table(arr)
        return lambda i, S: float(table[S])
    if arr.shape == (n, m):
        tables = [price_table(row) for row in arr]
        return lambda i, S: float(tables[i][S])
    raise ValidationError(f"pricing rule of shape {arr.shape} fits neither ({m},) nor ({n}, {m})")


def _superset_max(by_union: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """``out[R] = max_{U ⊆ R} by_union[U]`` together with the arg-max ``U``."""
    out = by_union.copy()
    arg = np.arange(1 << m)
    for j in range(m):
        bit = 1 << j
        for R in range(1 << m):
            if R & bit and out[R ^ bit] > out[R]:
                out[R] = out[R ^ bit]
                arg[R] = arg[R ^ bit]
    return out, arg


def _all_assignments(n: int, m: int) -> np.ndarray:
    """Every allocation as an ``(N, n)`` array of item masks."""
    base = n + 1
    codes = np.arange(base**m)
    parts = np.zeros((codes.size, n), dtype=np.int64)
    rest = codes
    for j in range(m - 1, -1, -1):
        d = rest % base - 1
        rest = rest // base
        for i in range(n):
            parts[:, i] |= np.where(d == i, 1 << j, 0)
    return parts


def check_balanced(profile: Sequence[Valuation], prices, alpha: float = 1.0,
                   beta: float = 1.0, tol: float = BALANCE_TOL) -> BalanceReport:
    """Check the two balancedness conditions over every feasible allocation.

    ``prices`` is an item price vector ``(m,)``, per-bidder item prices
    ``(n, m)``, or a callable ``rule(i, S)``.  The exchange-compatible family
    ``F_x`` is every allocation of the items left unallocated by ``x``.
    """
    if alpha <= 0 or beta < 0:
        raise ValidationError("need alpha > 0 and beta >= 0")
    n = len(profile)
    m = profile[0].m
    if (n + 1) ** m > 10**6:
        raise CapacityError("balance check enumerates (n+1)^m allocations squared; too large")
    rule = _as_rule(prices, n, m)
    parts = _all_assignments(n, m)
    full = full_set(m)
    unions = np.bitwise_or.reduce(parts, axis=1)
    wel = np.array([math.fsum(float(profile[i].table[s]) for i, s in enumerate(row)) for row in parts])
    pay = np.array([math.fsum(rule(i, int(s)) for i, s in enumerate(row)) for row in parts])

    best_wel = np.full(1 << m, -np.inf)
    best_pay = np.full(1 << m, -np.inf)
    pay_arg = np.zeros(1 << m, dtype=np.int64)
    for k, U in enumerate(unions):
        best_wel[U] = max(best_wel[U], wel[k])
        if pay[k] > best_pay[U]:
            best_pay[U] = pay[k]
            pay_arg[U] = k
    opt_in, _ = _superset_max(best_wel, m)
    pay_in, pay_union = _superset_max(best_pay, m)
    opt = opt_in[full]

    s1 = np.empty(len(parts))
    s2 = np.empty(len(parts))
    for k, U in enumerate(unions):
        rest = full & ~int(U)
        s1[k] = pay[k] - (opt - opt_in[rest]) / alpha
        s2[k] = beta * opt_in[rest] - pay_in[rest]
    k1 = int(np.argmin(s1))
    k2 = int(np.argmin(s2))
    c1 = bool(s1[k1] >= -tol)
    c2 = bool(s2[k2] >= -tol)
    w1 = None if c1 else tuple(int(s) for s in parts[k1])
    w2 = None
    if not c2:
        rest = full & ~int(unions[k2])
        xp = parts[pay_arg[pay_union[rest]]]
        w2 = (tuple(int(s) for s in parts[k2]), tuple(int(s) for s in xp))
    return BalanceReport(c1, c2, float(s1[k1]), float(s2[k2]), w1, w2)


# the subgood certificate lives in its own module; re-exported here
from .subgood import SubgoodSolution, solve_subgood, verify_subgood  # noqa: E402,F401
