"""Partition allocations, welfare, exact welfare maximisation and demand sets."""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .errors import CapacityError, InfeasibleAllocationError, ValidationError
from .valuations import Valuation, additive_table, check_itemset, popcounts

OPT_CAP = 10**7

Allocation = tuple  # tuple[int, ...]: one item mask per bidder
Profile = tuple  # tuple[Valuation, ...]: one realised valuation per bidder


def check_allocation(x: Sequence[int], m: int, n: int | None = None) -> tuple[int, ...]:
    """Validate that ``x`` is a family of pairwise-disjoint item sets."""
    x = tuple(int(s) for s in x)
    if n is not None and len(x) != n:
        raise InfeasibleAllocationError(f"allocation has {len(x)} parts, expected {n}")
    seen = 0
    for i, s in enumerate(x):
        if s < 0 or s >> m:
            raise InfeasibleAllocationError(f"part {i} uses items outside M")
        if s & seen:
            raise InfeasibleAllocationError(f"part {i} overlaps an earlier part")
        seen |= s
    return x


def welfare(profile: Sequence[Valuation], x: Sequence[int]) -> float:
    """``sum_i v_i(x_i)``, accumulated in bidder order."""
    if not profile:
        raise ValidationError("empty profile")
    m = profile[0].m
    x = check_allocation(x, m, len(profile))
    total = 0.0
    for v, s in zip(profile, x):
        total += float(v.table[s])
    return total


def assignment_to_allocation(assign: Sequence[int], n: int) -> tuple[int, ...]:
    """Convert an item->bidder vector (``-1`` = unallocated) into item masks."""
    parts = [0] * n
    for j, i in enumerate(assign):
        if i >= 0:
            parts[i] |= 1 << j
    return tuple(parts)


class OptResult(NamedTuple):
    allocation: tuple[int, ...]
    value: float


def optimal_allocation(profile: Sequence[Valuation], chunk: int = 1 << 18) -> OptResult:
    """Welfare-maximising partition by enumerating every item assignment.

    Each item goes to a bidder or to nobody; among maximisers the
    lexicographically smallest assignment vector wins, with "nobody" ordered
    before bidder 0.
    """
    n = len(profile)
    if n == 0:
        raise ValidationError("empty profile")
    m = profile[0].m
    if any(v.m != m for v in profile):
        raise ValidationError("profile valuations disagree on the item count")
    size = (n + 1) ** m
    if size > OPT_CAP:
        raise CapacityError(f"{size} assignments exceeds the enumeration cap {OPT_CAP}")
    tables = [v.table for v in profile]
    base = n + 1
    weights = np.int64(1) << np.arange(m, dtype=np.int64)
    best_val = -np.inf
    best_code = 0
    for start in range(0, size, chunk):
        codes = np.arange(start, min(size, start + chunk), dtype=np.int64)
        digits = np.empty((codes.size, m), dtype=np.int64)
        rest = codes
        for j in range(m - 1, -1, -1):
            digits[:, j] = rest % base
            rest = rest // base
        assign = digits - 1
        total = np.zeros(codes.size)
        for i in range(n):
            masks = (assign == i).astype(np.int64) @ weights
            total = total + tables[i][masks]
        k = int(np.argmax(total))
        if total[k] > best_val:
            best_val = float(total[k])
            best_code = int(codes[k])
    digits = []
    rest = best_code
    for _ in range(m):
        digits.append(rest % base)
        rest //= base
    assign = [d - 1 for d in reversed(digits)]
    return OptResult(assignment_to_allocation(assign, n), best_val)


class Demand(NamedTuple):
    bundle: int
    utility: float


def price_table(prices: np.ndarray) -> np.ndarray:
    """``p(S)`` for every mask ``S``."""
    return additive_table(prices)


def demand_set(v: Valuation, prices, available: int, ptable: np.ndarray | None = None) -> Demand:
    """Utility-maximising bundle among subsets of ``available``.

    Ties go to fewer items, then to the smaller mask; ``∅`` (utility 0) is
    always a candidate.
    """
    m = v.m
    available = check_itemset(available, m)
    if ptable is None:
        ptable = price_table(np.asarray(prices, dtype=float))
    masks = np.arange(1 << m)
    cand = masks[(masks & ~available) == 0]
    util = v.table[cand] - ptable[cand]
    best = util.max()
    tied = cand[util == best]
    if tied.size > 1:
        sizes = popcounts(m)[tied]
        tied = tied[sizes == sizes.min()]
    S = int(tied.min())
    return Demand(S, float(v.table[S] - ptable[S]))
