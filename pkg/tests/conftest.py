"""Shared random instance generators and hypothesis strategies."""

from __future__ import annotations

import itertools

import numpy as np
from hypothesis import strategies as st

from prophet_lab.valuations import (
    Additive,
    BidderDistribution,
    Instance,
    SqrtAdditive,
    Table,
    UnitDemand,
    Xos,
)


def random_xos(rng, m, clauses=3, scale=1.0):
    k = int(rng.integers(1, clauses + 1))
    return Xos(tuple(tuple(rng.uniform(0, scale, m).round(3)) for _ in range(k)))


def random_subadditive_table(rng, m, scale=1.0):
    """Monotone subadditive table: a random XOS plus a set-size concave bonus."""
    base = random_xos(rng, m, scale=scale).table
    sizes = np.array([bin(S).count("1") for S in range(1 << m)])
    bonus = rng.uniform(0, scale) * np.sqrt(sizes)
    return Table(tuple((base + bonus).round(6)))


def random_valuation(rng, m, kind=None, scale=1.0):
    kind = kind or rng.choice(["additive", "unit_demand", "xos", "sqrt_additive", "table"])
    w = tuple(rng.uniform(0, scale, m).round(3))
    if kind == "additive":
        return Additive(w)
    if kind == "unit_demand":
        return UnitDemand(w)
    if kind == "sqrt_additive":
        return SqrtAdditive(w)
    if kind == "xos":
        return random_xos(rng, m, scale=scale)
    return random_subadditive_table(rng, m, scale)


def random_instance(rng, n_max, m_max, support_max, kind=None, scale=1.0, n=None, m=None):
    n = n or int(rng.integers(1, n_max + 1))
    m = m or int(rng.integers(1, m_max + 1))
    bidders = []
    for _ in range(n):
        k = int(rng.integers(1, support_max + 1))
        q = rng.dirichlet(np.ones(k))
        bidders.append(BidderDistribution(tuple(
            (float(q[j]), random_valuation(rng, m, kind, scale)) for j in range(k))))
    return Instance(m, tuple(bidders))


def all_orders(n):
    return list(itertools.permutations(range(n)))


weights = st.floats(min_value=0.0, max_value=10.0, allow_nan=False, allow_infinity=False)


@st.composite
def valuations(draw, m=None, kinds=("additive", "unit_demand", "xos", "sqrt_additive")):
    m = m or draw(st.integers(1, 4))
    kind = draw(st.sampled_from(kinds))
    if kind == "xos":
        clauses = draw(st.lists(st.tuples(*[weights] * m), min_size=1, max_size=3))
        return Xos(tuple(clauses))
    w = tuple(draw(st.tuples(*[weights] * m)))
    return {"additive": Additive, "unit_demand": UnitDemand, "sqrt_additive": SqrtAdditive}[kind](w)


@st.composite
def profiles(draw, n_max=3, m_max=3, kinds=("additive", "unit_demand", "xos", "sqrt_additive")):
    m = draw(st.integers(1, m_max))
    n = draw(st.integers(1, n_max))
    return tuple(draw(valuations(m=m, kinds=kinds)) for _ in range(n))
