import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_subadditive_table, valuations
from prophet_lab.errors import MalformedSpecError, ValidationError, WrongVariantError
from prophet_lab.valuations import (
    Additive,
    BidderDistribution,
    Instance,
    SqrtAdditive,
    Table,
    UnitDemand,
    Xos,
    as_table,
    check_class,
    deterministic,
    full_set,
    items_of,
    itemset,
    sample_valuation,
    submasks,
    supporting_clause,
)


def brute_value(v, S):
    """Direct formula per variant, independent of the vectorised tables."""
    items = items_of(S)
    if isinstance(v, Additive):
        return math.fsum(v.weights[j] for j in items)
    if isinstance(v, UnitDemand):
        return max((v.weights[j] for j in items), default=0.0)
    if isinstance(v, SqrtAdditive):
        return math.sqrt(math.fsum(v.weights[j] for j in items))
    if isinstance(v, Xos):
        return max(math.fsum(c[j] for j in items) for c in v.clauses)
    return v.values[S]


class TestItemSets:
    def test_itemset_roundtrip(self):
        assert itemset(0, 2) == 0b101
        assert items_of(0b101) == (0, 2)
        assert full_set(3) == 0b111

    def test_submasks_cover_every_subset(self):
        subs = sorted(submasks(0b1011))
        assert subs == sorted(S for S in range(16) if S & ~0b1011 == 0)

    def test_negative_item_rejected(self):
        with pytest.raises(ValidationError):
            itemset(-1)


class TestEval:
    def test_examples(self):
        assert Additive((0.5, 0.7))(0b11) == pytest.approx(1.2)
        assert UnitDemand((0.5, 1.0))(0b11) == 1.0
        assert SqrtAdditive((1.0, 1.0))(0b11) == pytest.approx(math.sqrt(2))

    def test_item_outside_m_rejected(self):
        with pytest.raises(ValidationError):
            Additive((1.0,))(0b10)

    @given(valuations())
    @settings(max_examples=60, deadline=None)
    def test_table_matches_direct_formula(self, v):
        for S in range(1 << v.m):
            assert v(S) == pytest.approx(brute_value(v, S), rel=1e-12, abs=1e-12)

    @given(valuations())
    @settings(max_examples=30, deadline=None)
    def test_eval_is_pure(self, v):
        S = full_set(v.m)
        assert v(S) == v(S)
        assert np.array_equal(v.table, type(v)(*[getattr(v, f) for f in v.__dataclass_fields__]).table)

    def test_tables_are_read_only(self):
        v = Additive((1.0, 2.0))
        with pytest.raises(ValueError):
            v.table[0] = 3.0

    def test_as_table_preserves_values(self):
        v = Xos(((1.0, 0.0), (0.0, 2.0)))
        assert np.array_equal(as_table(v).table, v.table)


class TestMalformed:
    @pytest.mark.parametrize("make", [
        lambda: Additive(()),
        lambda: Additive((-1.0,)),
        lambda: UnitDemand((float("nan"),)),
        lambda: Xos(()),
        lambda: Xos(((1.0,), (1.0, 2.0))),
        lambda: Table((0.0, 1.0, 1.0)),
        lambda: Table((0.0, -1.0)),
    ])
    def test_rejected(self, make):
        with pytest.raises(MalformedSpecError):
            make()

    def test_too_many_items(self):
        with pytest.raises(MalformedSpecError):
            Additive((1.0,) * 17)


class TestClassCheck:
    def test_subadditive_witness(self):
        res = check_class(Table((0.0, 1.0, 1.0, 3.0)), "subadditive")
        assert not res.holds and res.witness == (1, 2)

    def test_non_monotone_witness(self):
        res = check_class(Table((0.0, 2.0, 1.0, 1.0)), "normalized_monotone")
        assert not res and res.witness == (1, 3)

    def test_not_normalized(self):
        assert check_class(Table((1.0, 1.0)), "normalized_monotone").witness == (0,)

    def test_unit_demand_is_submodular_and_xos(self):
        v = UnitDemand((1.0, 2.0, 3.0))
        assert check_class(v, "submodular")
        clauses = [tuple(float(i == j) * v.weights[j] for j in range(3)) for i in range(3)]
        assert check_class(v, "xos_consistent", clauses=clauses)

    def test_complementarity_not_submodular(self):
        res = check_class(Table((0.0, 0.0, 0.0, 1.0)), "submodular")
        assert not res and res.witness == (0, 1, 1)

    def test_xos_needs_clauses(self):
        with pytest.raises(WrongVariantError):
            check_class(Additive((1.0,)), "xos_consistent")

    def test_unknown_class(self):
        with pytest.raises(ValidationError):
            check_class(Additive((1.0,)), "convex")

    @given(valuations())
    @settings(max_examples=60, deadline=None)
    def test_every_variant_is_monotone_and_subadditive(self, v):
        assert check_class(v, "normalized_monotone")
        assert check_class(v, "subadditive")

    @given(valuations(kinds=("xos",)))
    @settings(max_examples=60, deadline=None)
    def test_xos_consistent_and_supporting_clause_tight(self, v):
        assert check_class(v, "xos_consistent")
        for S in range(1 << v.m):
            c = v.clauses[supporting_clause(v, S)]
            assert math.fsum(c[j] for j in items_of(S)) == pytest.approx(v(S), abs=1e-12)
            for other in v.clauses:
                assert v(S) >= math.fsum(other[j] for j in items_of(S)) - 1e-12

    def test_random_tables_are_subadditive(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            v = random_subadditive_table(rng, 3)
            assert check_class(v, "normalized_monotone") and check_class(v, "subadditive")

    def test_brute_force_subadditive_agrees(self):
        rng = np.random.default_rng(1)
        for _ in range(40):
            t = np.sort(rng.uniform(0, 1, 8))
            t[0] = 0.0
            v = Table(tuple(t))
            brute = all(v(S | T) <= v(S) + v(T) + 1e-12 for S, T in itertools.product(range(8), repeat=2))
            assert bool(check_class(v, "subadditive")) == brute


class TestSupportingClause:
    def test_tie_breaks_to_smallest_index(self):
        v = Xos(((1.0, 0.0), (1.0, 0.0)))
        assert supporting_clause(v, 0b01) == 0

    def test_non_xos_rejected(self):
        with pytest.raises(WrongVariantError):
            supporting_clause(Additive((1.0,)), 1)


class TestDistributions:
    def test_renormalizes_within_tolerance(self):
        d = BidderDistribution(((0.5, Additive((1.0,))), (0.499999999999, Additive((2.0,)))))
        assert math.fsum(d.probs) == pytest.approx(1.0, abs=1e-15)

    def test_rejects_bad_sum(self):
        with pytest.raises(MalformedSpecError):
            BidderDistribution(((0.5, Additive((1.0,))), (0.4, Additive((2.0,)))))

    def test_rejects_zero_probability(self):
        with pytest.raises(MalformedSpecError):
            BidderDistribution(((1.0, Additive((1.0,))), (0.0, Additive((2.0,)))))

    def test_rejects_non_monotone_support(self):
        with pytest.raises(MalformedSpecError):
            BidderDistribution(((1.0, Table((0.0, 2.0, 1.0, 1.0))),))

    def test_sampling_frequencies(self):
        d = BidderDistribution(((0.25, Additive((1.0,))), (0.75, Additive((2.0,)))))
        rng = np.random.default_rng(3)
        draws = [sample_valuation(d, rng)[0] for _ in range(20000)]
        assert np.mean(draws) == pytest.approx(0.75, abs=0.015)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_sampling_consumes_one_uniform(self, seed):
        d = BidderDistribution(((0.5, Additive((1.0,))), (0.5, Additive((2.0,)))))
        a, b = np.random.default_rng(seed), np.random.default_rng(seed)
        sample_valuation(d, a)
        b.random()
        assert a.random() == b.random()


class TestInstance:
    def test_profiles_sum_to_one(self):
        inst = Instance(1, (
            BidderDistribution(((0.3, Additive((1.0,))), (0.7, Additive((2.0,))))),
            BidderDistribution(((1.0, Additive((3.0,))),)),
        ))
        probs = [p for p, _, _ in inst.profiles()]
        assert math.fsum(probs) == pytest.approx(1.0)
        assert inst.num_profiles == 2 and inst.v_max == 3.0

    def test_item_count_mismatch(self):
        with pytest.raises(ValidationError):
            deterministic(2, [Additive((1.0,))])

    def test_check_all_names_bidder(self):
        inst = deterministic(2, [UnitDemand((1.0, 1.0)), Table((0.0, 0.0, 0.0, 1.0))])
        with pytest.raises(ValidationError, match="bidder 1"):
            inst.check_all("submodular")
