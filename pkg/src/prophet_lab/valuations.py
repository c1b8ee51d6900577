"""Valuation functions over item bundles, class checkers and bidder distributions.

Item sets are plain ``int`` bit masks: item ``j`` (0-based) is in ``S`` iff
``S >> j & 1``.  Every valuation exposes its full value table ``v.table``
(length ``2**m``), which is what the enumerating algorithms index into.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import MalformedSpecError, ValidationError, WrongVariantError

MAX_ITEMS = 16
PROB_TOL = 1e-12
CLASS_TOL = 1e-12

CLASSES = ("normalized_monotone", "submodular", "xos_consistent", "subadditive")


# ---------------------------------------------------------------------------
# item sets
# ---------------------------------------------------------------------------


def itemset(*items: int) -> int:
    """Bit mask of the given 0-based item indices."""
    mask = 0
    for j in items:
        if j < 0:
            raise ValidationError(f"negative item index {j}")
        mask |= 1 << j
    return mask


def items_of(mask: int) -> tuple[int, ...]:
    """Sorted 0-based item indices contained in ``mask``."""
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return tuple(out)


def full_set(m: int) -> int:
    return (1 << m) - 1


def check_itemset(mask: int, m: int) -> int:
    if not isinstance(mask, (int, np.integer)) or mask < 0 or mask >> m:
        raise ValidationError(f"item set {mask!r} is not a subset of {m} items")
    return int(mask)


def submasks(mask: int) -> Iterator[int]:
    """All subsets of ``mask`` in increasing numeric order."""
    for s in range(mask + 1):
        if s & mask == s:
            yield s


@lru_cache(maxsize=None)
def item_bits(m: int) -> np.ndarray:
    """``(2**m, m)`` 0/1 matrix; row ``S`` is the indicator vector of ``S``."""
    masks = np.arange(1 << m)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(np.int64)
    bits.setflags(write=False)
    return bits


@lru_cache(maxsize=None)
def popcounts(m: int) -> np.ndarray:
    counts = item_bits(m).sum(axis=1)
    counts.setflags(write=False)
    return counts


def additive_table(weights: Sequence[float] | np.ndarray) -> np.ndarray:
    """``w(S)`` for every ``S``, summed item by item in index order."""
    w = np.asarray(weights, dtype=float)
    m = w.shape[0]
    bits = item_bits(m)
    table = np.zeros(1 << m)
    for j in range(m):
        table = table + w[j] * bits[:, j]
    return table


def mask_from_bool(rows: np.ndarray) -> np.ndarray:
    """Pack boolean rows ``(..., m)`` into integer item masks."""
    rows = np.asarray(rows, dtype=np.int64)
    m = rows.shape[-1]
    return rows @ (np.int64(1) << np.arange(m, dtype=np.int64))


# ---------------------------------------------------------------------------
# valuation variants
# ---------------------------------------------------------------------------


def _weights(name: str, values: Iterable[float]) -> tuple[float, ...]:
    w = tuple(float(x) for x in values)
    if not w:
        raise MalformedSpecError(f"{name}: weight vector is empty")
    if len(w) > MAX_ITEMS:
        raise MalformedSpecError(f"{name}: {len(w)} items exceeds cap {MAX_ITEMS}")
    for x in w:
        if not math.isfinite(x) or x < 0:
            raise MalformedSpecError(f"{name}: weights must be finite and >= 0, got {x}")
    return w


class Valuation:
    """Base class for valuation specs.  Subclasses fill in ``_build_table``."""

    kind = "abstract"

    @property
    def m(self) -> int:
        raise NotImplementedError

    def _build_table(self) -> np.ndarray:
        raise NotImplementedError

    @cached_property
    def table(self) -> np.ndarray:
        t = np.ascontiguousarray(self._build_table(), dtype=float)
        t.setflags(write=False)
        return t

    def __call__(self, S: int) -> float:
        return float(self.table[check_itemset(S, self.m)])

    value = __call__

    def grand(self) -> float:
        """``v(M)``."""
        return float(self.table[-1])


@dataclass(frozen=True, eq=True)
class Additive(Valuation):
    weights: tuple[float, ...]
    kind = "additive"

    def __post_init__(self):
        object.__setattr__(self, "weights", _weights(self.kind, self.weights))

    @property
    def m(self) -> int:
        return len(self.weights)

    def _build_table(self):
        return additive_table(self.weights)


@dataclass(frozen=True, eq=True)
class UnitDemand(Valuation):
    weights: tuple[float, ...]
    kind = "unit_demand"

    def __post_init__(self):
        object.__setattr__(self, "weights", _weights(self.kind, self.weights))

    @property
    def m(self) -> int:
        return len(self.weights)

    def _build_table(self):
        bits = item_bits(self.m)
        return (bits * np.asarray(self.weights)).max(axis=1)


@dataclass(frozen=True, eq=True)
class SqrtAdditive(Valuation):
    """``v(S) = sqrt(sum_{j in S} w_j)``: subadditive, not additive."""

    weights: tuple[float, ...]
    kind = "sqrt_additive"

    def __post_init__(self):
        object.__setattr__(self, "weights", _weights(self.kind, self.weights))

    @property
    def m(self) -> int:
        return len(self.weights)

    def _build_table(self):
        return np.sqrt(additive_table(self.weights))


@dataclass(frozen=True, eq=True)
class Xos(Valuation):
    """Pointwise maximum of additive clauses."""

    clauses: tuple[tuple[float, ...], ...]
    kind = "xos"

    def __post_init__(self):
        if len(self.clauses) == 0:
            raise MalformedSpecError("xos: at least one clause is required")
        clauses = tuple(_weights(self.kind, c) for c in self.clauses)
        if len({len(c) for c in clauses}) != 1:
            raise MalformedSpecError("xos: clauses have different lengths")
        object.__setattr__(self, "clauses", clauses)

    @property
    def m(self) -> int:
        return len(self.clauses[0])

    @cached_property
    def clause_tables(self) -> np.ndarray:
        """``(k, 2**m)`` array with ``a_i(S)`` in row ``i``."""
        t = np.stack([additive_table(c) for c in self.clauses])
        t.setflags(write=False)
        return t

    def _build_table(self):
        return self.clause_tables.max(axis=0)


@dataclass(frozen=True, eq=True)
class Table(Valuation):
    """Explicit value table indexed by item mask."""

    values: tuple[float, ...]
    kind = "table"

    def __post_init__(self):
        vals = tuple(float(x) for x in self.values)
        n = len(vals)
        if n < 2 or n & (n - 1):
            raise MalformedSpecError(f"table: {n} entries is not 2**m for any m >= 1")
        if n > 1 << MAX_ITEMS:
            raise MalformedSpecError(f"table: more than {MAX_ITEMS} items")
        for x in vals:
            if not math.isfinite(x) or x < 0:
                raise MalformedSpecError(f"table: values must be finite and >= 0, got {x}")
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return len(self.values).bit_length() - 1

    def _build_table(self):
        return np.array(self.values, dtype=float)


def as_table(v: Valuation) -> Table:
    return Table(tuple(v.table.tolist()))


# ---------------------------------------------------------------------------
# class checks
# ---------------------------------------------------------------------------


class ClassCheck(NamedTuple):
    holds: bool
    witness: tuple | None = None

    def __bool__(self) -> bool:
        return self.holds


def check_class(v: Valuation, cls: str, clauses=None, tol: float = CLASS_TOL) -> ClassCheck:
    """Test ``v`` against a valuation class by exhaustive enumeration.

    Witnesses are item-mask tuples:

    * ``normalized_monotone`` -- ``(∅,)`` if ``v(∅) != 0``, else ``(S, T)`` with
      ``S ⊂ T`` and ``v(S) > v(T)``;
    * ``submodular`` -- ``(S, T, j)`` with ``S ⊆ T``, ``j ∉ T`` and the marginal
      of ``j`` larger at ``T``;
    * ``subadditive`` -- ``(S, T)`` with ``v(S ∪ T) > v(S) + v(T)``;
    * ``xos_consistent`` -- ``(S,)`` where ``v`` differs from the clause max.

    ``clauses`` is only used by ``xos_consistent`` and defaults to the clauses
    of an :class:`Xos` spec.
    """
    t = v.table
    m = v.m
    masks = np.arange(1 << m)
    if cls == "normalized_monotone":
        if abs(t[0]) > tol:
            return ClassCheck(False, (0,))
        for j in range(m):
            without = masks[(masks >> j) & 1 == 0]
            bad = np.nonzero(t[without] > t[without | (1 << j)] + tol)[0]
            if bad.size:
                S = int(without[bad[0]])
                return ClassCheck(False, (S, S | (1 << j)))
        return ClassCheck(True)
    if cls == "submodular":
        # local form: v(S+i) + v(S+j) >= v(S+i+j) + v(S) for i != j outside S
        for S in range(1 << m):
            for i in range(m):
                if S >> i & 1:
                    continue
                for j in range(m):
                    if j == i or S >> j & 1:
                        continue
                    Si = S | (1 << i)
                    if t[S | (1 << j)] - t[S] < t[Si | (1 << j)] - t[Si] - tol:
                        return ClassCheck(False, (S, Si, j))
        return ClassCheck(True)
    if cls == "subadditive":
        for S in range(1 << m):
            bad = np.nonzero(t[S | masks] > t[S] + t + tol)[0]
            if bad.size:
                return ClassCheck(False, (S, int(bad[0])))
        return ClassCheck(True)
    if cls == "xos_consistent":
        if clauses is None:
            if not isinstance(v, Xos):
                raise WrongVariantError("xos_consistent needs clauses for non-XOS specs")
            clauses = v.clauses
        ct = np.stack([additive_table(_weights("clause", c)) for c in clauses])
        if ct.shape[1] != t.shape[0]:
            raise MalformedSpecError("clauses do not match the valuation's item count")
        bad = np.nonzero(np.abs(ct.max(axis=0) - t) > tol)[0]
        if bad.size:
            return ClassCheck(False, (int(bad[0]),))
        return ClassCheck(True)
    raise ValidationError(f"unknown valuation class {cls!r}; expected one of {CLASSES}")


def supporting_clause(v: Valuation, S: int) -> int:
    """Smallest clause index attaining ``max_i a_i(S)``."""
    if not isinstance(v, Xos):
        raise WrongVariantError(f"supporting_clause needs an XOS valuation, got {v.kind}")
    S = check_itemset(S, v.m)
    return int(np.argmax(v.clause_tables[:, S]))


# ---------------------------------------------------------------------------
# distributions and instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BidderDistribution:
    """Finite-support distribution over valuations, as ``(q, v)`` pairs."""

    support: tuple[tuple[float, Valuation], ...]

    def __post_init__(self):
        pairs = tuple((float(q), v) for q, v in self.support)
        if not pairs:
            raise MalformedSpecError("distribution has empty support")
        for q, v in pairs:
            if not isinstance(v, Valuation):
                raise MalformedSpecError(f"support entry {v!r} is not a valuation")
            if not math.isfinite(q) or q <= 0:
                raise MalformedSpecError(f"support probability must be > 0, got {q}")
        total = math.fsum(q for q, _ in pairs)
        # one ulp of slack: decimal text like 0.999999999999 lands just outside 1e-12
        if abs(total - 1.0) > PROB_TOL + np.finfo(float).eps:
            raise MalformedSpecError(f"support probabilities sum to {total!r}, not 1")
        if len({v.m for _, v in pairs}) != 1:
            raise MalformedSpecError("support valuations disagree on the item count")
        for k, (_, v) in enumerate(pairs):
            chk = check_class(v, "normalized_monotone")
            if not chk:
                raise MalformedSpecError(
                    f"support valuation {k} is not normalized and monotone (witness {chk.witness})"
                )
        pairs = tuple((q / total, v) for q, v in pairs)
        object.__setattr__(self, "support", pairs)

    @classmethod
    def point(cls, v: Valuation) -> "BidderDistribution":
        return cls(((1.0, v),))

    @property
    def m(self) -> int:
        return self.support[0][1].m

    @property
    def size(self) -> int:
        return len(self.support)

    @cached_property
    def probs(self) -> np.ndarray:
        p = np.array([q for q, _ in self.support])
        p.setflags(write=False)
        return p

    @property
    def valuations(self) -> tuple[Valuation, ...]:
        return tuple(v for _, v in self.support)

    @cached_property
    def tables(self) -> np.ndarray:
        """``(|support|, 2**m)`` stacked value tables."""
        t = np.stack([v.table for v in self.valuations])
        t.setflags(write=False)
        return t


def sample_valuation(d: BidderDistribution, rng: np.random.Generator) -> tuple[int, Valuation]:
    """Draw one support entry.  Always consumes exactly one ``rng.random()``."""
    u = rng.random()
    cdf = np.cumsum(d.probs)
    k = min(int(np.searchsorted(cdf, u, side="right")), d.size - 1)
    return k, d.support[k][1]


@dataclass(frozen=True)
class Instance:
    m: int
    bidders: tuple[BidderDistribution, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 1 <= self.m <= MAX_ITEMS:
            raise ValidationError(f"m must be in [1, {MAX_ITEMS}], got {self.m}")
        bidders = tuple(self.bidders)
        if not bidders:
            raise ValidationError("instance needs at least one bidder")
        for i, d in enumerate(bidders):
            if d.m != self.m:
                raise ValidationError(f"bidder {i}: valuations have {d.m} items, instance has {self.m}")
        object.__setattr__(self, "bidders", bidders)

    @property
    def n(self) -> int:
        return len(self.bidders)

    @property
    def v_max(self) -> float:
        """``max v(M)`` over every support valuation of every bidder."""
        return max(float(d.tables[:, -1].max()) for d in self.bidders)

    @property
    def num_profiles(self) -> int:
        return math.prod(d.size for d in self.bidders)

    def profiles(self) -> Iterator[tuple[float, tuple[int, ...], tuple[Valuation, ...]]]:
        """Yield ``(probability, support indices, valuations)`` in lexicographic order."""
        for idx in itertools.product(*(range(d.size) for d in self.bidders)):
            prob = 1.0
            for d, k in zip(self.bidders, idx):
                prob *= d.support[k][0]
            yield prob, idx, tuple(d.support[k][1] for d, k in zip(self.bidders, idx))

    def check_all(self, cls: str) -> None:
        """Raise :class:`ValidationError` naming the first offending bidder."""
        for i, d in enumerate(self.bidders):
            for k, v in enumerate(d.valuations):
                chk = check_class(v, cls)
                if not chk:
                    raise ValidationError(
                        f"bidder {i}, support {k}: valuation is not {cls} (witness {chk.witness})"
                    )


def deterministic(m: int, valuations: Sequence[Valuation]) -> Instance:
    """Instance where every bidder's valuation is known."""
    return Instance(m, tuple(BidderDistribution.point(v) for v in valuations))
