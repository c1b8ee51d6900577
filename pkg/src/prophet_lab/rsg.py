"""Random score generators and the phantom-threshold allocation algorithm.

A score generator maps each support valuation of a bidder to a finite
distribution over per-item score vectors.  The algorithm samples a phantom
profile up front, uses the item-wise maximum phantom score ``p'`` as a
threshold, and awards each arriving bidder the still-available items whose
fresh score strictly beats the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AlignmentError, CapacityError, MalformedSpecError, ParameterError
from .mechanisms import MechanismTrace, check_order
from .stats import RunningStats
from .valuations import Instance, PROB_TOL, full_set, mask_from_bool, sample_valuation

ENUM_CAP = 10**6


@dataclass(frozen=True, eq=False)
class ScoreDistribution:
    """Finite distribution over score vectors: ``probs[k]`` on row ``scores[k]``."""

    probs: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float).reshape(-1)
        scores = np.array(self.scores, dtype=float)
        if scores.ndim != 2 or scores.shape[0] != probs.size or probs.size == 0:
            raise MalformedSpecError("score distribution needs one score row per probability")
        if np.any(probs < 0) or abs(math.fsum(probs.tolist()) - 1.0) > PROB_TOL + np.finfo(float).eps:
            raise MalformedSpecError(f"score probabilities must be >= 0 and sum to 1, got {probs}")
        if not np.all(np.isfinite(scores)) or np.any(scores < 0):
            raise MalformedSpecError("scores must be finite and non-negative")
        probs = probs / probs.sum()
        probs.setflags(write=False)
        scores.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def point(cls, b) -> "ScoreDistribution":
        return cls(np.ones(1), np.asarray(b, dtype=float)[None, :])

    @property
    def m(self) -> int:
        return self.scores.shape[1]

    def sample(self, rng: np.random.Generator) -> int:
        u = rng.random()
        return min(int(np.searchsorted(np.cumsum(self.probs), u, side="right")), self.probs.size - 1)


RSG = tuple  # tuple[ScoreDistribution, ...], one per support valuation


@dataclass(frozen=True, eq=False)
class IRSG:
    """One score generator per bidder, aligned with an instance's supports."""

    generators: tuple[tuple[ScoreDistribution, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(tuple(r) for r in self.generators))

    def check_aligned(self, inst: Instance) -> None:
        if len(self.generators) != inst.n:
            raise AlignmentError(f"IRSG has {len(self.generators)} bidders, instance has {inst.n}")
        for i, (rsg, d) in enumerate(zip(self.generators, inst.bidders)):
            if len(rsg) != d.size:
                raise AlignmentError(f"bidder {i}: {len(rsg)} score distributions for {d.size} valuations")
            for k, sd in enumerate(rsg):
                if sd.m != inst.m:
                    raise AlignmentError(f"bidder {i}, valuation {k}: scores have {sd.m} items, need {inst.m}")

    @classmethod
    def constant(cls, inst: Instance, b) -> "IRSG":
        """Every bidder and valuation draws the same fixed score vector."""
        sd = ScoreDistribution.point(np.broadcast_to(np.asarray(b, dtype=float), (inst.m,)))
        return cls(tuple(tuple(sd for _ in range(d.size)) for d in inst.bidders))

    @classmethod
    def zero(cls, inst: Instance) -> "IRSG":
        return cls.constant(inst, 0.0)

    def scaled(self, c: float) -> "IRSG":
        return IRSG(tuple(tuple(ScoreDistribution(sd.probs, sd.scores * c) for sd in rsg)
                          for rsg in self.generators))


class BidderOutcomes(NamedTuple):
    """Joint law of ``(valuation index, score vector)`` for one bidder."""

    vidx: np.ndarray
    scores: np.ndarray
    probs: np.ndarray


def bidder_outcomes(inst: Instance, g: IRSG, i: int) -> BidderOutcomes:
    d = inst.bidders[i]
    vidx, scores, probs = [], [], []
    for k, sd in enumerate(g.generators[i]):
        for q, b in zip(sd.probs, sd.scores):
            if q > 0:
                vidx.append(k)
                scores.append(b)
                probs.append(d.probs[k] * q)
    return BidderOutcomes(np.array(vidx), np.array(scores), np.array(probs))


class PriceLaw(NamedTuple):
    """Finite law of a random price vector: ``probs[k]`` on row ``vectors[k]``."""

    vectors: np.ndarray
    probs: np.ndarray


def _law_from_dict(law: dict) -> PriceLaw:
    keys = sorted(law)
    return PriceLaw(np.array(keys, dtype=float), np.array([law[k] for k in keys]))


def max_law(a: PriceLaw, b: PriceLaw) -> PriceLaw:
    """Law of the item-wise maximum of two independent price vectors."""
    out: dict = {}
    for va, qa in zip(a.vectors, a.probs):
        for vb, qb in zip(b.vectors, b.probs):
            key = tuple(np.maximum(va, vb).tolist())
            out[key] = out.get(key, 0.0) + qa * qb
    return _law_from_dict(out)


def price_law(inst: Instance, g: IRSG) -> PriceLaw:
    """Law of ``p'_j = max_i b'_{i,j}`` for an independent phantom profile."""
    g.check_aligned(inst)
    law = None
    for i in range(inst.n):
        o = bidder_outcomes(inst, g, i)
        own: dict = {}
        for b, q in zip(o.scores, o.probs):
            key = tuple(b.tolist())
            own[key] = own.get(key, 0.0) + q
        own_law = _law_from_dict(own)
        law = own_law if law is None else max_law(law, own_law)
    return law


def _sample_outcome(o: BidderOutcomes, rng: np.random.Generator, size=None):
    u = rng.random(size)
    k = np.searchsorted(np.cumsum(o.probs), u, side="right")
    return np.minimum(k, o.probs.size - 1)


def run_correa_cristi(inst: Instance, g: IRSG, rng: np.random.Generator | None = None,
                      order=None) -> MechanismTrace:
    """One run of the phantom-threshold algorithm.

    The phantom valuations and scores are drawn first (bidders in index
    order), then each arriving bidder reveals a valuation and a fresh score
    and receives ``R_i ∩ {j : b_{i,j} > p'_j}``.
    """
    g.check_aligned(inst)
    rng = np.random.default_rng() if rng is None else rng
    order = check_order(order, inst.n)
    m = inst.m
    thresholds = np.zeros(m)
    phantom = []
    for i, d in enumerate(inst.bidders):
        k, _ = sample_valuation(d, rng)
        sd = g.generators[i][k]
        thresholds = np.maximum(thresholds, sd.scores[sd.sample(rng)])
        phantom.append(k)
    remaining = full_set(m)
    idx = [0] * inst.n
    bundles = [0] * inst.n
    values = [0.0] * inst.n
    for i in order:
        k, v = sample_valuation(inst.bidders[i], rng)
        sd = g.generators[i][k]
        b = sd.scores[sd.sample(rng)]
        S = int(mask_from_bool(b > thresholds))
        x = remaining & S
        remaining &= ~x
        idx[i], bundles[i], values[i] = k, x, float(v.table[x])
    zeros = (0.0,) * inst.n
    return MechanismTrace(order, tuple(idx), tuple(bundles), tuple(values), zeros, tuple(values),
                          tuple(thresholds.tolist()), tuple(phantom))


class MirrorSides(NamedTuple):
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs >= self.rhs - 1e-9


def expected_alg_exact(inst: Instance, g: IRSG, order=None, law: PriceLaw | None = None) -> float:
    """Exact ``E[welfare]`` of the phantom-threshold algorithm."""
    g.check_aligned(inst)
    order = check_order(order, inst.n)
    law = price_law(inst, g) if law is None else law
    outs = [bidder_outcomes(inst, g, i) for i in range(inst.n)]
    n_real = math.prod(o.probs.size for o in outs)
    if n_real * law.probs.size > ENUM_CAP:
        raise CapacityError(f"{n_real * law.probs.size} enumeration terms exceeds the cap {ENUM_CAP}")
    grids = np.meshgrid(*[np.arange(o.probs.size) for o in outs], indexing="ij")
    picks = [gr.reshape(-1) for gr in grids]
    weight = np.ones(n_real)
    for o, pk in zip(outs, picks):
        weight = weight * o.probs[pk]
    tables = [inst.bidders[i].tables for i in range(inst.n)]
    total = 0.0
    for p_vec, p_prob in zip(law.vectors, law.probs):
        remaining = np.full(n_real, full_set(inst.m), dtype=np.int64)
        wel = np.zeros(n_real)
        for i in order:
            o, pk = outs[i], picks[i]
            S = mask_from_bool(o.scores[pk] > p_vec)
            x = remaining & S
            remaining &= ~x
            wel = wel + tables[i][o.vidx[pk], x]
        total += float(p_prob) * float(weight @ wel)
    return total


def expected_w_values(inst: Instance, g: IRSG, law: PriceLaw | None = None) -> np.ndarray:
    """``E[v_i(W_i)]`` per bidder, ``W_i = {j : b_{i,j} > max(p'_j, p''_j)}``."""
    law = price_law(inst, g) if law is None else law
    both = max_law(law, law)
    out = np.zeros(inst.n)
    for i in range(inst.n):
        o = bidder_outcomes(inst, g, i)
        if o.probs.size * both.probs.size > ENUM_CAP:
            raise CapacityError("W-set enumeration exceeds the cap")
        tables = inst.bidders[i].tables
        W = mask_from_bool(o.scores[:, None, :] > both.vectors[None, :, :])
        vals = tables[o.vidx[:, None], W]
        out[i] = float(o.probs @ vals @ both.probs)
    return out


def mirror_sides_exact(inst: Instance, g: IRSG, order=None) -> MirrorSides:
    """Both sides of the mirror inequality ``E[ALG] >= 1/2 sum_i E[v_i(W_i)]``, exactly."""
    g.check_aligned(inst)
    law = price_law(inst, g)
    lhs = expected_alg_exact(inst, g, order, law)
    rhs = 0.5 * float(expected_w_values(inst, g, law).sum())
    return MirrorSides(lhs, rhs)


class MirrorEstimate(NamedTuple):
    lhs: float
    lhs_half_width: float
    rhs: float
    rhs_half_width: float
    samples: int


def mirror_samples(inst: Instance, g: IRSG, samples: int, rng: np.random.Generator,
                   order=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample ALG welfare and ``1/2 sum_i v_i(W_i)`` for i.i.d. draws.

    Draw order per call: real outcomes, then ``p'`` outcomes, then ``p''``
    outcomes, each bidder by bidder.
    """
    g.check_aligned(inst)
    order = check_order(order, inst.n)
    outs = [bidder_outcomes(inst, g, i) for i in range(inst.n)]
    real = [_sample_outcome(o, rng, samples) for o in outs]
    p1 = np.zeros((samples, inst.m))
    for o in outs:
        p1 = np.maximum(p1, o.scores[_sample_outcome(o, rng, samples)])
    p2 = np.zeros((samples, inst.m))
    for o in outs:
        p2 = np.maximum(p2, o.scores[_sample_outcome(o, rng, samples)])
    both = np.maximum(p1, p2)
    remaining = np.full(samples, full_set(inst.m), dtype=np.int64)
    alg = np.zeros(samples)
    for i in order:
        o, k = outs[i], real[i]
        x = remaining & mask_from_bool(o.scores[k] > p1)
        remaining &= ~x
        alg = alg + inst.bidders[i].tables[o.vidx[k], x]
    wsum = np.zeros(samples)
    for i in range(inst.n):
        o, k = outs[i], real[i]
        wsum = wsum + inst.bidders[i].tables[o.vidx[k], mask_from_bool(o.scores[k] > both)]
    return alg, 0.5 * wsum


def mirror_sides_mc(inst: Instance, g: IRSG, samples: int, rng: np.random.Generator,
                    order=None) -> MirrorEstimate:
    """Monte Carlo estimates of both mirror sides with 95% half-widths."""
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    alg, w = mirror_samples(inst, g, samples, rng, order)
    a, b = RunningStats.of(alg), RunningStats.of(w)
    return MirrorEstimate(a.mean, a.half_width, b.mean, b.half_width, samples)


def random_irsg(inst: Instance, rng: np.random.Generator, support: int = 2,
                values: Sequence[float] | None = None) -> IRSG:
    """Random aligned IRSG; scores drawn from ``values`` (a small grid) when given."""
    gens = []
    for d in inst.bidders:
        rsg = []
        for _ in range(d.size):
            k = int(rng.integers(1, support + 1))
            probs = rng.dirichlet(np.ones(k))
            if values is None:
                scores = rng.uniform(0, max(inst.v_max, 1e-9), size=(k, inst.m))
            else:
                scores = rng.choice(np.asarray(values, dtype=float), size=(k, inst.m))
            rsg.append(ScoreDistribution(probs, scores))
        gens.append(tuple(rsg))
    return IRSG(tuple(gens))
