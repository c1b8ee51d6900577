"""Discretised score generators and the fixed-point constraint system.

Scores live on the grid ``B_eps = {0, eps, 2 eps, ...  <= v_max}^m``.  An IRSG
with grid scores is a stack of probability vectors over ``B_eps``, one block
per (bidder, support valuation).  ``x`` is a fixed point when, against the
law of its own phantom prices ``p'`` (and an independent copy ``p''``), every
block satisfies

    E_f[ v({j : f_j > max(p'_j, p''_j)}) - f(M) ]
        >= max_X  v(X)/3 - E[p'(X)] - eps |X|.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from .errors import CapacityError, ParameterError, PreconditionError, ValidationError, WitnessNotFound
from .rsg import IRSG, PriceLaw, ScoreDistribution, expected_alg_exact, expected_w_values, max_law
from .allocation import optimal_allocation
from .valuations import Instance, Valuation, additive_table, items_of, mask_from_bool, popcounts

GRID_CAP = 4096
RESIDUAL_TOL = 1e-6
WITNESS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ScoreGrid:
    """Per-item admissible scores ``s * eps`` (``s = 0, 1, ...``) up to ``v_max``."""

    eps: float
    v_max: float
    m: int
    values: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        """Number of grid vectors, ``len(values) ** m``."""
        return self.values.size ** self.m

    @cached_property
    def steps(self) -> np.ndarray:
        """``(size, m)`` integer multipliers of every grid vector, last item fastest."""
        k = self.values.size
        out = np.array(list(itertools.product(range(k), repeat=self.m)), dtype=np.int64)
        return out.reshape(-1, self.m)

    @cached_property
    def vectors(self) -> np.ndarray:
        return self.values[self.steps]

    def index_of(self, steps: np.ndarray) -> np.ndarray:
        k = self.values.size
        radix = k ** np.arange(self.m - 1, -1, -1, dtype=np.int64)
        return np.asarray(steps, dtype=np.int64) @ radix

    def locate(self, vec) -> int:
        """Index of a grid vector given its coordinates."""
        vec = np.asarray(vec, dtype=float)
        steps = np.rint(vec / self.eps).astype(np.int64) if self.eps > 0 else np.zeros(self.m, int)
        if np.any(steps < 0) or np.any(steps >= self.values.size) or not np.allclose(
            self.values[steps], vec, rtol=0, atol=1e-9 * max(self.eps, 1.0)
        ):
            raise ValidationError(f"{vec} is not a grid vector")
        return int(self.index_of(steps))

    @cached_property
    def max_index(self) -> np.ndarray:
        """``(size, size)`` index of the item-wise maximum of two grid vectors."""
        st = self.steps
        return self.index_of(np.maximum(st[:, None, :], st[None, :, :]))

    @cached_property
    def beats(self) -> np.ndarray:
        """``beats[f, P]``: mask of items where grid vector ``f`` strictly exceeds ``P``."""
        st = self.steps
        return mask_from_bool(st[:, None, :] > st[None, :, :])


def build_grid(v_max: float, eps: float, m: int) -> ScoreGrid:
    if not eps > 0 or not math.isfinite(eps):
        raise ParameterError(f"eps must be positive, got {eps}")
    if v_max < 0 or not math.isfinite(v_max):
        raise ParameterError(f"v_max must be finite and >= 0, got {v_max}")
    if m < 1:
        raise ParameterError("m must be >= 1")
    # 1e-9 absorbs representation error in v_max / eps (0.3 / 0.1 -> 2.9999999999999996)
    top = int(math.floor(v_max / eps + 1e-9))
    values = np.arange(top + 1) * eps
    if values.size**m > GRID_CAP:
        raise CapacityError(f"grid with {values.size}^{m} vectors exceeds the cap {GRID_CAP}")
    values.setflags(write=False)
    return ScoreGrid(float(eps), float(v_max), int(m), values)


# ---------------------------------------------------------------------------
# flattened IRSG space
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IRSGVector:
    """Grid IRSG as a ``(blocks, grid.size)`` row-stochastic matrix.

    Blocks are ordered by bidder, then by support valuation.
    """

    grid: ScoreGrid
    sizes: tuple[int, ...]
    blocks: np.ndarray

    def __post_init__(self):
        b = np.array(self.blocks, dtype=float)
        if b.shape != (sum(self.sizes), self.grid.size):
            raise ValidationError(f"blocks have shape {b.shape}, expected {(sum(self.sizes), self.grid.size)}")
        if np.any(b < -1e-12) or np.any(np.abs(b.sum(axis=1) - 1.0) > 1e-9):
            raise ValidationError("every block must be a probability vector")
        b = np.clip(b, 0.0, 1.0)
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @classmethod
    def point(cls, inst: Instance, grid: ScoreGrid, index: int = 0) -> "IRSGVector":
        blocks = np.zeros((sum(d.size for d in inst.bidders), grid.size))
        blocks[:, index] = 1.0
        return cls(grid, tuple(d.size for d in inst.bidders), blocks)

    @classmethod
    def zero(cls, inst: Instance, grid: ScoreGrid) -> "IRSGVector":
        return cls.point(inst, grid, 0)

    @classmethod
    def uniform(cls, inst: Instance, grid: ScoreGrid) -> "IRSGVector":
        blocks = np.full((sum(d.size for d in inst.bidders), grid.size), 1.0 / grid.size)
        return cls(grid, tuple(d.size for d in inst.bidders), blocks)

    @property
    def flat(self) -> np.ndarray:
        """Coordinates in ``[0, 1]^l``, ``l = grid.size * sum_i |V_i|``."""
        return self.blocks.reshape(-1)

    def block_keys(self) -> list[tuple[int, int]]:
        return [(i, k) for i, s in enumerate(self.sizes) for k in range(s)]

    def block(self, i: int, k: int) -> np.ndarray:
        return self.blocks[sum(self.sizes[:i]) + k]

    def check_aligned(self, inst: Instance) -> None:
        if self.sizes != tuple(d.size for d in inst.bidders) or self.grid.m != inst.m:
            raise ValidationError("IRSG vector does not match the instance's supports")

    def to_irsg(self) -> IRSG:
        gens = []
        for i, s in enumerate(self.sizes):
            rsg = []
            for k in range(s):
                row = self.block(i, k)
                keep = np.nonzero(row > 0)[0]
                rsg.append(ScoreDistribution(row[keep], self.grid.vectors[keep]))
            gens.append(tuple(rsg))
        return IRSG(tuple(gens))

    def to_dict(self) -> dict:
        return {
            "eps": self.grid.eps,
            "v_max": self.grid.v_max,
            "grid_values": self.grid.values.tolist(),
            "bidders": [
                {"rsg": [
                    {"probs": self.block(i, k)[self.block(i, k) > 0].tolist(),
                     "scores": self.grid.vectors[self.block(i, k) > 0].tolist()}
                    for k in range(s)
                ]}
                for i, s in enumerate(self.sizes)
            ],
        }


def _combine(grid: ScoreGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.size)
    np.add.at(out, grid.max_index.reshape(-1), np.outer(a, b).reshape(-1))
    return out


def bidder_mixture(x: IRSGVector, inst: Instance, i: int) -> np.ndarray:
    """Unconditional law of bidder ``i``'s score over the grid."""
    start = sum(x.sizes[:i])
    return inst.bidders[i].probs @ x.blocks[start:start + x.sizes[i]]


def price_marginal(x: IRSGVector, inst: Instance) -> np.ndarray:
    """Law of ``p'_j = max_i b'_{i,j}`` over grid vectors (indexed like ``grid.vectors``)."""
    x.check_aligned(inst)
    law = bidder_mixture(x, inst, 0)
    for i in range(1, inst.n):
        law = _combine(x.grid, law, bidder_mixture(x, inst, i))
    return law


class PhiTerms(NamedTuple):
    """Per-block pieces of the fixed-point constraint."""

    gains: np.ndarray  # (blocks, grid.size): LHS of each pure score vector f
    lhs: np.ndarray  # (blocks,): expected LHS under the block's own law
    rhs: np.ndarray  # (blocks,): max_X v(X)/3 - E[p'(X)] - eps|X|
    expected_price: np.ndarray  # (m,): E[p'_j]


def score_gains(v: Valuation, grid: ScoreGrid, both_law: np.ndarray) -> np.ndarray:
    """``E[v({f > max(p', p'')})] - f(M)`` for every grid vector ``f``."""
    won = v.table[grid.beats] @ both_law
    return won - grid.vectors.sum(axis=1)


def helper_rhs(v: Valuation, expected_price: np.ndarray, eps: float) -> float:
    """``max_X v(X)/3 - E[p'(X)] - eps |X|`` by full enumeration of ``X``."""
    m = v.m
    vals = v.table / 3.0 - additive_table(expected_price) - eps * popcounts(m)
    return float(vals.max())


def phi_terms(x: IRSGVector, inst: Instance, eps: float | None = None,
              y: IRSGVector | None = None) -> PhiTerms:
    eps = x.grid.eps if eps is None else eps
    y = x if y is None else y
    law = price_marginal(x, inst)
    both = _combine(x.grid, law, law)
    ep = law @ x.grid.vectors
    gains, lhs, rhs = [], [], []
    for row, (i, k) in enumerate(y.block_keys()):
        v = inst.bidders[i].valuations[k]
        gn = score_gains(v, x.grid, both)
        gains.append(gn)
        lhs.append(float(y.blocks[row] @ gn))
        rhs.append(helper_rhs(v, ep, eps))
    return PhiTerms(np.array(gains), np.array(lhs), np.array(rhs), ep)


def phi_residual(x: IRSGVector, inst: Instance, eps: float | None = None,
                 y: IRSGVector | None = None) -> float:
    """``max`` over blocks of RHS - LHS; ``<= 0`` means ``y`` lies in ``Phi(x)``."""
    t = phi_terms(x, inst, eps, y)
    return float((t.rhs - t.lhs).max())


# ---------------------------------------------------------------------------
# single-valuation witness
# ---------------------------------------------------------------------------


def construct_fhat(X: int, p3, eps: float, v_max: float) -> np.ndarray:
    """Randomised witness vector for one draw ``p3`` of the phantom price.

    ``f_j = (floor(p3_j / eps) + 1) * eps`` on ``X`` and 0 elsewhere; if any
    entry would exceed ``v_max`` the zero vector is returned instead.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    p3 = np.asarray(p3, dtype=float)
    m = p3.size
    f = np.zeros(m)
    for j in range(m):
        if X >> j & 1:
            f[j] = (math.floor(p3[j] / eps + 1e-9) + 1) * eps
    if np.any(f > v_max + 1e-12):
        return np.zeros(m)
    return f


class Witness(NamedTuple):
    f: np.ndarray
    slack: float


def helper1_witness(v: Valuation, law: PriceLaw, eps: float, v_max: float | None = None,
                    tol: float = WITNESS_TOL) -> Witness:
    """Exhaustively find a grid vector ``f`` meeting the single-valuation inequality.

    ``law`` is the distribution of ``p'``; ``p''`` is an independent copy.
    Returns the grid vector with the largest slack (first in grid order on
    ties) and raises :class:`WitnessNotFound` when even that one fails.
    """
    v_max = v.grand() if v_max is None else v_max
    grid = build_grid(v_max, eps, v.m)
    both = max_law(law, law)
    won = mask_from_bool(grid.vectors[:, None, :] > both.vectors[None, :, :])
    gains = v.table[won] @ both.probs - grid.vectors.sum(axis=1)
    ep = law.probs @ law.vectors
    rhs = helper_rhs(v, ep, eps)
    k = int(np.argmax(gains))
    slack = float(gains[k] - rhs)
    if slack < -tol:
        raise WitnessNotFound(f"no f in B_eps satisfies the inequality (best slack {slack:.3e})")
    return Witness(grid.vectors[k].copy(), slack)


# ---------------------------------------------------------------------------
# fixed-point search
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    x: IRSGVector
    residual: float
    iterations: int
    converged: bool
    log: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "residual": self.residual,
            "iterations": self.iterations,
            "residual_log": list(self.log),
            "irsg": self.x.to_dict(),
        }


def best_response(x: IRSGVector, inst: Instance, eps: float | None = None) -> IRSGVector:
    """Every block put on its highest-gain grid vector against the law of ``x``."""
    terms = phi_terms(x, inst, eps)
    blocks = np.zeros_like(x.blocks)
    blocks[np.arange(len(blocks)), np.argmax(terms.gains, axis=1)] = 1.0
    return IRSGVector(x.grid, x.sizes, blocks)


def find_fixed_point(inst: Instance, eps: float, max_iters: int = 10_000,
                     tolerance: float = RESIDUAL_TOL, init="zero") -> FixedPointResult:
    """Fictitious-play search for ``x`` with ``phi_residual(x) <= tolerance``.

    Each round every violated block moves toward its best pure response (the
    grid vector with the largest gain against the current price law) with
    step ``1 / (round + 2)``, or further if that is what the constraint
    needs against the current law; satisfied blocks are left unchanged.
    ``init`` is ``"zero"``, ``"uniform"``, ``"response"`` (best response to
    the zero IRSG) or an :class:`IRSGVector`.  Non-convergence is reported,
    not raised.
    """
    if max_iters < 1:
        raise ParameterError("max_iters must be >= 1")
    grid = build_grid(inst.v_max, eps, inst.m)
    if isinstance(init, IRSGVector):
        x = init
        x.check_aligned(inst)
    elif init == "zero":
        x = IRSGVector.zero(inst, grid)
    elif init == "uniform":
        x = IRSGVector.uniform(inst, grid)
    elif init == "response":
        x = best_response(IRSGVector.zero(inst, grid), inst, eps)
    else:
        raise ParameterError(f"unknown init {init!r}")
    best_x, best_r = x, math.inf
    log = []
    for t in range(max_iters):
        terms = phi_terms(x, inst, eps)
        r = float((terms.rhs - terms.lhs).max())
        log.append(r)
        if r < best_r:
            best_x, best_r = x, r
        if r <= tolerance:
            return FixedPointResult(x, r, t + 1, True, tuple(log))
        rows = np.arange(len(x.blocks))
        best = np.argmax(terms.gains, axis=1)
        target = np.zeros_like(x.blocks)
        target[rows, best] = 1.0
        # violated blocks move just far enough toward the best response to
        # satisfy the constraint against the current law; the rest stay put
        short = terms.rhs - terms.lhs
        room = terms.gains[rows, best] - terms.lhs
        need = np.divide(short + 0.5 * tolerance, room, out=np.ones_like(room), where=room > 0)
        step = np.where(short > tolerance, np.clip(np.maximum(need, 1.0 / (t + 2)), 0.0, 1.0), 0.0)
        blocks = x.blocks + step[:, None] * (target - x.blocks)
        blocks = blocks / blocks.sum(axis=1, keepdims=True)
        x = IRSGVector(grid, x.sizes, blocks)
    return FixedPointResult(best_x, best_r, max_iters, False, tuple(log))


SEARCH_VAR_CAP = 256


def best_fixed_point(inst: Instance, eps: float, starts: int = 8, seed: int = 0,
                     tolerance: float = RESIDUAL_TOL) -> FixedPointResult:
    """Fixed point with the largest exact ``E[ALG]`` found by a multistart search.

    The zero IRSG is a fixed point whenever every right-hand side is
    non-positive, so plain dynamics often stop there.  This searcher maximises
    ``E[ALG]`` under the block constraints with SLSQP from ``starts`` random
    mixed IRSGs and keeps the best point whose residual is within
    ``tolerance``.  :func:`find_fixed_point` from the zero IRSG is the
    fallback, so a result is always returned.
    """
    if starts < 0:
        raise ParameterError("starts must be >= 0")
    base = find_fixed_point(inst, eps, tolerance=tolerance)
    grid = base.x.grid
    shape = base.x.blocks.shape
    if shape[0] * shape[1] > SEARCH_VAR_CAP:
        raise CapacityError(f"{shape[0] * shape[1]} search variables exceeds the cap {SEARCH_VAR_CAP}")

    def as_x(w: np.ndarray) -> IRSGVector:
        b = np.clip(w.reshape(shape), 0.0, None) + 1e-300
        return IRSGVector(grid, base.x.sizes, b / b.sum(axis=1, keepdims=True))

    def objective(w):
        return -expected_alg_exact(inst, as_x(w).to_irsg())

    def slack(w):
        t = phi_terms(as_x(w), inst, eps)
        return t.lhs - t.rhs

    def simplex(w):
        return w.reshape(shape).sum(axis=1) - 1.0

    best = base
    best_alg = expected_alg_exact(inst, base.x.to_irsg()) if base.converged else -math.inf
    rng = np.random.default_rng(seed)
    log = list(base.log)
    for _ in range(starts):
        w0 = rng.dirichlet(np.ones(shape[1]), size=shape[0]).ravel()
        res = minimize(objective, w0, method="SLSQP", bounds=[(0.0, 1.0)] * w0.size,
                       constraints=[{"type": "ineq", "fun": slack}, {"type": "eq", "fun": simplex}])
        x = as_x(res.x)
        r = phi_residual(x, inst, eps)
        log.append(r)
        if r <= tolerance:
            a = expected_alg_exact(inst, x.to_irsg())
            if a > best_alg:
                best, best_alg = FixedPointResult(x, r, int(res.nit), True, ()), a
    return FixedPointResult(best.x, best.residual, best.iterations, best.converged, tuple(log))


# ---------------------------------------------------------------------------
# constant-factor certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    epsilon: float
    delta: float
    residual: float
    e_alg: float
    e_opt: float
    delta_bound: float  # largest slack the proof allows: eps E[OPT] / (6 (6 + eps) m)
    delta_consistent: bool
    bound_ok: bool  # (6 + eps) E[ALG] >= E[OPT] - 1e-6
    chain: dict

    @property
    def ratio(self) -> float | None:
        if self.e_alg > 0:
            return self.e_opt / self.e_alg
        return None if self.e_opt == 0 else math.inf


def proof_chain(inst: Instance, x: IRSGVector, delta: float) -> dict:
    """Every quantity in the inequality chain from the mirror bound to ``E[OPT]/6``.

    All expectations are exact enumerations.  Keys ending in ``_ok`` are the
    individual steps; ``final_ok`` is ``E[ALG] >= E[OPT]/6 - delta m``.
    """
    g = x.to_irsg()
    law_vec = price_marginal(x, inst)
    keep = law_vec > 0
    law = PriceLaw(x.grid.vectors[keep], law_vec[keep])
    e_alg = expected_alg_exact(inst, g, law=law)
    ew = expected_w_values(inst, g, law=law)
    terms = phi_terms(x, inst, delta)
    ep = terms.expected_price
    block_lhs = terms.lhs  # E[v_i(W_i) - b_i(M) | v_i = v]
    keys = x.block_keys()
    e_gain = np.zeros(inst.n)
    e_bid = np.zeros(inst.n)
    for row, (i, k) in enumerate(keys):
        q = inst.bidders[i].probs[k]
        e_gain[i] += q * block_lhs[row]
        e_bid[i] += q * float(x.blocks[row] @ x.grid.vectors.sum(axis=1))
    # helper inequality evaluated at X = OPT_i(v), profile by profile
    e_opt = 0.0
    e_at_opt = 0.0
    worst_block_slack = math.inf
    row_of = {key: r for r, key in enumerate(keys)}
    for prob, idx, vals in inst.profiles():
        alloc, value = optimal_allocation(vals)
        e_opt += prob * value
        for i, (k, U) in enumerate(zip(idx, alloc)):
            at_opt = vals[i].table[U] / 3.0 - float(ep[list(items_of(U))].sum()) - delta * bin(U).count("1")
            e_at_opt += prob * at_opt
            worst_block_slack = min(worst_block_slack, block_lhs[row_of[(i, k)]] - at_opt)
    m = inst.m
    mirror_rhs = 0.5 * float(ew.sum())
    tol = 1e-9
    return {
        "e_alg": float(e_alg),
        "mirror_rhs": mirror_rhs,
        "mirror_ok": bool(e_alg >= mirror_rhs - tol),
        "sum_e_gain": float(e_gain.sum()),
        "sum_e_bid": float(e_bid.sum()),
        "split_ok": bool(abs(mirror_rhs - 0.5 * float(e_gain.sum() + e_bid.sum())) <= tol),
        "helper_at_opt": float(e_at_opt),
        "worst_block_slack_at_opt": float(worst_block_slack),
        "helper_ok": bool(worst_block_slack >= -RESIDUAL_TOL),
        "e_price_total": float(ep.sum()),
        "price_ok": bool(float(e_bid.sum()) >= float(ep.sum()) - tol),
        "e_opt": float(e_opt),
        "final_lower_bound": float(e_opt / 6.0 - delta * m),
        "final_ok": bool(e_alg >= e_opt / 6.0 - delta * m - tol),
    }


def delta_bound(epsilon: float, e_opt: float, m: int) -> float:
    """Largest internal slack for which the (6 + eps) conclusion follows."""
    return epsilon * e_opt / (6.0 * (6.0 + epsilon) * m)


def verify_constant_bound(inst: Instance, x: IRSGVector, epsilon: float, delta: float | None = None,
                          tolerance: float = RESIDUAL_TOL) -> BoundReport:
    """Exact ``E[ALG]`` and ``E[OPT]`` for a fixed-point IRSG, plus the slack audit.

    ``delta`` is the slack at which ``x`` solves the fixed-point system
    (defaults to the grid step).  ``delta_consistent`` records whether it is
    small enough for the proof to imply ``(6 + epsilon) E[ALG] >= E[OPT]``.
    """
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    x.check_aligned(inst)
    delta = x.grid.eps if delta is None else delta
    residual = phi_residual(x, inst, delta)
    if residual > tolerance:
        raise PreconditionError(f"phi residual {residual:.3e} exceeds tolerance {tolerance:.1e}")
    chain = proof_chain(inst, x, delta)
    e_alg, e_opt = chain["e_alg"], chain["e_opt"]
    bound = delta_bound(epsilon, e_opt, inst.m)
    return BoundReport(
        epsilon=epsilon,
        delta=delta,
        residual=residual,
        e_alg=e_alg,
        e_opt=e_opt,
        delta_bound=bound,
        delta_consistent=delta <= bound,
        bound_ok=(6.0 + epsilon) * e_alg >= e_opt - 1e-6,
        chain=chain,
    )
