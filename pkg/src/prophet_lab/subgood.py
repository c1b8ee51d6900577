"""Numerical certificates for the subgood price inequality.

For a valuation ``v`` and a bundle ``U`` we look for item prices ``p`` on
``U`` and a lottery ``delta`` over subsets ``S ⊆ U`` maximising

    g = min_{T ⊆ U}  p(T) + sum_S delta_S * (v(S \\ T) - p(S)),

so that ``v(U) / g`` is the achieved approximation factor.  Prices are
searched on a uniform grid of ``[0, v(U)]^|U|``; for fixed prices the inner
problem is a finite zero-sum game solved exactly as a linear program.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import CapacityError, MalformedSpecError, ValidationError
from .valuations import Valuation, check_itemset, items_of

MAX_SUBGOOD_ITEMS = 3
DIST_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SubgoodSolution:
    U: int
    prices: np.ndarray  # length m, zero outside U
    subsets: tuple[int, ...]  # every S ⊆ U, as global masks
    delta: np.ndarray  # probability of each entry of ``subsets``
    guarantee: float
    value_U: float

    @property
    def alpha_achieved(self) -> float | None:
        """``v(U) / g``; ``None`` when both are zero, ``inf`` when only ``g`` is."""
        if self.guarantee > 0:
            return self.value_U / self.guarantee
        return None if self.value_U == 0 else float("inf")

    def to_dict(self) -> dict:
        alpha = self.alpha_achieved
        return {
            "U": self.U,
            "prices": self.prices.tolist(),
            "delta": {str(S): float(q) for S, q in zip(self.subsets, self.delta) if q > 0},
            "guarantee": self.guarantee,
            "value_U": self.value_U,
            "alpha_achieved": "undefined" if alpha is None else ("inf" if alpha == float("inf") else alpha),
        }


def _local_subsets(U: int) -> list[int]:
    items = items_of(U)
    out = []
    for bits in range(1 << len(items)):
        S = 0
        for k, j in enumerate(items):
            if bits >> k & 1:
                S |= 1 << j
        out.append(S)
    return out


def payoff_matrix(v: Valuation, subsets: list[int], prices: np.ndarray) -> np.ndarray:
    """``A[S, T] = p(T) + v(S \\ T) - p(S)`` over the given subsets."""
    subs = np.asarray(subsets, dtype=np.int64)
    psum = np.array([prices[list(items_of(int(S)))].sum() for S in subs])
    vdiff = v.table[subs[:, None] & ~subs[None, :]]
    return vdiff - psum[:, None] + psum[None, :]


def maxmin_lottery(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Row mixture maximising the worst column payoff of ``A``.

    Returns the mixture and its exact worst-column value.
    """
    r, c = A.shape
    cost = np.zeros(r + 1)
    cost[-1] = -1.0
    A_ub = np.hstack([-A.T, np.ones((c, 1))])
    A_eq = np.zeros((1, r + 1))
    A_eq[0, :r] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(c), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * r + [(None, None)], method="highs")
    if not res.success:  # pragma: no cover - the LP is always feasible and bounded
        raise RuntimeError(f"max-min LP failed: {res.message}")
    delta = np.clip(res.x[:r], 0.0, None)
    delta = delta / delta.sum()
    return delta, float((delta @ A).min())


def solve_subgood(v: Valuation, U: int, resolution: int = 21) -> SubgoodSolution:
    """Best grid prices and exact inner lottery for the subgood inequality."""
    m = v.m
    U = check_itemset(U, m)
    items = items_of(U)
    if len(items) > MAX_SUBGOOD_ITEMS:
        raise CapacityError(f"|U| = {len(items)} exceeds the subgood cap {MAX_SUBGOOD_ITEMS}")
    if resolution < 2:
        raise ValidationError("resolution must be at least 2")
    subsets = _local_subsets(U)
    vU = float(v.table[U])
    if vU == 0.0:
        delta = np.zeros(len(subsets))
        delta[0] = 1.0
        return SubgoodSolution(U, np.zeros(m), tuple(subsets), delta, 0.0, 0.0)
    grid = np.linspace(0.0, vU, resolution)
    best = None
    for point in itertools.product(grid, repeat=len(items)):
        prices = np.zeros(m)
        prices[list(items)] = point
        delta, g = maxmin_lottery(payoff_matrix(v, subsets, prices))
        if best is None or g > best[2]:
            best = (prices, delta, g)
    prices, delta, g = best
    return SubgoodSolution(U, prices, tuple(subsets), delta, g, vU)


def subgood_lhs(v: Valuation, U: int, prices, subsets, delta) -> dict[int, float]:
    """Left-hand side of the inequality for every ``T ⊆ U``."""
    prices = np.asarray(prices, dtype=float)
    out = {}
    for T in _local_subsets(U):
        total = float(prices[list(items_of(T))].sum())
        for S, q in zip(subsets, delta):
            total += q * (float(v.table[S & ~T]) - float(prices[list(items_of(S))].sum()))
        out[T] = total
    return out


def verify_subgood(sol: SubgoodSolution, v: Valuation, U: int | None = None) -> float:
    """Worst-case slack ``min_T LHS(T) - v(U) / alpha_achieved``."""
    U = sol.U if U is None else check_itemset(U, v.m)
    delta = np.asarray(sol.delta, dtype=float)
    if delta.shape != (len(sol.subsets),):
        raise MalformedSpecError("delta does not match the subset list")
    if np.any(delta < -DIST_TOL) or abs(delta.sum() - 1.0) > DIST_TOL:
        raise MalformedSpecError("delta is not a probability distribution")
    if any(S & ~U for S in sol.subsets):
        raise MalformedSpecError("delta puts mass outside subsets of U")
    alpha = sol.alpha_achieved
    target = float(v.table[U]) / alpha if alpha not in (None, float("inf")) else 0.0
    lhs = subgood_lhs(v, U, sol.prices, sol.subsets, delta)
    return min(lhs.values()) - target
