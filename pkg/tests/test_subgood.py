import numpy as np
import pytest

from conftest import random_valuation
from prophet_lab.errors import CapacityError, MalformedSpecError
from prophet_lab.subgood import (
    SubgoodSolution,
    maxmin_lottery,
    payoff_matrix,
    solve_subgood,
    subgood_lhs,
    verify_subgood,
)
from prophet_lab.valuations import Additive, SqrtAdditive, full_set


def fine_grid_single_item(steps=401):
    """Oracle for m = 1, v = 1: lottery ``lam`` on {item}, ``1 - lam`` on the empty set.

    T = ∅ gives lam (1 - p); T = {item} gives p (1 - lam).
    """
    grid = np.linspace(0.0, 1.0, steps)
    p, lam = np.meshgrid(grid, grid, indexing="ij")
    g = np.minimum(lam * (1 - p), p * (1 - lam))
    k = np.unravel_index(np.argmax(g), g.shape)
    return g[k], grid[k[0]], grid[k[1]]


class TestSingleItem:
    def test_matches_fine_grid(self):
        g_ref, p_ref, lam_ref = fine_grid_single_item()
        sol = solve_subgood(Additive((1.0,)), 0b1)
        assert g_ref == pytest.approx(0.25)
        assert sol.guarantee == pytest.approx(g_ref, abs=0.01)
        assert sol.prices[0] == pytest.approx(p_ref, abs=0.05)
        delta = dict(zip(sol.subsets, sol.delta))
        assert delta[0b1] == pytest.approx(lam_ref, abs=0.05)
        assert sol.alpha_achieved == pytest.approx(4.0, abs=0.2)
        assert verify_subgood(sol, Additive((1.0,))) >= -1e-9

    def test_zero_valuation(self):
        sol = solve_subgood(Additive((0.0,)), 0b1)
        assert sol.guarantee == 0.0 and sol.alpha_achieved is None
        assert sol.to_dict()["alpha_achieved"] == "undefined"


class TestLottery:
    def test_matching_pennies(self):
        A = np.array([[1.0, -1.0], [-1.0, 1.0]])
        delta, value = maxmin_lottery(A)
        assert delta == pytest.approx([0.5, 0.5])
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_payoff_entries(self):
        v = Additive((1.0, 2.0))
        A = payoff_matrix(v, [0, 1, 2, 3], np.array([0.5, 0.5]))
        # S = {0, 1}, T = {0}: p(T) + v({1}) - p(S) = 0.5 + 2 - 1
        assert A[3, 1] == pytest.approx(1.5)


class TestVerify:
    def test_random_solutions_verify(self):
        rng = np.random.default_rng(51)
        for _ in range(12):
            m = int(rng.integers(1, 4))
            v = random_valuation(rng, m)
            U = int(rng.integers(1, 1 << m))
            sol = solve_subgood(v, U, resolution=7)
            assert verify_subgood(sol, v) >= -1e-9
            lhs = subgood_lhs(v, U, sol.prices, sol.subsets, sol.delta)
            assert min(lhs.values()) == pytest.approx(sol.guarantee, abs=1e-9)

    def test_bad_lottery_rejected(self):
        sol = solve_subgood(Additive((1.0,)), 0b1, resolution=5)
        bad = SubgoodSolution(sol.U, sol.prices, sol.subsets, np.array([0.7, 0.7]), sol.guarantee, sol.value_U)
        with pytest.raises(MalformedSpecError):
            verify_subgood(bad, Additive((1.0,)))

    def test_mass_outside_bundle_rejected(self):
        sol = solve_subgood(Additive((1.0, 1.0)), 0b01, resolution=5)
        bad = SubgoodSolution(sol.U, sol.prices, (0, 0b10), sol.delta, sol.guarantee, sol.value_U)
        with pytest.raises(MalformedSpecError):
            verify_subgood(bad, Additive((1.0, 1.0)))

    def test_capacity(self):
        with pytest.raises(CapacityError):
            solve_subgood(SqrtAdditive((1.0,) * 4), full_set(4))
