"""Lottery-and-price guarantees for a bundle, solved as a max-min game."""
# %%
from prophet_lab import Additive, SqrtAdditive, solve_subgood, verify_subgood

# %% One unit-valued item: the best guarantee is 1/4, at price 1/2 and a fair coin.
sol = solve_subgood(Additive((1.0,)), 0b1)
print(f"g = {sol.guarantee:.4f}, prices = {sol.prices}, lottery = {dict(zip(sol.subsets, sol.delta.round(3).tolist()))}")
print("min slack:", verify_subgood(sol, Additive((1.0,))))

# %% Two items under a concave valuation.
v = SqrtAdditive((1.0, 2.0))
sol = solve_subgood(v, 0b11, resolution=11)
print(f"g = {sol.guarantee:.4f} of v(U) = {sol.value_U:.4f}, alpha = {sol.alpha_achieved:.2f}")
