"""Balanced prices for XOS bidders: supporting clauses and the half-OPT guarantee."""
# %%
from itertools import permutations

from prophet_lab import (
    BidderDistribution,
    Instance,
    Xos,
    balanced_prices_xos,
    check_balanced,
    expected_opt,
    expected_welfare_exact,
    optimal_allocation,
    supporting_clause_prices,
)

# %% Two items.  Bidder 0 is one of two XOS types; bidder 1 is fixed.
inst = Instance(2, (
    BidderDistribution(((0.6, Xos(((1.0, 0.2), (0.3, 0.9)))), (0.4, Xos(((0.5, 0.5),))))),
    BidderDistribution(((1.0, Xos(((0.8, 0.0), (0.0, 0.7)))),)),
))

# %% Per profile: the optimal allocation and the prices its supporting clauses induce.
for prob, idx, profile in inst.profiles():
    opt = optimal_allocation(profile)
    p = supporting_clause_prices(profile)
    rep = check_balanced(profile, p)
    print(f"profile {idx} (prob {prob:.1f}): OPT {opt.value:.2f} via {opt.allocation}, "
          f"prices {p}, balanced={rep.balanced}")

# %% Posted prices are half the expected supporting-clause prices.
prices = balanced_prices_xos(inst)
e_opt = expected_opt(inst)
print("posted prices:", prices, " E[OPT] =", round(e_opt, 4))
for order in permutations(range(inst.n)):
    w = expected_welfare_exact(inst, prices, order).welfare
    print(f"  arrival order {order}: E[W] = {w:.4f} >= E[OPT]/2 = {e_opt / 2:.4f}")
