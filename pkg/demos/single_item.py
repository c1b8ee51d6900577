"""Single-item posted price at half the expected maximum value."""
# %%
import numpy as np

from prophet_lab import Additive, BidderDistribution, Instance, expected_opt, expected_welfare_exact, single_item_price

# %% Bidder 0 values the item at 0 or 2 with equal odds; bidder 1 always at 1.
inst = Instance(1, (
    BidderDistribution(((0.5, Additive((0.0,))), (0.5, Additive((2.0,))))),
    BidderDistribution(((1.0, Additive((1.0,))),)),
))
price = single_item_price(inst)
print("price:", price)                      # E[max] / 2 = 0.75

# %% Expected welfare, revenue and buyer utility, enumerated exactly.
out = expected_welfare_exact(inst, price)
e_opt = expected_opt(inst)
print(f"E[OPT] = {e_opt:.4f}, E[ALG] = {out.welfare:.4f}, ratio = {e_opt / out.welfare:.4f}")

# %% The guarantee over a batch of random instances.
rng = np.random.default_rng(0)
worst = np.inf
for _ in range(100):
    bidders = []
    for _ in range(int(rng.integers(1, 5))):
        q = rng.dirichlet(np.ones(3))
        bidders.append(BidderDistribution(tuple((float(q[k]), Additive((float(rng.uniform(0, 10)),)))
                                                for k in range(3))))
    inst = Instance(1, tuple(bidders))
    worst = min(worst, expected_welfare_exact(inst, single_item_price(inst)).welfare / expected_opt(inst))
print(f"worst E[ALG] / E[OPT] over 100 instances: {worst:.4f} (never below 0.5)")
