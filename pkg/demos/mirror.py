"""Correa-Cristi thresholds against a random score generator, exactly and by sampling."""
# %%
from pathlib import Path

import numpy as np

from prophet_lab import expected_opt, mirror_sides_exact, mirror_sides_mc, random_irsg
from prophet_lab.harness import load_instance

inst = load_instance(Path(__file__).parent / "instances" / "xos_pair.json")
rng = np.random.default_rng(7)

# %% One random generator: both sides of the mirror inequality.
g = random_irsg(inst, rng, support=2, values=[0.0, 0.5, 1.0])
exact = mirror_sides_exact(inst, g)
est = mirror_sides_mc(inst, g, 100_000, np.random.default_rng(1))
print(f"exact: E[ALG] = {exact.lhs:.4f} >= half-surplus = {exact.rhs:.4f}")
print(f"sampled: {est.lhs:.4f} +/- {est.lhs_half_width:.4f}, {est.rhs:.4f} +/- {est.rhs_half_width:.4f}")

# %% The inequality holds for every generator; the slack varies a lot.
gaps = []
for _ in range(200):
    s = mirror_sides_exact(inst, random_irsg(inst, rng))
    gaps.append(s.lhs - s.rhs)
print(f"200 generators: min gap {min(gaps):.4f}, max gap {max(gaps):.4f}, E[OPT] = {expected_opt(inst):.4f}")
