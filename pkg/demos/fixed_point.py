"""Fixed points of the score-grid map and the audited constant-factor chain."""
# %%
from prophet_lab import SqrtAdditive, best_fixed_point, deterministic, find_fixed_point, verify_constant_bound

inst = deterministic(2, [SqrtAdditive((1.0, 0.5))])

# %% A coarse grid (step above v_max / 3) makes the all-zero generator a fixed point.
eps = 0.4 * inst.v_max
res = find_fixed_point(inst, eps)
rep = verify_constant_bound(inst, res.x, eps)
print(f"dynamics: converged={res.converged} in {res.iterations} iteration(s), E[ALG] = {rep.e_alg}")
print("  grid step consistent with the claim:", rep.delta_consistent)

# %% Searching over fixed points for the welfare-maximizing one.
best = best_fixed_point(inst, eps, starts=8)
rep = verify_constant_bound(inst, best.x, eps)
print(f"welfare search: residual {best.residual:.2e}, E[ALG] = {rep.e_alg:.4f}, "
      f"E[OPT] = {rep.e_opt:.4f}, ratio = {rep.ratio:.3f}")

# %% Every link of the audited chain, with its slack.
for key, value in rep.chain.items():
    print(f"  {key}: {value}")

# %% A finer grid on a single-item instance gives a nonzero fixed point directly.
one = deterministic(1, [SqrtAdditive((1.0,))])
res = find_fixed_point(one, 0.2)
rep = verify_constant_bound(one, res.x, 0.2)
print(f"m = 1, step 0.2: {res.iterations} iterations, ratio {rep.ratio:.3f}, bound_ok={rep.bound_ok}")
