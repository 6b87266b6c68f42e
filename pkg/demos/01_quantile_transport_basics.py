"""Densities, quantile functions, Wasserstein distance, assignment plans.

Walks through the basic objects: build mixed atom/histogram densities,
look at their CDFs and quantile functions, compute the 2-Wasserstein
distance through the quantile isometry, cross-check it against the
brute-force transportation oracle, and inspect the optimal assignment plan.
Writes nothing; prints a narrative to stdout.
"""

import numpy as np

from swarmlq import (Density, cdf_of, check_marginals, optimal_plan, oracle,
                     plan_cost, quantile_of, wasserstein2)

# A fleet of four resource clusters: three sharp sites plus a spread-out
# patrol segment between 6 and 8.
resource = Density(
    domain=(0, 10),
    atoms=[(1.0, 0.25), (2.5, 0.15), (4.0, 0.20)],
    edges=[6.0, 8.0],
    values=[0.20],
)

# Demand: two point hot spots and a uniform stretch of background work.
demand = Density(
    domain=(0, 10),
    atoms=[(3.0, 0.30), (7.5, 0.30)],
    edges=[4.5, 6.5],
    values=[0.20],
)

print("resource:", resource)
print("demand:  ", demand)

F = cdf_of(resource)
Q = quantile_of(resource)
print("\nCDF of the resource at x = 1, 4, 6, 8:", F(np.array([1.0, 4.0, 6.0, 8.0])))
print("quantile at z = 0.1, 0.5, 0.9:", Q(np.array([0.1, 0.5, 0.9])))
print("atom flats (z_lo, z_hi, position):")
for row in Q.flat_intervals:
    print(f"  [{row[0]:.2f}, {row[1]:.2f}] -> x = {row[2]}")

w = wasserstein2(resource, demand)
print(f"\n2-Wasserstein distance resource -> demand: {w:.6f}")

# Atom-only shadow problem cross-checked against the transportation LP.
ra = Density((0, 10), atoms=[(1.0, 0.4), (2.5, 0.25), (4.0, 0.35)])
da = Density((0, 10), atoms=[(3.0, 0.5), (7.5, 0.5)])
w_atoms = wasserstein2(ra, da)
lp_sq = oracle.lp_wasserstein(ra, da)
print(f"atoms-only distance^2 via quantiles: {w_atoms**2:.12f}")
print(f"atoms-only distance^2 via LP oracle: {lp_sq:.12f}")

plan = optimal_plan(ra, da)
print(f"\noptimal assignment plan cost: {plan_cost(plan):.12f}")
print("atom couplings (x -> y, mass):")
for x, y, m in plan.atom_couplings():
    print(f"  {x:.2f} -> {y:.2f}  ({m:.3f})")
report = check_marginals(plan, ra, da)
print("marginals consistent:", bool(report))
