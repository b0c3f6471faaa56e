#!/usr/bin/env python3
"""Why the uniform policy is the unique optimum: the 2^k subset system.

Any memoryless policy p_1 >= ... >= p_k faces an adversary that hides in
the metric it plays least. The expected catch-up time h(S) from each set
S of differing metrics solves a sparse 2^k linear system; h({k}) lower
bounds the competitive ratio. Solved exactly over rationals:

* h({k}) >= a(k)/p_k for every policy,
* h({k}) = k*a(k) exactly when the policy is uniform, and strictly more
  otherwise - the uniform policy is the only one hitting the floor.
"""

from fractions import Fraction

from gkserver import (
    MemorylessPolicy,
    check_monotonicity,
    check_subset_alpha_bound,
    competitive_gap,
    lower_bound_hk,
    phi_transform,
    solve_system,
)

k = 4
grid = [
    [Fraction(1, 4)] * 4,
    [Fraction(3, 10), Fraction(3, 10), Fraction(2, 10), Fraction(2, 10)],
    [Fraction(2, 5), Fraction(1, 5), Fraction(1, 5), Fraction(1, 5)],
    [Fraction(1, 2), Fraction(1, 4), Fraction(1, 8), Fraction(1, 8)],
    [Fraction(7, 10), Fraction(1, 10), Fraction(1, 10), Fraction(1, 10)],
]

print(f"{'policy':>28} {'h({k})':>12} {'floor a(k)/p_k':>15} {'gap to k*a(k)':>14}")
for probs in grid:
    policy = MemorylessPolicy.from_probs(probs)
    sol = solve_system(policy)
    assert not check_monotonicity(sol)
    assert not check_subset_alpha_bound(sol)
    label = ",".join(str(p) for p in policy.probs)
    print(f"{label:>28} {str(sol.h_k):>12} {str(lower_bound_hk(policy)):>15} "
          f"{str(competitive_gap(policy, sol)):>14}")

print("\nuniform 1/4,1/4,1/4,1/4 gives h({k}) = 4 * a(4) = 64; every skewed")
print("policy pays strictly more, and the floor a(k)/p_k already exceeds 64")
print("as soon as p_k < 1/k.")

policy = MemorylessPolicy.uniform(3)
sol = solve_system(policy)
phi = phi_transform(sol)
full = (1 << 3) - 1
print("\nthe complement transform phi(S) = h(full) - h(full \\ S) round-trips:")
for mask in range(1 << 3):
    assert sol.h[mask] == sol.h[full] - phi[full & ~mask]
print("checked on all 8 subsets for k = 3.")
