#!/usr/bin/env python3
"""The harmonic recursion and how fast it grows.

a(1) = 1 and a(l) = 1 + (l-1) a(l-1). Two facts matter downstream: the
recursion agrees with its closed form (l-1)! * sum 1/i!, and it is
squeezed between (l-1)! and e (l-1)!. The competitive ratio of the
uniform memoryless policy on k uniform metrics is exactly k * a(k), so
this table is the whole story of "how bad can memoryless get".
"""

from math import factorial

from gkserver import alpha, alpha_bounds_check, alpha_closed_form

print(f"{'l':>3} {'a(l)':>16} {'(l-1)!':>16} {'a(l)/(l-1)!':>12} {'bounds':>7}")
for ell in range(1, 17):
    a = alpha(ell)
    f = factorial(ell - 1)
    assert a == alpha_closed_form(ell)
    print(f"{ell:>3} {a:>16} {f:>16} {a / f:>12.6f} {str(alpha_bounds_check(ell)):>7}")

print()
print("The ratio a(l)/(l-1)! creeps up to e = 2.71828... from below:")
print("every value sits inside the factorial sandwich, so a(l) = Theta((l-1)!)")
print("and the memoryless competitive ratio k*a(k) = Theta(k!).")

k = 10
print(f"\nFor k = {k}: k * a(k) = {k * alpha(k)}, already far beyond the")
print(f"exponential 2^k = {2**k} scale that algorithms with memory achieve")
print("on uniform metrics - forgetting history costs a factorial.")
