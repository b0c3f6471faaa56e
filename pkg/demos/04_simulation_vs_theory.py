#!/usr/bin/env python3
"""Seeded simulation against the adaptive adversary, checked against theory.

The adversary pays exactly one move per phase; the policy pays one move
per step. So the mean phase length *is* the empirical competitive ratio,
and it should match the solved h({k}) of the subset system: k*a(k) for
the uniform policy, more for anything else, and Theta(2^k) in the
two-point world where the hard instance cannot be built.
"""

from gkserver import (
    ExperimentConfig,
    MemorylessPolicy,
    binary_eet,
    estimate_ratio,
    harmonic_eet,
    solve_system,
)

PHASES = 20_000

print(f"{'instance':>34} {'simulated':>12} {'3 s.e.':>8} {'analytic':>9}")
rows = [
    ("k=2 uniform, lower_bound", {"k": 2, "n": [3, 3], "policy": ["1/2", "1/2"],
                                  "adversary": "lower_bound"}, harmonic_eet(2, 1)),
    ("k=3 uniform, lower_bound", {"k": 3, "n": [3, 3, 3], "policy": ["1/3"] * 3,
                                  "adversary": "lower_bound"}, harmonic_eet(3, 1)),
    ("k=2 skewed 2/3,1/3, lower_bound", {"k": 2, "n": [3, 3], "policy": ["2/3", "1/3"],
                                         "adversary": "lower_bound"},
     solve_system(MemorylessPolicy.from_probs(["2/3", "1/3"])).h_k),
    ("k=3 uniform, n2 (2-point)", {"k": 3, "n": [2, 2, 2], "policy": ["1/3"] * 3,
                                   "adversary": "n2"}, binary_eet(3, 1)),
    ("k=4 uniform, n2 (2-point)", {"k": 4, "n": [2, 2, 2, 2], "policy": ["1/4"] * 4,
                                   "adversary": "n2"}, binary_eet(4, 1)),
]
for label, d, analytic in rows:
    d = dict(d, phases=PHASES, seed=2718)
    ratio, se = estimate_ratio(ExperimentConfig.from_dict(d))
    flag = "ok" if abs(float(ratio) - float(analytic)) <= 3 * se else "OFF"
    print(f"{label:>34} {float(ratio):>12.4f} {3 * se:>8.4f} {float(analytic):>9g}  {flag}")

print(f"\n(each row: {PHASES} phases, adversary cost = 1 per phase, policy cost = steps)")
