#!/usr/bin/env python3
"""Machine-checking the competitive bound on a real trace.

The potential phi(q, adv) = h(d_H(q, adv)) certifies the uniform
policy's k*a(k) ratio: adversary moves raise phi by at most k*a(k)
each, and every forced policy move lowers it by at least 1 in
expectation. The audit recomputes the exact per-step expectation,
accumulates the realized-minus-expected residual (a martingale), and
checks the telescoped inequality exactly - rational arithmetic
throughout, no tolerances.
"""

from gkserver import ExperimentConfig, PotentialContext, run, verify_trace

k = 3
cfg = ExperimentConfig.from_dict({
    "k": k, "n": [3] * k, "policy": [f"1/{k}"] * k, "adversary": "lower_bound",
    "phases": 400, "seed": 99, "emit_trace": True,
})
_, trace = run(cfg)
ctx = PotentialContext.for_k(k)
report = verify_trace(trace, ctx)

print(f"trace: {report.steps} steps, {cfg.phases} phases, seed {cfg.seed}")
print(f"policy cost  = {report.alg_cost}")
print(f"adversary    = {report.adv_cost}  (one move per phase)")
print(f"k * a(k)     = {ctx.step_bound}")
print(f"hard potential-jump violations: {len(report.hard_violations)}")
print(f"min expected drop per move    : {float(report.min_expected_drift):g} (floor is 1)")
print(f"martingale residual           : {float(report.residual):+.1f} "
      "(mean over seeds straddles 0)")
print(f"telescoped bound holds        : {report.bound_holds}")
print()
print("bound: ALG <= k*a(k)*ADV + phi(start) - phi(end) - residual")
lhs = report.alg_cost
rhs = (ctx.step_bound * report.adv_cost + report.potential_start
       - report.potential_end - report.residual)
print(f"       {lhs} <= {float(rhs):g}")
print()
print("On this instance the inequality is tight: requests reveal exactly one")
print("adversary server, so every expected drop is exactly 1 and the bound")
print("collapses to an identity once the residual is accounted.")
assert report.ok
