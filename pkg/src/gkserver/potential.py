"""Potential-function audit of simulation traces.

The potential between two configurations is phi(p, q) = h(d_H(p, q)),
where h is the harmonic-chain extinction-time table and d_H the Hamming
distance. Against any adversary it satisfies, for the uniform policy:

* adversary moves raise the potential by at most k * a(k) per unit of
  adversary cost (hard per-step inequality on realized values), and
* each forced policy move lowers the potential by at least 1 *in
  expectation* (an expectation statement: the realized drop can be
  negative, so the verifier recomputes the exact expectation over the k
  possible moves and accounts the realized-minus-expected difference as
  a martingale residual).

Telescoping the two gives total policy cost <= k * a(k) * adversary cost
plus boundary potentials minus the residual, which verify_trace checks
as an exact rational inequality on every finished trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .chains import harmonic_eet
from .harmonic import alpha_table
from .subsets import MemorylessPolicy

__all__ = [
    "PotentialContext",
    "hamming",
    "potential",
    "delta_h",
    "expected_drift",
    "TraceReport",
    "verify_trace",
]


@dataclass(frozen=True)
class PotentialContext:
    """Precomputed h(0..k) and a(1..k) for one k."""

    k: int
    h: tuple[int, ...]
    alphas: tuple[int, ...]

    @classmethod
    def for_k(cls, k: int) -> "PotentialContext":
        if k < 1:
            raise ValueError(f"need k >= 1, got {k}")
        return cls(
            k=k,
            h=tuple(harmonic_eet(k, ell) for ell in range(k + 1)),
            alphas=tuple(alpha_table(k)),
        )

    @property
    def step_bound(self) -> int:
        """k * a(k): the max potential increase per unit adversary move."""
        return self.k * self.alphas[self.k - 1]


def hamming(a, b) -> int:
    """Number of coordinates where two configurations differ."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return sum(1 for x, y in zip(a, b) if x != y)


def potential(a, b, ctx: PotentialContext) -> int:
    """phi(a, b) = h(d_H(a, b))."""
    d = hamming(a, b)
    if len(a) != ctx.k:
        raise ValueError(f"configurations have {len(a)} coordinates, context is for k={ctx.k}")
    return ctx.h[d]


def delta_h(ell: int, ell_prime: int, ctx: PotentialContext) -> int:
    """h(ell') - h(ell) via the telescoped sum k * sum_{i=ell}^{ell'-1} a(k-i)."""
    if not 0 <= ell < ell_prime <= ctx.k:
        raise ValueError(f"need 0 <= ell < ell' <= k, got ell={ell}, ell'={ell_prime}, k={ctx.k}")
    return ctx.k * sum(ctx.alphas[ctx.k - i - 1] for i in range(ell, ell_prime))


def expected_drift(q, adv, r, policy: MemorylessPolicy, ctx: PotentialContext) -> Fraction:
    """Exact expected potential drop of one forced policy move.

    Enumerates all k moves with their probabilities (no sampling).
    Preconditions: q serves the request nowhere; adv serves it somewhere.
    For the uniform policy the value equals (C-1)*a(j) + 1 with
    C = |{i : adv_i = r_i}| and j = k - d_H(q, adv) + 1, hence >= 1.
    """
    k = policy.k
    if len(q) != k or len(adv) != k or len(r) != k or ctx.k != k:
        raise ValueError("q, adv, r, and context must all describe the same k metrics")
    if any(qi == ri for qi, ri in zip(q, r)):
        raise ValueError("request is already served by the policy configuration")
    if not any(ai == ri for ai, ri in zip(adv, r)):
        raise ValueError("adversary configuration does not serve the request")
    dist = hamming(q, adv)
    drift = Fraction(0)
    for j in range(k):
        d_new = dist - (1 if q[j] != adv[j] else 0) + (1 if r[j] != adv[j] else 0)
        drift += policy.probs[j] * (ctx.h[dist] - ctx.h[d_new])
    return drift


@dataclass(frozen=True)
class TraceReport:
    """Outcome of a trace audit; hard_violations empty means the audit passed."""

    steps: int
    alg_cost: int
    adv_cost: int
    potential_start: int
    potential_end: int
    residual: Fraction             # sum of (realized - expected) potential drops
    expected_drop_total: Fraction
    realized_drop_total: int
    min_expected_drift: Fraction | None
    hard_violations: list[dict]
    bound_holds: bool              # ALG <= k a(k) ADV + phi_0 - phi_T - residual

    @property
    def ok(self) -> bool:
        return not self.hard_violations and self.bound_holds

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "alg_cost": self.alg_cost,
            "adv_cost": self.adv_cost,
            "potential_start": self.potential_start,
            "potential_end": self.potential_end,
            "residual": f"{self.residual.numerator}/{self.residual.denominator}",
            "residual_float": float(self.residual),
            "expected_drop_total": float(self.expected_drop_total),
            "realized_drop_total": self.realized_drop_total,
            "min_expected_drift": None if self.min_expected_drift is None
            else float(self.min_expected_drift),
            "hard_violations": self.hard_violations,
            "bound_holds": self.bound_holds,
            "ok": self.ok,
        }


def verify_trace(trace, ctx: PotentialContext | None = None) -> TraceReport:
    """Audit a uniform-policy trace step by step.

    Hard check per step: the adversary's move may not raise the
    potential by more than k * a(k) per unit of its cost. Policy moves
    are accounted in expectation (the exact expected drop is recomputed
    per step; realized-minus-expected accumulates into the residual,
    whose mean over independent traces straddles zero). Finally the
    telescoped bound is checked exactly.
    """
    policy = trace.policy
    if not policy.is_uniform:
        raise ValueError("trace audit is defined for the uniform policy only")
    k = trace.k
    if ctx is None:
        ctx = PotentialContext.for_k(k)
    if ctx.k != k:
        raise ValueError(f"context is for k={ctx.k}, trace has k={k}")

    bound = ctx.step_bound
    phi_start = potential(trace.q0, trace.adv0, ctx)
    q_prev = trace.q0
    adv_prev = trace.adv0
    residual = Fraction(0)
    expected_total = Fraction(0)
    realized_total = 0
    min_drift: Fraction | None = None
    violations: list[dict] = []
    alg_cost = 0
    adv_cost = 0

    for s in trace.steps:
        jump = potential(q_prev, s.adv_config, ctx) - potential(q_prev, adv_prev, ctx)
        if jump > bound * s.adv_cost:
            violations.append({
                "t": s.t,
                "kind": "adversary_potential_jump",
                "jump": jump,
                "allowed": bound * s.adv_cost,
            })
        drop = potential(q_prev, s.adv_config, ctx) - potential(s.alg_config, s.adv_config, ctx)
        exp_drop = expected_drift(q_prev, s.adv_config, s.request, policy, ctx)
        residual += drop - exp_drop
        expected_total += exp_drop
        realized_total += drop
        if min_drift is None or exp_drop < min_drift:
            min_drift = exp_drop
        alg_cost += s.alg_cost
        adv_cost += s.adv_cost
        q_prev = s.alg_config
        adv_prev = s.adv_config

    phi_end = potential(q_prev, adv_prev, ctx)
    bound_holds = alg_cost <= bound * adv_cost + phi_start - phi_end - residual
    return TraceReport(
        steps=len(trace.steps),
        alg_cost=alg_cost,
        adv_cost=adv_cost,
        potential_start=phi_start,
        potential_end=phi_end,
        residual=residual,
        expected_drop_total=expected_total,
        realized_drop_total=realized_total,
        min_expected_drift=min_drift,
        hard_violations=violations,
        bound_holds=bound_holds,
    )
