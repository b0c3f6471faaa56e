"""Seeded simulation of memoryless policies against adaptive adversaries.

Every metric space is uniform (unit distance between any two of its
points), so a configuration is a tuple of point indices, one per metric,
and moving any single server costs 1. Requests are generated *after*
observing the policy's realized configuration (adaptive online
adversary), the policy moves, and costs accumulate on both sides.

Two adversaries are built in:

* "lower_bound" (needs >= 3 points per metric): moves a single server in
  the smallest-probability metric whenever the configurations coincide,
  then keeps requesting its own position in the lowest-index differing
  metric while blocking everything else. The policy can never serve in
  place, pays 1 per step, and the adversary pays 1 per phase.
* "n2" (exactly 2 points per metric): flips its server in the last
  metric when matched; every request is the anti-configuration of the
  policy (the only request that forces a move when n = 2).

A *phase* runs from one coincidence of the two configurations to the
next. Phases are i.i.d. (memorylessness), so the mean phase length
estimates the competitive ratio; the subset-state analysis gives its
exact value h({k}).

Reproducibility: one master seed; phase i draws from an independent
PCG64 stream keyed (seed, i), so phases can be replayed or distributed
without changing any sample.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import sqrt

import numpy as np

from .harmonic import rational_from_str
from .subsets import MemorylessPolicy

__all__ = [
    "ADVERSARY_KINDS",
    "ConfigError",
    "StepBudgetExhausted",
    "MetricSpec",
    "ExperimentConfig",
    "TraceStep",
    "Trace",
    "RunSummary",
    "PolicySampler",
    "memoryless_step",
    "lower_bound_adversary_step",
    "n2_adversary_step",
    "run",
    "estimate_ratio",
    "state_histogram",
    "transition_counts",
    "write_trace_csv",
    "read_trace_csv",
]

ADVERSARY_KINDS = ("lower_bound", "n2")
DEFAULT_MAX_STEPS = 10**9


class ConfigError(ValueError):
    """Experiment configuration rejected; message says what to fix."""


class StepBudgetExhausted(RuntimeError):
    """max_steps ran out before the phase budget completed."""


@dataclass(frozen=True)
class MetricSpec:
    """Number of points in each uniform metric space (canonical metric order)."""

    n: tuple[int, ...]

    def __post_init__(self):
        if not self.n:
            raise ConfigError("need at least one metric space")
        for i, ni in enumerate(self.n, start=1):
            if ni < 2:
                raise ConfigError(f"metric {i}: a uniform metric needs >= 2 points, got {ni}")

    @property
    def k(self) -> int:
        return len(self.n)


def _validate_config_point(spec: MetricSpec, cfg, what: str) -> None:
    if len(cfg) != spec.k:
        raise ConfigError(f"{what} has {len(cfg)} coordinates, expected {spec.k}")
    for i, (x, ni) in enumerate(zip(cfg, spec.n), start=1):
        if not 0 <= x < ni:
            raise ConfigError(f"{what} coordinate {i} = {x} outside 0..{ni - 1}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation run: spaces, policy, adversary, horizon, seed.

    The policy is canonicalized (descending probabilities); n is stored
    in the same canonical metric order.
    """

    spec: MetricSpec
    policy: MemorylessPolicy
    adversary: str
    phases: int
    seed: int
    max_steps: int = DEFAULT_MAX_STEPS
    emit_trace: bool = False
    trace_path: str | None = None
    summary_path: str | None = None

    def __post_init__(self):
        if self.spec.k != self.policy.k:
            raise ConfigError(
                f"policy covers {self.policy.k} metrics but n lists {self.spec.k}"
            )
        if self.adversary not in ADVERSARY_KINDS:
            raise ConfigError(
                f"unknown adversary {self.adversary!r}; expected one of {ADVERSARY_KINDS}"
            )
        if self.adversary == "lower_bound" and any(ni < 3 for ni in self.spec.n):
            raise ConfigError(
                "the lower_bound adversary needs >= 3 points in every metric "
                f"(step 4 must avoid both current servers); got n={list(self.spec.n)}"
            )
        if self.adversary == "n2" and any(ni != 2 for ni in self.spec.n):
            raise ConfigError(
                f"the n2 adversary needs exactly 2 points in every metric; got n={list(self.spec.n)}"
            )
        if self.phases < 1:
            raise ConfigError(f"phases must be >= 1, got {self.phases}")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        required = {"k", "n", "policy", "adversary", "phases", "seed"}
        missing = required - d.keys()
        if missing:
            raise ConfigError(f"config missing fields: {sorted(missing)}")
        k = d["k"]
        if not isinstance(k, int) or k < 1:
            raise ConfigError(f"k must be a positive integer, got {k!r}")
        n = d["n"]
        if not isinstance(n, list) or len(n) != k:
            raise ConfigError(f"n must list exactly k={k} point counts, got {n!r}")
        raw_policy = d["policy"]
        if not isinstance(raw_policy, list) or len(raw_policy) != k:
            raise ConfigError(f"policy must list exactly k={k} rationals, got {raw_policy!r}")
        try:
            probs = [rational_from_str(str(p)) for p in raw_policy]
            policy = MemorylessPolicy.from_probs(probs)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad policy {raw_policy!r}: {exc}") from exc
        # metrics travel with their probabilities under canonicalization
        n_canonical = tuple(n[i] for i in policy.source_order)
        return cls(
            spec=MetricSpec(n=n_canonical),
            policy=policy,
            adversary=d["adversary"],
            phases=d["phases"],
            seed=d["seed"],
            max_steps=d.get("max_steps", DEFAULT_MAX_STEPS),
            emit_trace=d.get("emit_trace", False),
            trace_path=d.get("trace_path"),
            summary_path=d.get("summary_path"),
        )

    @classmethod
    def from_json_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = {
            "k": self.policy.k,
            "n": list(self.spec.n),
            "policy": self.policy.as_strs(),
            "adversary": self.adversary,
            "phases": self.phases,
            "seed": self.seed,
            "max_steps": self.max_steps,
            "emit_trace": self.emit_trace,
        }
        if self.trace_path:
            d["trace_path"] = self.trace_path
        if self.summary_path:
            d["summary_path"] = self.summary_path
        return d


class PolicySampler:
    """Exact sampler for a rational policy from a seeded integer stream.

    Draws one uniform integer below the common denominator per step and
    picks the metric by cumulative integer thresholds, so the sampled
    distribution matches the policy exactly (no float rounding).
    """

    def __init__(self, policy: MemorylessPolicy, seed_key):
        self._den = 1
        for p in policy.probs:
            self._den = self._den * p.denominator // np.gcd(self._den, p.denominator)
        acc = 0
        self._thresholds = []
        for p in policy.probs:
            acc += p.numerator * (self._den // p.denominator)
            self._thresholds.append(acc)
        self._rng = np.random.default_rng(np.random.SeedSequence(seed_key))
        self._buf = self._rng.integers(0, self._den, size=256).tolist()
        self._pos = 0

    def draw(self) -> int:
        """0-based canonical metric index."""
        if self._pos == len(self._buf):
            self._buf = self._rng.integers(0, self._den, size=256).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        for j, t in enumerate(self._thresholds):
            if u < t:
                return j
        return len(self._thresholds) - 1


def memoryless_step(q, r, policy: MemorylessPolicy, sampler: PolicySampler):
    """One policy move: serve in place if possible, else move one sampled server.

    Returns (new_config, moved_index) with moved_index None when the
    request was already served.
    """
    if len(q) != policy.k or len(r) != policy.k:
        raise ValueError("configuration and request must have one coordinate per metric")
    if any(qi == ri for qi, ri in zip(q, r)):
        return tuple(q), None
    j = sampler.draw()
    new = list(q)
    new[j] = r[j]
    return tuple(new), j


def _smallest_excluding(excluded, n: int) -> int:
    for v in range(n):
        if v not in excluded:
            return v
    raise ValueError(f"no point outside {excluded} in a {n}-point metric")


def lower_bound_adversary_step(q_prev, adv_prev, q0, spec: MetricSpec):
    """Adversary update + request for the hard instance (>= 3 points per metric).

    If the policy has caught up, the adversary re-bases on q0 and moves
    its last-metric server to a fresh point; otherwise it stays. The
    request reveals the adversary's position in the lowest-index
    differing metric m and blocks both sides everywhere else:
    r_m = adv_m, and r_j avoids {adv_j, q_prev_j} for j != m. Free
    choices always take the smallest valid point, keeping runs
    deterministic.
    """
    k = spec.k
    if any(ni < 3 for ni in spec.n):
        raise ConfigError(
            f"lower_bound adversary needs >= 3 points in every metric, got n={list(spec.n)}"
        )
    _validate_config_point(spec, q_prev, "q_prev")
    _validate_config_point(spec, adv_prev, "adv_prev")
    if tuple(q_prev) == tuple(adv_prev):
        z = _smallest_excluding({adv_prev[k - 1], q_prev[k - 1]}, spec.n[k - 1])
        adv_next = tuple(q0[:k - 1]) + (z,)
    else:
        adv_next = tuple(adv_prev)
    diff = [j for j in range(k) if q_prev[j] != adv_next[j]]
    m = diff[0]
    r = []
    for j in range(k):
        if j == m:
            r.append(adv_next[j])
        else:
            r.append(_smallest_excluding({adv_next[j], q_prev[j]}, spec.n[j]))
    return adv_next, tuple(r)


def n2_adversary_step(q_prev, adv_prev):
    """Adversary update + request when every metric has 2 points.

    The only request a two-point metric can force a move with is the
    policy's anti-configuration, so r complements q_prev everywhere.
    When matched, the adversary flips its server in the last metric.
    """
    k = len(q_prev)
    if len(adv_prev) != k:
        raise ValueError("configurations must have equal length")
    if any(x not in (0, 1) for x in tuple(q_prev) + tuple(adv_prev)):
        raise ConfigError("n2 adversary requires two-point metrics (coordinates 0/1)")
    if tuple(q_prev) == tuple(adv_prev):
        adv_next = tuple(adv_prev[: k - 1]) + (1 - adv_prev[k - 1],)
    else:
        adv_next = tuple(adv_prev)
    r = tuple(1 - x for x in q_prev)
    return adv_next, r


@dataclass(frozen=True)
class TraceStep:
    t: int
    request: tuple[int, ...]
    alg_config: tuple[int, ...]
    adv_config: tuple[int, ...]
    alg_cost: int
    adv_cost: int
    hamming: int
    state_mask: int


@dataclass
class Trace:
    """Full step-by-step record of one run."""

    k: int
    n: tuple[int, ...]
    policy: MemorylessPolicy
    adversary: str
    seed: int
    q0: tuple[int, ...]
    adv0: tuple[int, ...]
    steps: list[TraceStep] = field(default_factory=list)

    @property
    def alg_cost(self) -> int:
        return sum(s.alg_cost for s in self.steps)

    @property
    def adv_cost(self) -> int:
        return sum(s.adv_cost for s in self.steps)


@dataclass(frozen=True)
class RunSummary:
    alg_cost: int
    adv_cost: int
    ratio: Fraction | None
    phases: int
    mean_phase_length: float
    max_phase_length: int
    phase_length_se: float
    steps: int
    seed: int
    policy: tuple[str, ...]
    adversary: str
    k: int
    n: tuple[int, ...]
    exhausted: bool

    def to_dict(self) -> dict:
        return {
            "alg_cost": self.alg_cost,
            "adv_cost": self.adv_cost,
            "ratio": None if self.ratio is None else f"{self.ratio.numerator}/{self.ratio.denominator}",
            "ratio_float": None if self.ratio is None else float(self.ratio),
            "phases": self.phases,
            "mean_phase_length": self.mean_phase_length,
            "max_phase_length": self.max_phase_length,
            "phase_length_se": self.phase_length_se,
            "steps": self.steps,
            "seed": self.seed,
            "policy": list(self.policy),
            "adversary": self.adversary,
            "k": self.k,
            "n": list(self.n),
            "exhausted": self.exhausted,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _state_mask(q, adv) -> int:
    mask = 0
    for i, (a, b) in enumerate(zip(q, adv)):
        if a != b:
            mask |= 1 << i
    return mask


def run(config: ExperimentConfig):
    """Drive the request loop until the phase budget or step budget runs out.

    Returns (RunSummary, Trace or None). The loop inlines the adversary
    rules of lower_bound_adversary_step / n2_adversary_step and the
    sampling of memoryless_step for speed; the reference functions define
    the semantics and the test suite replays traces through them. Both
    instances force a policy move every step (the request is constructed
    to avoid the policy's configuration), and the adversary moves exactly
    one server per phase; the loop re-checks the configurations'
    coincidence at every phase boundary.
    """
    spec = config.spec
    policy = config.policy
    k = spec.k
    km1 = k - 1
    q0 = tuple(0 for _ in range(k))
    q = list(q0)
    adv = list(q0)
    trace = None
    if config.emit_trace:
        trace = Trace(k=k, n=spec.n, policy=policy, adversary=config.adversary,
                      seed=config.seed, q0=q0, adv0=q0)

    lower_bound = config.adversary == "lower_bound"
    phase_budget = config.phases
    max_steps = config.max_steps
    seed = config.seed
    phase_lengths: list[int] = []
    phase_steps = 0
    completed_alg = 0
    completed_adv = 0
    alg_cost = 0
    adv_cost = 0
    steps = 0
    exhausted = False
    dist = 0

    den = 1
    for p in policy.probs:
        den = den * p.denominator // np.gcd(den, p.denominator)
    thresholds = []
    acc = 0
    for p in policy.probs:
        acc += p.numerator * (den // p.denominator)
        thresholds.append(acc)

    gen = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    buf = gen.integers(0, den, size=256).tolist()
    pos = 0

    while len(phase_lengths) < phase_budget:
        if steps >= max_steps:
            exhausted = True
            break
        steps += 1
        phase_steps += 1
        # adversary update (adaptive: sees the realized q); it moves one
        # server in the last metric exactly when the policy has caught up
        if dist == 0:
            if lower_bound:
                cur = adv[km1]
                adv[km1] = 0 if cur != 0 else 1  # smallest point off the shared spot
            else:
                adv[km1] = 1 - adv[km1]
            adv_cost += 1
            adv_inc = 1
            dist = 1
            m = km1
        else:
            adv_inc = 0
            if lower_bound:
                m = 0
                while q[m] == adv[m]:
                    m += 1
        # sample the policy's metric
        if pos == 256:
            buf = gen.integers(0, den, size=256).tolist()
            pos = 0
        u = buf[pos]
        pos += 1
        j = 0
        while u >= thresholds[j]:
            j += 1
        # request coordinate j (full request only materialized for traces)
        r = None
        if lower_bound:
            if trace is not None:
                r = []
                for i in range(k):
                    if i == m:
                        r.append(adv[i])
                    else:
                        qi = q[i]
                        ai = adv[i]
                        v = 0
                        while v == qi or v == ai:
                            v += 1
                        r.append(v)
                rj = r[j]
            elif j == m:
                rj = adv[m]
            else:
                qj = q[j]
                aj = adv[j]
                rj = 0
                while rj == qj or rj == aj:
                    rj += 1
        else:
            if trace is not None:
                r = [1 - x for x in q]
            rj = 1 - q[j]
        # apply the move, tracking the Hamming distance incrementally
        if q[j] != adv[j]:
            dist -= 1
        q[j] = rj
        if rj != adv[j]:
            dist += 1
        alg_cost += 1
        if trace is not None:
            trace.steps.append(TraceStep(
                t=steps, request=tuple(r), alg_config=tuple(q), adv_config=tuple(adv),
                alg_cost=1, adv_cost=adv_inc, hamming=dist, state_mask=_state_mask(q, adv),
            ))
        if dist == 0:
            if q != adv:
                raise AssertionError("distance bookkeeping diverged from configurations")
            phase_lengths.append(phase_steps)
            phase_steps = 0
            completed_alg = alg_cost
            completed_adv = adv_cost
            gen = np.random.default_rng(np.random.SeedSequence((seed, len(phase_lengths))))
            buf = gen.integers(0, den, size=256).tolist()
            pos = 0

    phases_done = len(phase_lengths)
    if phases_done:
        mean_len = sum(phase_lengths) / phases_done
        max_len = max(phase_lengths)
        if phases_done > 1:
            var = sum((x - mean_len) ** 2 for x in phase_lengths) / (phases_done - 1)
            se = sqrt(var / phases_done)
        else:
            se = 0.0
        ratio = Fraction(completed_alg, completed_adv)
    else:
        mean_len, max_len, se, ratio = 0.0, 0, 0.0, None
    summary = RunSummary(
        alg_cost=completed_alg, adv_cost=completed_adv, ratio=ratio,
        phases=phases_done, mean_phase_length=mean_len, max_phase_length=max_len,
        phase_length_se=se, steps=steps, seed=config.seed,
        policy=tuple(policy.as_strs()), adversary=config.adversary,
        k=k, n=spec.n, exhausted=exhausted,
    )
    return summary, trace


def estimate_ratio(config: ExperimentConfig, phases: int | None = None):
    """Point estimate of ALG/ADV with the phase-length standard error.

    Phases are i.i.d. by memorylessness and the built-in adversaries pay
    exactly 1 per phase, so the ratio is the mean phase length.
    """
    if phases is not None:
        config = ExperimentConfig(
            spec=config.spec, policy=config.policy, adversary=config.adversary,
            phases=phases, seed=config.seed, max_steps=config.max_steps,
        )
    summary, _ = run(config)
    if summary.exhausted:
        raise StepBudgetExhausted(
            f"only {summary.phases}/{config.phases} phases completed within "
            f"{config.max_steps} steps"
        )
    return summary.ratio, summary.phase_length_se


def state_histogram(trace: Trace) -> dict[int, int]:
    """Visit counts of each post-step subset state (bitmask of differing metrics)."""
    counts: dict[int, int] = {}
    for s in trace.steps:
        counts[s.state_mask] = counts.get(s.state_mask, 0) + 1
    return counts


def transition_counts(trace: Trace) -> dict[tuple[int, int], int]:
    """Counts of (state before move, state after move) over policy moves.

    The before-state pairs the previous policy configuration with the
    *current* adversary configuration (post-update), which is the state
    the subset walk steps from.
    """
    counts: dict[tuple[int, int], int] = {}
    prev_q = trace.q0
    for s in trace.steps:
        before = _state_mask(prev_q, s.adv_config)
        counts[(before, s.state_mask)] = counts.get((before, s.state_mask), 0) + 1
        prev_q = s.alg_config
    return counts


def _join(cfg) -> str:
    return ";".join(str(x) for x in cfg)


def _split(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(";"))


def write_trace_csv(trace: Trace, path: str) -> None:
    """Deterministic CSV with a self-describing comment header."""
    lines = [
        "# gkserver-trace v1",
        f"# k={trace.k}",
        f"# n={_join(trace.n)}",
        f"# policy={';'.join(trace.policy.as_strs())}",
        f"# adversary={trace.adversary}",
        f"# seed={trace.seed}",
        f"# q0={_join(trace.q0)}",
        f"# adv0={_join(trace.adv0)}",
        "t,request,alg_config,adv_config,alg_cost,adv_cost,hamming,state_mask",
    ]
    for s in trace.steps:
        lines.append(
            f"{s.t},{_join(s.request)},{_join(s.alg_config)},{_join(s.adv_config)},"
            f"{s.alg_cost},{s.adv_cost},{s.hamming},{s.state_mask}"
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace_csv(path: str) -> Trace:
    """Parse a trace written by write_trace_csv; raises ValueError on malformed input."""
    meta: dict[str, str] = {}
    steps: list[TraceStep] = []
    header_seen = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, val = body.split("=", 1)
                    meta[key.strip()] = val.strip()
                continue
            if not header_seen:
                expected = "t,request,alg_config,adv_config,alg_cost,adv_cost,hamming,state_mask"
                if line != expected:
                    raise ValueError(f"line {lineno}: unexpected column header {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 8:
                raise ValueError(f"line {lineno}: expected 8 fields, got {len(parts)}")
            steps.append(TraceStep(
                t=int(parts[0]), request=_split(parts[1]), alg_config=_split(parts[2]),
                adv_config=_split(parts[3]), alg_cost=int(parts[4]), adv_cost=int(parts[5]),
                hamming=int(parts[6]), state_mask=int(parts[7]),
            ))
    required = {"k", "n", "policy", "adversary", "seed", "q0", "adv0"}
    missing = required - meta.keys()
    if missing:
        raise ValueError(f"trace header missing fields: {sorted(missing)}")
    if not steps:
        raise ValueError("trace holds no steps")
    policy = MemorylessPolicy.from_probs(
        [rational_from_str(p) for p in meta["policy"].split(";")]
    )
    trace = Trace(
        k=int(meta["k"]), n=_split(meta["n"]), policy=policy,
        adversary=meta["adversary"], seed=int(meta["seed"]),
        q0=_split(meta["q0"]), adv0=_split(meta["adv0"]), steps=steps,
    )
    if trace.k != len(trace.q0) or trace.k != policy.k:
        raise ValueError("trace header is inconsistent (k vs q0 vs policy length)")
    for s in steps:
        if len(s.request) != trace.k or len(s.alg_config) != trace.k or len(s.adv_config) != trace.k:
            raise ValueError(f"step t={s.t}: configuration width differs from k={trace.k}")
    return trace
