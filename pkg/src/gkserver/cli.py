"""Command-line interface.

Subcommands: alpha, chain, system, simulate, verify, sweep.
Exit codes: 0 ok, 2 validation error, 3 solver failure, 4 step budget
exhausted before the phase budget, 5 verification violation.

Output is a human table on a TTY and CSV when redirected; --format
forces one of table/csv/json. Rationals serialize as "num/den" strings
so nothing is rounded on the way out.
"""

from __future__ import annotations

import argparse
import csv as _csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from math import factorial

from .chains import binary_chain, eet_oracle_table, eet_table, harmonic_chain
from .harmonic import alpha, alpha_bounds_check, rational_from_str, rational_to_str
from .potential import verify_trace
from .simulate import (
    ConfigError,
    ExperimentConfig,
    MetricSpec,
    estimate_ratio,
    read_trace_csv,
    run,
    write_trace_csv,
)
from .subsets import (
    MemorylessPolicy,
    SolverError,
    check_monotonicity,
    check_subset_alpha_bound,
    competitive_gap,
    lower_bound_hk,
    solve_system,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_BUDGET = 4
EXIT_VERIFY = 5

ALPHA_MAX_ELL = 64  # alpha(64) is ~90 digits; nothing beyond is ever exercised
CHAIN_MAX_K = 20
SWEEP_MAX_K = 8


def _pick_format(args) -> str:
    if args.format:
        return args.format
    return "table" if sys.stdout.isatty() else "csv"


def _emit(headers, rows, fmt: str, out_path: str | None) -> None:
    """Render rows as table/csv/json to stdout or --out."""
    if fmt == "json":
        text = json.dumps([dict(zip(headers, r)) for r in rows], indent=2, sort_keys=True)
    elif fmt == "csv":
        buf = io.StringIO()
        w = _csv.writer(buf, lineterminator="\n")
        w.writerow(headers)
        w.writerows(rows)
        text = buf.getvalue().rstrip("\n")
    else:
        cells = [[str(x) for x in r] for r in rows]
        widths = [max(len(h), *(len(c[i]) for c in cells)) if cells else len(h)
                  for i, h in enumerate(headers)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
        for c in cells:
            lines.append("  ".join(x.ljust(w) for x, w in zip(c, widths)))
        text = "\n".join(lines)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _emit_json(obj, out_path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _parse_policy(spec: str) -> MemorylessPolicy:
    try:
        probs = [rational_from_str(tok) for tok in spec.split(",")]
        return MemorylessPolicy.from_probs(probs)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad policy {spec!r}: {exc}") from exc


def _parse_tolerance(s: str) -> Fraction:
    try:
        return Fraction(s)
    except ValueError:
        return Fraction.from_float(float(s))


def cmd_alpha(args) -> int:
    if args.max < 1 or args.max > ALPHA_MAX_ELL:
        print(f"error: --max must be in 1..{ALPHA_MAX_ELL}, got {args.max}", file=sys.stderr)
        return EXIT_VALIDATION
    rows = []
    for ell in range(1, args.max + 1):
        rows.append((ell, alpha(ell), factorial(ell - 1), alpha_bounds_check(ell)))
    _emit(["ell", "alpha", "factorial", "bounds_ok"], rows, _pick_format(args), args.out)
    return EXIT_OK


def cmd_chain(args) -> int:
    if args.k < 1 or args.k > CHAIN_MAX_K:
        print(f"error: --k must be in 1..{CHAIN_MAX_K}, got {args.k}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.kind == "harmonic":
        chain = harmonic_chain(args.k)
    elif args.kind == "binary":
        chain = binary_chain(args.k)
    else:
        print(f"error: unknown chain kind {args.kind!r}", file=sys.stderr)
        return EXIT_VALIDATION
    closed = eet_table(chain, method="closed_form")
    oracle = eet_oracle_table(chain)
    rows = []
    for ell in range(args.k + 1):
        h = closed[ell]
        rows.append((args.k, ell, h.numerator, h.denominator, args.kind, h == oracle[ell]))
    _emit(["k", "ell", "h_num", "h_den", "chain_kind", "oracle_match"],
          rows, _pick_format(args), args.out)
    return EXIT_OK


def cmd_system(args) -> int:
    try:
        policy = _parse_policy(args.p)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    tolerance = _parse_tolerance(args.tolerance)
    try:
        sol = solve_system(policy, mode=args.mode, tolerance=tolerance)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    bound = lower_bound_hk(policy)
    gap = competitive_gap(policy, sol)
    mono = check_monotonicity(sol)
    alpha_bound = check_subset_alpha_bound(sol)
    summary = {
        "policy": policy.as_strs(),
        "k": policy.k,
        "mode": sol.mode,
        "h_k": rational_to_str(sol.h_k),
        "h_k_float": float(sol.h_k),
        "lower_bound": rational_to_str(bound),
        "gap": rational_to_str(gap),
        "gap_float": float(gap),
        "residual": rational_to_str(sol.max_residual),
        "iterations": sol.iterations,
        "monotonicity_violations": len(mono),
        "alpha_bound_violations": len(alpha_bound),
    }
    if args.csv:
        rows = [(mask, mask.bit_count(), sol.h[mask].numerator, sol.h[mask].denominator)
                for mask in range(1 << policy.k)]
        buf = io.StringIO()
        w = _csv.writer(buf, lineterminator="\n")
        w.writerow(["subset_mask", "subset_size", "h_num", "h_den"])
        w.writerows(rows)
        with open(args.csv, "w") as fh:
            fh.write(buf.getvalue())
    _emit_json(summary, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        config = ExperimentConfig.from_json_file(args.config)
        if args.seed is not None:
            d = config.to_dict()
            d["seed"] = args.seed
            config = ExperimentConfig.from_dict(d)
        if config.emit_trace and not config.trace_path:
            raise ConfigError("emit_trace is set but trace_path is missing from the config")
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    summary, trace = run(config)
    if trace is not None:
        write_trace_csv(trace, config.trace_path)
    out_path = args.out or config.summary_path
    _emit_json(summary.to_dict(), out_path)
    if summary.exhausted:
        print(
            f"error: step budget {config.max_steps} exhausted after "
            f"{summary.phases}/{config.phases} phases",
            file=sys.stderr,
        )
        return EXIT_BUDGET
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        trace = read_trace_csv(args.trace)
    except (ValueError, OSError) as exc:
        print(f"error: malformed trace: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        report = verify_trace(trace)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    _emit_json(report.to_dict(), args.out)
    return EXIT_OK if report.ok else EXIT_VERIFY


def _sweep_cell(payload):
    """One grid cell: solve exactly, optionally simulate. Runs in a worker."""
    policy_spec, k, phases, seed, index = payload
    try:
        policy = _parse_policy(policy_spec)
        if policy.k != k:
            raise ConfigError(f"policy {policy_spec!r} has {policy.k} entries, expected {k}")
    except ConfigError as exc:
        return {"policy": policy_spec, "status": f"rejected: {exc}", "h_k": "", "bound": "",
                "gap": "", "sim_ratio": ""}
    try:
        sol = solve_system(policy, mode="exact")
    except (SolverError, ValueError) as exc:
        return {"policy": policy_spec, "status": f"solver_failed: {exc}", "h_k": "",
                "bound": "", "gap": "", "sim_ratio": "", "_failed": True}
    bound = lower_bound_hk(policy)
    gap = competitive_gap(policy, sol)
    sim_ratio = ""
    if phases > 0:
        config = ExperimentConfig(
            spec=MetricSpec(n=tuple(3 for _ in range(k))), policy=policy,
            adversary="lower_bound", phases=phases, seed=seed + index,
        )
        ratio, _ = estimate_ratio(config)
        sim_ratio = f"{float(ratio):.6g}"
    return {
        "policy": ",".join(policy.as_strs()),
        "status": "ok",
        "h_k": rational_to_str(sol.h_k),
        "bound": rational_to_str(bound),
        "gap": rational_to_str(gap),
        "sim_ratio": sim_ratio,
    }


def cmd_sweep(args) -> int:
    if args.k < 1 or args.k > SWEEP_MAX_K:
        print(f"error: --k must be in 1..{SWEEP_MAX_K} for exact sweeps, got {args.k}",
              file=sys.stderr)
        return EXIT_VALIDATION
    specs = [tok.strip() for tok in args.grid.split(";") if tok.strip()]
    if not specs:
        print("error: empty policy grid", file=sys.stderr)
        return EXIT_VALIDATION
    payloads = [(spec, args.k, args.phases, args.seed or 0, i)
                for i, spec in enumerate(specs)]
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_cell, payloads))
    else:
        results = [_sweep_cell(p) for p in payloads]
    headers = ["policy", "h_k", "bound", "gap", "sim_ratio", "status"]
    rows = [tuple(r.get(h, "") for h in headers) for r in results]
    _emit(headers, rows, _pick_format(args), args.out)
    if any(r.get("_failed") for r in results):
        return EXIT_SOLVER
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gkserver",
        description="Memoryless policies for generalized k-server on uniform metrics: "
                    "exact hitting times, adversarial instances, seeded simulation.",
    )
    parser.add_argument("--format", choices=("table", "csv", "json"), default=None,
                        help="output format (default: table on a TTY, csv otherwise)")
    parser.add_argument("--out", default=None, help="write output to this file")
    parser.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for sweep")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("alpha", help="tabulate the harmonic recursion with bound checks")
    p.add_argument("--max", type=int, required=True, help=f"largest ell (1..{ALPHA_MAX_ELL})")
    p.set_defaults(func=cmd_alpha)

    p = sub.add_parser("chain", help="extinction-time table of a named birth-death chain")
    p.add_argument("kind", choices=("harmonic", "binary"))
    p.add_argument("--k", type=int, required=True, help=f"number of states (1..{CHAIN_MAX_K})")
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("system", help="solve the 2^k subset-state system for a policy")
    p.add_argument("--p", required=True, help="comma-separated rationals, e.g. 1/2,1/2")
    p.add_argument("--mode", choices=("exact", "iterative"), default="exact")
    p.add_argument("--tolerance", default="1/1000000000000",
                   help="iterative-mode residual target (rational or float literal)")
    p.add_argument("--csv", default=None, help="also dump all h(S) values to this CSV")
    p.set_defaults(func=cmd_system)

    p = sub.add_parser("simulate", help="run a seeded simulation from a JSON config")
    p.add_argument("config", help="path to the experiment config (JSON)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="audit a trace CSV against the potential argument")
    p.add_argument("trace", help="path to a trace CSV produced by simulate")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="solve + optionally simulate a grid of policies")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--grid", required=True,
                   help="semicolon-separated policies, e.g. '1/2,1/2;2/3,1/3'")
    p.add_argument("--phases", type=int, default=0,
                   help="simulation phases per cell (0 skips simulation)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
