"""Command-line entry point.

Subcommands: run (experiment grid), tau-sim (stopping-time Monte Carlo),
calibrate (accountant queries), audit (single-step DP audit).

Exit codes: 0 success, 2 configuration error, 3 regime violation,
4 statistically significant audit violation, 5 runtime overrun.
"""

import argparse
import json
import os
import secrets
import sys

from .errors import ConfigurationError, OverrunError, RegimeError
from .harness import build_spec, default_output_dir, experiment_dir, parse_kv_file, \
    run_and_write, run_tau_sim
from .privacy import audit_single_step, calibrate_sigma, end_to_end, from_target, \
    write_audit_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_AUDIT = 4
EXIT_OVERRUN = 5


def _resolve_seed(seed):
    # Reproducible mode needs an explicit --seed; otherwise draw one from
    # entropy and record it in every output.
    if seed is not None:
        return seed, True
    drawn = secrets.randbits(63)
    print(f"seed not given; drawn from entropy: {drawn}", file=sys.stderr)
    return drawn, False


def _cmd_run(args):
    overrides = {}
    if args.config:
        overrides.update(parse_kv_file(args.config))
    for key in ("name", "loss", "generator", "dimension", "feature_bound",
                "noise_rate", "w_true", "set", "radius", "lower", "upper",
                "n_values", "epsilon_values", "delta", "delta_prime", "repeats",
                "eval_samples", "baseline_steps", "sigma_override", "output_dir"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            overrides[key] = value
    seed, _ = _resolve_seed(args.seed if args.seed is not None
                            else overrides.get("seed"))
    overrides["seed"] = str(seed)
    spec = build_spec(overrides)
    result = run_and_write(spec)
    outdir = os.path.join(spec.output_dir, spec.name)
    print(json.dumps({"output_dir": outdir, "cells": len(result.cells),
                      "degraded": result.degraded}))
    return EXIT_OVERRUN if result.degraded else EXIT_OK


def _cmd_tau_sim(args):
    seed, _ = _resolve_seed(args.seed)
    n_values = [int(v) for v in args.n.split(",")]
    stats = run_tau_sim(n_values, args.trials, seed,
                        args.output_dir or default_output_dir(), name=args.name)
    print(json.dumps({"seed": seed, "results": [s.summary() for s in stats]}))
    return EXIT_OK


def _cmd_calibrate(args):
    target_group = args.eps_bar is not None or args.delta_bar is not None
    direct_group = args.eps is not None
    if target_group == direct_group:
        raise ConfigurationError(
            "provide either --eps (with --delta/--delta-prime) or "
            "--eps-bar/--delta-bar, not both"
        )
    payload = {}
    if target_group:
        if args.eps_bar is None or args.delta_bar is None or args.n is None:
            raise ConfigurationError("--eps-bar, --delta-bar and --n are all required")
        budget = from_target(args.eps_bar, args.delta_bar, args.n)
        payload["internal"] = budget.to_dict()
        eps, delta, delta_prime = budget.epsilon, budget.delta, budget.delta_prime
    else:
        if args.n is None or args.delta is None:
            raise ConfigurationError("--n and --delta are required with --eps")
        eps, delta = args.eps, args.delta
        delta_prime = args.delta_prime if args.delta_prime is not None else args.delta
    if args.L is not None and args.D is not None and args.d is not None:
        plan = end_to_end(args.n, eps, delta, delta_prime, args.L, args.D, args.d)
        payload.update(plan.to_dict())
    elif not target_group:
        raise ConfigurationError("--L, --D and --d are required with --eps")
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_audit(args):
    seed, _ = _resolve_seed(args.seed)
    if args.sigma is not None:
        sigma = args.sigma
    else:
        sigma = calibrate_sigma(args.L, args.delta, args.eps_tilde)
    result = audit_single_step(sigma, args.L, args.eps_tilde, args.delta,
                               args.trials, grid_cells=args.grid, seed=seed)
    outdir = experiment_dir(args.output_dir or default_output_dir(), args.name)
    write_audit_csv(result, os.path.join(outdir, "audit.csv"))
    summary = dict(result.to_dict(), sigma=sigma, seed=seed)
    with open(os.path.join(outdir, "audit_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(summary))
    return EXIT_AUDIT if result.significant else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dpmirror",
        description="Differentially private SGD: experiments, accounting, audits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment grid")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--seed", type=int)
    for flag in ("name", "loss", "generator", "set", "w-true", "lower", "upper",
                 "n-values", "epsilon-values", "output-dir"):
        run.add_argument(f"--{flag}", dest=flag.replace("-", "_"))
    for flag in ("dimension", "feature-bound", "noise-rate", "radius", "delta",
                 "delta-prime", "repeats", "eval-samples", "baseline-steps",
                 "sigma-override"):
        run.add_argument(f"--{flag}", dest=flag.replace("-", "_"))
    run.set_defaults(func=_cmd_run)

    tau = sub.add_parser("tau-sim", help="stopping-time Monte Carlo")
    tau.add_argument("--n", required=True, help="comma-separated dataset sizes")
    tau.add_argument("--trials", type=int, default=10_000)
    tau.add_argument("--seed", type=int)
    tau.add_argument("--name", default="tau-sim")
    tau.add_argument("--output-dir", dest="output_dir")
    tau.set_defaults(func=_cmd_tau_sim)

    cal = sub.add_parser("calibrate", help="accountant queries")
    cal.add_argument("--n", type=int)
    cal.add_argument("--eps", type=float)
    cal.add_argument("--delta", type=float)
    cal.add_argument("--delta-prime", dest="delta_prime", type=float)
    cal.add_argument("--L", type=float)
    cal.add_argument("--D", type=float)
    cal.add_argument("--d", type=int)
    cal.add_argument("--eps-bar", dest="eps_bar", type=float)
    cal.add_argument("--delta-bar", dest="delta_bar", type=float)
    cal.set_defaults(func=_cmd_calibrate)

    audit = sub.add_parser("audit", help="single-step DP audit")
    audit.add_argument("--sigma", type=float, help="noise scale (else calibrated)")
    audit.add_argument("--L", type=float, required=True)
    audit.add_argument("--eps-tilde", dest="eps_tilde", type=float, required=True)
    audit.add_argument("--delta", type=float, required=True)
    audit.add_argument("--trials", type=int, default=1_000_000)
    audit.add_argument("--grid", type=int, default=500)
    audit.add_argument("--seed", type=int)
    audit.add_argument("--name", default="audit")
    audit.add_argument("--output-dir", dest="output_dir")
    audit.set_defaults(func=_cmd_audit)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeError as exc:
        print(f"regime violation: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except OverrunError as exc:
        print(f"runtime overrun: {exc}", file=sys.stderr)
        return EXIT_OVERRUN


if __name__ == "__main__":
    sys.exit(main())
