"""Command line interface: validate, run, check, report."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import experiment
from .experiment import (
    ExperimentConfig,
    ValidationError,
    batch_from_records,
    emit_report,
    load_config,
    read_trials_csv,
    run_batch,
    run_checks,
    validate,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    parser.add_argument("--seed", type=int, default=None, help="override base seed")
    parser.add_argument("--alpha", type=float, default=None, help="override tail index")
    parser.add_argument("--n", type=int, default=None, help="override n grid with a single n")
    parser.add_argument("--replicates", type=int, default=None, help="override replicate count")
    parser.add_argument("--slack", type=float, default=None, help="override envelope slack")
    parser.add_argument("--z", type=float, default=None, help="override envelope z factor")


def _load(args) -> ExperimentConfig:
    config = load_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.alpha is not None:
        updates["model"] = dataclasses.replace(config.model, alpha=args.alpha)
    if args.n is not None:
        updates["n_values"] = (args.n,)
    if args.replicates is not None:
        updates["replicates"] = args.replicates
    if args.slack is not None:
        updates["slack"] = args.slack
    if args.z is not None:
        updates["z"] = args.z
    return dataclasses.replace(config, **updates) if updates else config


def _cmd_validate(args) -> int:
    config = _load(args)
    worst = 0
    for n in config.n_values:
        p = config.rule.p_for(n)
        report = validate(config.template.spec(p, n, config.seed), config.rule)
        print(f"n={n} p={p}")
        for line in report.lines():
            print("  " + line)
        if not report.ok:
            worst = 1
    print("admissible" if worst == 0 else "NOT admissible")
    return worst


def _cmd_run(args) -> int:
    config = _load(args)
    try:
        batch = run_batch(
            config.template,
            config.rule,
            config.n_values,
            config.replicates,
            config.seed,
            workers=args.workers,
            top_k=config.top_k,
        )
    except ValidationError as err:
        print(str(err), file=sys.stderr)
        return 1
    checks = run_checks(batch, config)
    paths = emit_report(batch, checks, args.out)
    print(f"wrote {paths['trials']}")
    print(f"wrote {paths['checks']}")
    print(f"overall: {'pass' if checks['overall_passed'] else 'FAIL'}")
    return 0 if checks["overall_passed"] else 2


def _cmd_check(args) -> int:
    config = _load(args)
    trials_path = os.path.join(args.out, "trials.csv")
    records = read_trials_csv(trials_path)
    if not records:
        print(f"no records in {trials_path}", file=sys.stderr)
        return 1
    batch = batch_from_records(config, records)
    checks = run_checks(batch, config)
    checks_path = os.path.join(args.out, "checks.json")
    with open(checks_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(experiment._jsonify(checks), indent=2) + "\n")
    print(f"wrote {checks_path}")
    print(f"overall: {'pass' if checks['overall_passed'] else 'FAIL'}")
    return 0 if checks["overall_passed"] else 2


def _cmd_report(args) -> int:
    config = _load(args)
    records = read_trials_csv(os.path.join(args.out, "trials.csv"))
    batch = batch_from_records(config, records)
    print(f"model: {config.model.family} alpha={config.model.alpha} scale={config.model.scale}")
    print(f"filter: c={list(config.filter.c.values)} theta={list(config.filter.theta.values)}")
    print(f"{'n':>6} {'p':>5} {'count':>6} {'median scaled_norm':>20} {'median offdiag':>15}")
    for n in sorted(batch.n_values):
        recs = batch.records_at(n)
        if not recs:
            continue
        sn = float(np.median([r.scaled_norm for r in recs]))
        od = float(np.median([r.offdiag_dev for r in recs]))
        print(f"{n:>6} {recs[0].p:>5} {len(recs):>6} {sn:>20.6g} {od:>15.6g}")
    checks_path = os.path.join(args.out, "checks.json")
    if os.path.exists(checks_path):
        with open(checks_path, encoding="utf-8") as fh:
            checks = json.load(fh)
        print("checks:")
        for name in ("envelope", "ks", "order_stats", "offdiag"):
            c = checks.get(name, {})
            if not c.get("enabled"):
                status = "disabled"
            elif not c.get("applicable"):
                status = "n/a"
            else:
                status = "pass" if c.get("passed") else "FAIL"
            print(f"  {name:12s} {status}")
        print(f"overall: {'pass' if checks.get('overall_passed') else 'FAIL'}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="heavyspec",
        description="Monte Carlo harness for spectral norms of heavy-tailed filtered panels",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("validate", _cmd_validate),
        ("run", _cmd_run),
        ("check", _cmd_check),
        ("report", _cmd_report),
    ):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
