#!/usr/bin/env python3
"""Ablation sweeps on synthetic oracles: four independent axes.

  ratio       axis ratio of the semi-ellipsoid, one series per value
  batch       initial probe batch size B0
  direction   tangent step versus straight jump at equal budgets
  init        initialization strategy (random blend vs pool nearest/farthest)

Each sweep writes its own results directory with a budget table and plot
series. The init sweep runs the attack directly because the strategies
need per-input pools.
"""
import argparse
import json
from pathlib import Path

import numpy as np

from hardlabel.attack import AttackConfig, InitSpec, run_attack
from hardlabel.harness import (
    ExperimentSpec,
    InputSpec,
    distortion_at_budget,
    run_experiment,
    table_to_csv,
)
from hardlabel.oracles import AttackGoal, QueryLedger, diagonal_halfspace_spec, make_oracle


def sweep_spec(name, methods, args):
    return ExperimentSpec(
        oracles=[diagonal_halfspace_spec(args.dim, margin_at_center=0.5)],
        methods=methods,
        inputs=InputSpec(kind="halfspace_margin", count=args.inputs, margin=(0.3, 0.6)),
        init=InitSpec(strategy="random_blend", attempts=500),
        budgets=list(args.budgets),
        seed=args.seed,
        output_dir=str(Path(args.out) / name),
    )


def run_ratio_sweep(args):
    methods = [
        AttackConfig(mode="semi_ellipsoid", r=r, B0=args.B0, T=args.T, name=f"ratio-{r}")
        for r in (1.0, 1.1, 1.5, 2.0, 3.0, 5.0, 10.0)
    ]
    table, out = run_experiment(sweep_spec("ratio", methods, args))
    print(table_to_csv(table))
    print(f"# ratio sweep artifacts in {out}\n")


def run_batch_sweep(args):
    methods = [
        AttackConfig(mode="hemisphere", B0=b0, T=args.T, name=f"B0-{b0}")
        for b0 in (5, 30, 100, 300)
    ]
    table, out = run_experiment(sweep_spec("batch", methods, args))
    print(table_to_csv(table))
    print(f"# batch-size sweep artifacts in {out}\n")


def run_direction_sweep(args):
    methods = [
        AttackConfig(mode="hemisphere", B0=args.B0, T=args.T, name="tangent-direction"),
        AttackConfig(mode="hsja_baseline", B0=args.B0, T=args.T, name="jump-direction"),
    ]
    table, out = run_experiment(sweep_spec("direction", methods, args))
    print(table_to_csv(table))
    print(f"# direction sweep artifacts in {out}\n")


def run_init_sweep(args):
    """Initialization strategies need a candidate pool, so this sweep drives
    run_attack directly and reports the distortion at the largest budget."""
    oracle_spec = diagonal_halfspace_spec(args.dim, margin_at_center=0.5)
    x = np.full(args.dim, 0.5)
    goal = AttackGoal("untargeted", true_label=0)
    budget = max(args.budgets)
    rng = np.random.default_rng(args.seed)
    lo, hi = oracle_spec.domain_bounds()
    shadow = make_oracle(oracle_spec, ledger=None)
    pool = []
    while len(pool) < 10:
        candidate = rng.uniform(lo, hi)
        if shadow.classify(candidate) == 1:
            pool.append(candidate)

    rows = {}
    strategies = {
        "random-blend": InitSpec(strategy="random_blend", attempts=500),
        "pool-nearest": InitSpec(strategy="nearest_of_pool", pool=pool),
        "pool-farthest": InitSpec(strategy="farthest_of_pool", pool=pool),
    }
    for name, init in strategies.items():
        finals = []
        for seed in range(args.inputs):
            oracle = make_oracle(oracle_spec, QueryLedger(budget=budget))
            config = AttackConfig(mode="hemisphere", B0=args.B0, T=args.T, seed=seed, budget=budget)
            trace = run_attack(config, x, oracle, goal, init=init)
            finals.append(distortion_at_budget(trace, budget))
        rows[name] = {"mean": float(np.mean(finals)), "median": float(np.median(finals))}

    out = Path(args.out) / "init"
    out.mkdir(parents=True, exist_ok=True)
    (out / "init_strategies.json").write_text(json.dumps(rows, indent=2, sort_keys=True))
    for name, stats in rows.items():
        print(f"init {name}: mean {stats['mean']:.4f}  median {stats['median']:.4f}")
    print(f"# init sweep artifacts in {out}\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("axes", nargs="*", default=["ratio", "batch", "direction", "init"],
                        choices=["ratio", "batch", "direction", "init"],
                        help="which sweeps to run (default: all)")
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--inputs", type=int, default=8)
    parser.add_argument("--B0", type=int, default=50)
    parser.add_argument("--T", type=int, default=10)
    parser.add_argument("--budgets", type=int, nargs="+", default=[300, 1000, 2000])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/ablations")
    args = parser.parse_args()

    dispatch = {
        "ratio": run_ratio_sweep,
        "batch": run_batch_sweep,
        "direction": run_direction_sweep,
        "init": run_init_sweep,
    }
    for axis in args.axes:
        dispatch[axis](args)


if __name__ == "__main__":
    main()
