#!/usr/bin/env python3
"""Desk-scale benchmark: the three step modes across three synthetic oracles.

Emits the budget table, per-run traces and plot data under the output
directory. Everything is seeded; rerunning reproduces identical files.
"""
import argparse

import numpy as np

from hardlabel.attack import AttackConfig, InitSpec
from hardlabel.harness import ExperimentSpec, InputSpec, run_experiment, table_to_csv
from hardlabel.oracles import OracleSpec, diagonal_halfspace_spec, make_mlp_weights


def build_spec(args) -> ExperimentSpec:
    dim = args.dim
    oracles = [
        diagonal_halfspace_spec(dim, margin_at_center=0.5),
        OracleSpec(kind="ball", input_dimension=dim,
                   params={"center": [0.5] * dim, "rho": 0.45}, name=f"ball-d{dim}"),
        OracleSpec(kind="quadric", input_dimension=dim,
                   params={"A": (np.eye(dim) / dim).tolist(),
                           "b": [0.0] * dim, "c": -0.45},
                   name=f"quadric-d{dim}"),
    ]
    methods = [
        AttackConfig(mode="hemisphere", B0=args.B0, T=args.T, name="tangent-hemisphere"),
        AttackConfig(mode="semi_ellipsoid", r=1.5, B0=args.B0, T=args.T, name="tangent-ellipsoid-r1.5"),
        AttackConfig(mode="hsja_baseline", B0=args.B0, T=args.T, name="jump-baseline"),
    ]
    return ExperimentSpec(
        oracles=oracles,
        methods=methods,
        inputs=InputSpec(kind="near_center", count=args.inputs, spread=0.3),
        init=InitSpec(strategy="random_blend", attempts=500),
        budgets=list(args.budgets),
        seed=args.seed,
        output_dir=args.out,
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--inputs", type=int, default=10)
    parser.add_argument("--B0", type=int, default=50)
    parser.add_argument("--T", type=int, default=12)
    parser.add_argument("--budgets", type=int, nargs="+", default=[300, 1000, 2000, 5000])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/flat_benchmark")
    args = parser.parse_args()

    table, out_dir = run_experiment(build_spec(args))
    print(table_to_csv(table))
    print(f"artifacts written to {out_dir}")


if __name__ == "__main__":
    main()
