"""Command line entry points.

Subcommands: ``attack`` runs a single seeded attack and writes the trace,
``bench`` executes an experiment spec file, ``verify`` runs the numerical
property suite, and ``serve-mock`` stands up the HTTP mock oracle. Runtime
failures exit 1 with a machine-readable JSON error on stderr; usage errors
exit 2.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .attack import AttackConfig, InitSpec, run_attack
from .harness import ExperimentSpec, run_experiment, table_to_csv, trace_to_jsonl
from .oracles import AttackGoal, OracleSpec, QueryLedger, diagonal_halfspace_spec, make_oracle
from .verification import PropertySuiteConfig, run_property_suite


def _parse_oracle_arg(arg: str) -> OracleSpec:
    """Accept either a JSON spec path or an inline ``kind:key=value,...`` form."""
    if ":" not in arg or Path(arg).exists():
        with open(arg) as f:
            return OracleSpec.from_dict(json.load(f))
    kind, _, rest = arg.partition(":")
    kv = {}
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            kv[key] = value
    dim = int(kv.pop("dim", 20))
    if kind == "halfspace":
        margin = float(kv.pop("margin", 0.5))
        spec = diagonal_halfspace_spec(dim, margin_at_center=margin)
    elif kind == "ball":
        rho = float(kv.pop("rho", 0.4))
        spec = OracleSpec(
            kind="ball", input_dimension=dim,
            params={"center": [0.5] * dim, "rho": rho}, name=f"ball-d{dim}",
        )
    else:
        raise ValueError(f"inline oracle form supports halfspace and ball, not {kind!r}")
    if kv:
        raise ValueError(f"unknown inline oracle keys: {sorted(kv)}")
    return spec


def _cmd_attack(args) -> int:
    spec = _parse_oracle_arg(args.oracle)
    oracle = make_oracle(spec, QueryLedger(budget=args.budget))
    lo, hi = spec.domain_bounds()

    if args.input:
        x = np.asarray(json.loads(Path(args.input).read_text()), dtype=float)
    else:
        x = 0.5 * (lo + hi)  # domain center; benign for the built-in specs
    shadow = make_oracle(spec, ledger=None)
    goal = AttackGoal("untargeted", true_label=shadow._label(x))

    config = AttackConfig(
        mode=args.mode, r=args.r, B0=args.B0, T=args.T,
        seed=args.seed, budget=args.budget, bs_tol=args.bs_tol,
    )
    init = InitSpec(strategy="random_blend", attempts=args.init_attempts)
    trace = run_attack(config, x, oracle, goal, init=init)

    out = Path(args.out)
    out.write_text(trace_to_jsonl(trace))
    summary = {
        "mode": config.mode, "seed": config.seed, "budget": args.budget,
        "oracle": spec.name, "queries": oracle.ledger.count,
        "succeeded": trace.succeeded, "final_l2": trace.final_l2,
        "final_linf": trace.final_linf, "trace": str(out),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_bench(args) -> int:
    spec = ExperimentSpec.from_json(args.spec)
    table, out_dir = run_experiment(spec, workers=args.workers)
    sys.stdout.write(table_to_csv(table))
    print(f"# artifacts in {out_dir}", file=sys.stderr)
    return 0


def _cmd_verify(args) -> int:
    cfg = PropertySuiteConfig(
        n_instances=args.instances, n_samples=args.samples, seed=args.seed,
    )
    results = run_property_suite(cfg)
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        detail = f"  ({res.detail})" if res.detail else ""
        print(f"{status}  {res.name}{detail}")
        failed += not res.passed
    return 1 if failed else 0


def _cmd_serve_mock(args) -> int:
    from .mock_server import MockOracleServer

    spec = _parse_oracle_arg(args.oracle)
    server = MockOracleServer(spec, port=args.port).start()
    print(json.dumps({"endpoint": server.endpoint}), flush=True)
    try:
        import threading

        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="hardlabel")
    parser.add_argument("--config", help="JSON file with defaults for the chosen subcommand")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers: dict = {}

    p = sub.add_parser("attack", help="run a single seeded attack")
    p.add_argument("--oracle", required=True, help="oracle spec JSON path or inline kind:key=value,...")
    p.add_argument("--mode", default="hemisphere", choices=["hemisphere", "semi_ellipsoid", "hsja_baseline"])
    p.add_argument("--r", type=float, default=1.5, help="semi-ellipsoid axis ratio")
    p.add_argument("--B0", type=int, default=100)
    p.add_argument("--T", type=int, default=10)
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--bs-tol", type=float, default=1e-4, dest="bs_tol")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-attempts", type=int, default=200, dest="init_attempts")
    p.add_argument("--input", help="JSON file with the benign point (defaults to the domain center)")
    p.add_argument("--out", default="trace.jsonl")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("bench", help="run an experiment spec file")
    p.add_argument("spec", help="ExperimentSpec JSON file")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("verify", help="run the numerical property suite")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--instances", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("serve-mock", help="serve a synthetic oracle over HTTP")
    p.add_argument("--oracle", required=True)
    p.add_argument("--port", type=int, default=0)
    p.set_defaults(func=_cmd_serve_mock)

    subparsers.update(sub.choices)
    return parser, subparsers


def _apply_config_file(args, subparser):
    """Fill defaults from the JSON config for flags not given on the line."""
    if not args.config:
        return args
    with open(args.config) as f:
        overrides = json.load(f)
    defaults = {a.dest: a.default for a in subparser._actions}
    for key, value in overrides.items():
        if key in defaults and getattr(args, key, None) == defaults[key]:
            setattr(args, key, value)
    return args


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config_file(args, subparsers[args.command])
        return args.func(args)
    except KeyboardInterrupt:
        return 130
    except Exception as e:  # noqa: BLE001 - contract: JSON error on stderr, exit 1
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
