"""Line-protocol oracle server: one JSON object per line on stdin/stdout.

Run as ``python -m hardlabel.stdio_oracle <oracle-spec.json>``. Each input
line ``{"input": [...]}`` is answered with ``{"label": int}``, the same
schema as the HTTP endpoint, so any external model can stand in as the
target without network setup.
"""
from __future__ import annotations

import json
import sys

import numpy as np

from .oracles import OracleSpec, make_oracle


def serve(spec: OracleSpec, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    oracle = make_oracle(spec, ledger=None)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            point = np.asarray(json.loads(line)["input"], dtype=float)
            reply = {"label": int(oracle._label(point))}
        except Exception as e:  # noqa: BLE001 - protocol errors go back as JSON
            reply = {"error": str(e)}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def main(argv=None) -> int:
    argv = argv if argv is not None else sys.argv[1:]
    if len(argv) != 1:
        print("usage: python -m hardlabel.stdio_oracle <oracle-spec.json>", file=sys.stderr)
        return 2
    with open(argv[0]) as f:
        spec = OracleSpec.from_dict(json.load(f))
    serve(spec)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
