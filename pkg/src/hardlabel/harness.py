"""Experiment orchestration: seeded ensembles, budget tables, file outputs.

An experiment is a grid of (oracle, method, input, repeat). Every run gets
its own oracle instance and ledger plus a seed derived from the experiment
seed, so reruns of the same spec are byte-identical. Results are reduced
to a budget table (mean and median best-so-far distortion at each budget
column, with pre-success sentinels excluded and counted) and written as
CSV, per-run JSONL traces, a metadata JSON, and optional plot-data files.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .attack import AttackConfig, AttackTrace, InitSpec, run_attack
from .oracles import AttackGoal, OracleSpec, QueryLedger, make_oracle

DEFAULT_BUDGETS = (300, 1000, 2000, 5000, 8000, 10000)
OUTPUT_DIR_ENV_VAR = "HARDLABEL_OUTPUT_DIR"

NO_RESULT = float("nan")  # rendered as "-" in CSV


class EmptyTraceError(Exception):
    pass


def is_no_result(value: float) -> bool:
    return isinstance(value, float) and math.isnan(value)


def distortion_at_budget(trace: AttackTrace, budget: int, norm: str = "l2") -> float:
    """Best-so-far distortion at the last recorded query index <= budget.

    Returns the no-result sentinel when the first adversarial point was
    only found after the budget.
    """
    if not trace.per_query:
        raise EmptyTraceError("trace holds no recorded events")
    if norm not in ("l2", "linf"):
        raise ValueError(f"unknown norm {norm!r}")
    ev = trace.best_event_at(budget)
    if ev is None:
        return NO_RESULT
    return ev.l2 if norm == "l2" else ev.linf


@dataclass
class CellStats:
    """Aggregates for one (oracle, method) cell across runs."""

    n_runs: int
    means: list
    medians: list
    excluded: list  # sentinel count per budget


@dataclass
class BudgetTable:
    budgets: list
    norm: str
    rows: dict = field(default_factory=dict)  # (oracle, method) -> CellStats

    def merge(self, other: "BudgetTable") -> "BudgetTable":
        if other.budgets != self.budgets or other.norm != self.norm:
            raise ValueError("cannot merge tables with different budgets or norms")
        merged = dict(self.rows)
        merged.update(other.rows)
        return BudgetTable(budgets=list(self.budgets), norm=self.norm, rows=merged)


def aggregate(traces, budgets, norm: str = "l2", oracle: str = "", method: str = "") -> BudgetTable:
    """Mean and median distortion per budget over traces of one cell.

    Sentinel values (budget hit before the first success) are excluded
    from both statistics; the per-budget exclusion count is reported.
    """
    budgets = list(budgets)
    means, medians, excluded = [], [], []
    for b in budgets:
        # A trace with no recorded success behaves like a sentinel at every
        # budget (the run never produced an adversarial point).
        vals = [distortion_at_budget(t, b, norm) if t.per_query else NO_RESULT for t in traces]
        ok = [v for v in vals if not is_no_result(v)]
        excluded.append(len(vals) - len(ok))
        means.append(float(np.mean(ok)) if ok else NO_RESULT)
        medians.append(float(np.median(ok)) if ok else NO_RESULT)
    table = BudgetTable(budgets=budgets, norm=norm)
    table.rows[(oracle, method)] = CellStats(
        n_runs=len(list(traces)), means=means, medians=medians, excluded=excluded
    )
    return table


def _fmt(value: float) -> str:
    return "-" if is_no_result(value) else repr(float(value))


def table_to_csv(table: BudgetTable) -> str:
    """Render the table; one mean, one median and one excluded row per cell."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["oracle", "method", "norm", "n_runs", "stat"] + [f"@{b}" for b in table.budgets])
    for (oracle, method), cell in table.rows.items():
        base = [oracle, method, table.norm, str(cell.n_runs)]
        writer.writerow(base + ["mean"] + [_fmt(v) for v in cell.means])
        writer.writerow(base + ["median"] + [_fmt(v) for v in cell.medians])
        writer.writerow(base + ["excluded"] + [str(c) for c in cell.excluded])
    return out.getvalue()


def parse_budget_table(text: str) -> BudgetTable:
    """Inverse of :func:`table_to_csv`."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    budgets = [int(h.lstrip("@")) for h in header[5:]]
    rows: dict = {}
    norm = "l2"
    partial: dict = {}
    for row in reader:
        oracle, method, norm, n_runs, stat = row[:5]
        values = row[5:]
        key = (oracle, method)
        entry = partial.setdefault(key, {"n_runs": int(n_runs)})
        if stat == "excluded":
            entry[stat] = [int(v) for v in values]
        else:
            entry[stat] = [NO_RESULT if v == "-" else float(v) for v in values]
    for key, entry in partial.items():
        rows[key] = CellStats(
            n_runs=entry["n_runs"], means=entry["mean"],
            medians=entry["median"], excluded=entry["excluded"],
        )
    return BudgetTable(budgets=budgets, norm=norm, rows=rows)


@dataclass
class InputSpec:
    """How benign inputs are produced for each oracle.

    ``halfspace_margin`` places points at a seeded random margin below a
    halfspace boundary with in-plane jitter, so the analytic optimum is
    known per input. ``uniform_benign`` rejection-samples uniform domain
    points the oracle labels benign; ``near_center`` does the same inside
    a small box around the domain center (benign regions concentrated near
    the center are unreachable by uniform draws in high dimension).
    ``file`` loads a JSON list of points.
    """

    kind: str = "halfspace_margin"
    count: int = 5
    margin: tuple = (0.25, 0.75)
    spread: float = 0.2
    path: str | None = None

    KINDS = ("halfspace_margin", "uniform_benign", "near_center", "file")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown input kind {self.kind!r}")
        if self.count < 1:
            raise ValueError("count must be at least 1")


def generate_inputs(input_spec: InputSpec, oracle_spec: OracleSpec, seed: int) -> list:
    rng = np.random.default_rng((seed, 17))
    lo, hi = oracle_spec.domain_bounds()
    dim = oracle_spec.input_dimension

    if input_spec.kind == "file":
        with open(input_spec.path) as f:
            return [np.asarray(p, dtype=float) for p in json.load(f)]

    if input_spec.kind == "halfspace_margin":
        if oracle_spec.kind != "halfspace":
            raise ValueError("halfspace_margin inputs need a halfspace oracle")
        w = np.asarray(oracle_spec.params["w"], dtype=float)
        w_unit = w / np.linalg.norm(w)
        b = float(oracle_spec.params["b"])
        center = 0.5 * (lo + hi)
        points = []
        jitter_room = 0.2 * float(np.min(hi - lo))
        for _ in range(input_spec.count):
            m = rng.uniform(*input_spec.margin)
            z = rng.uniform(-jitter_room, jitter_room, size=dim)
            z -= (z @ w_unit) * w_unit
            anchor = center + z
            # Slide along the normal until the point sits at margin m below the boundary.
            x = anchor + (b - m * np.linalg.norm(w) - float(w @ anchor)) * w / float(w @ w)
            x = np.clip(x, lo, hi)
            points.append(x)
        return points

    oracle = make_oracle(oracle_spec, ledger=None)
    if input_spec.kind == "near_center":
        center = 0.5 * (lo + hi)
        width = input_spec.spread * 0.5 * (hi - lo)
        draw = lambda: np.clip(center + rng.uniform(-width, width, size=dim), lo, hi)
    else:
        draw = lambda: rng.uniform(lo, hi)
    points = []
    for _ in range(input_spec.count):
        for _attempt in range(1000):
            x = draw()
            if oracle.classify(x) == 0:
                points.append(x)
                break
        else:
            raise RuntimeError("could not sample a benign input in 1000 draws")
    return points


@dataclass
class ExperimentSpec:
    oracles: list
    methods: list
    inputs: InputSpec = field(default_factory=InputSpec)
    init: InitSpec = field(default_factory=InitSpec)
    budgets: list = field(default_factory=lambda: list(DEFAULT_BUDGETS))
    norm: str = "l2"
    seed: int = 0
    runs_per_input: int = 1
    output_dir: str = "results"
    emit_plot_data: bool = True
    goal_kind: str = "untargeted"
    target_label: int | None = None

    def __post_init__(self):
        if list(self.budgets) != sorted(set(int(b) for b in self.budgets)):
            raise ValueError("budgets must be strictly increasing")
        if self.inputs.count < 1:
            raise ValueError("need at least one input")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        oracles = [OracleSpec.from_dict(o) for o in d["oracles"]]
        methods = [AttackConfig.from_dict(m) for m in d["methods"]]
        inputs = InputSpec(**d.get("inputs", {}))
        init_d = dict(d.get("init", {}))
        if isinstance(init_d.get("point"), list):
            init_d["point"] = np.asarray(init_d["point"], dtype=float)
        init = InitSpec(**init_d)
        return cls(
            oracles=oracles, methods=methods, inputs=inputs, init=init,
            budgets=list(d.get("budgets", DEFAULT_BUDGETS)),
            norm=d.get("norm", "l2"), seed=d.get("seed", 0),
            runs_per_input=d.get("runs_per_input", 1),
            output_dir=d.get("output_dir", "results"),
            emit_plot_data=d.get("emit_plot_data", True),
            goal_kind=d.get("goal_kind", "untargeted"),
            target_label=d.get("target_label"),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        init_point = self.init.point
        return {
            "oracles": [o.to_dict() for o in self.oracles],
            "methods": [m.to_dict() for m in self.methods],
            "inputs": {
                "kind": self.inputs.kind, "count": self.inputs.count,
                "margin": list(self.inputs.margin), "spread": self.inputs.spread,
                "path": self.inputs.path,
            },
            "init": {
                "strategy": self.init.strategy,
                "point": None if init_point is None else (
                    init_point if isinstance(init_point, str) else np.asarray(init_point).tolist()
                ),
                "pool": None if self.init.pool is None else [np.asarray(p).tolist() for p in self.init.pool],
                "attempts": self.init.attempts,
            },
            "budgets": list(self.budgets), "norm": self.norm, "seed": self.seed,
            "runs_per_input": self.runs_per_input, "output_dir": self.output_dir,
            "emit_plot_data": self.emit_plot_data,
            "goal_kind": self.goal_kind, "target_label": self.target_label,
        }


def _run_seed(base_seed: int, *indices: int) -> int:
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=tuple(indices))
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2**63))


def _resolve_init(init: InitSpec, oracle_spec: OracleSpec) -> InitSpec:
    """Expand symbolic init points ("domain_upper"/"domain_lower") per oracle."""
    if isinstance(init.point, str):
        lo, hi = oracle_spec.domain_bounds()
        if init.point == "domain_upper":
            point = hi.copy()
        elif init.point == "domain_lower":
            point = lo.copy()
        else:
            raise ValueError(f"unknown symbolic init point {init.point!r}")
        return InitSpec(strategy=init.strategy, point=point, pool=init.pool, attempts=init.attempts)
    return init


def trace_to_jsonl(trace: AttackTrace) -> str:
    """One JSON object per recorded query event, deterministic formatting."""
    lines = []
    for ev in trace.per_query:
        lines.append(json.dumps(
            {"query": ev.query_index, "l2": ev.l2, "linf": ev.linf, "point": ev.point.tolist()},
            sort_keys=True,
        ))
    return "\n".join(lines) + ("\n" if lines else "")


def _execute_run(task):
    spec, o_spec, method, x, seed, init = task
    budget = method.budget if method.budget is not None else max(spec.budgets)
    config = replace(method, seed=seed, budget=budget)
    shadow = make_oracle(o_spec, ledger=None)
    true_label = shadow.classify(np.asarray(x, dtype=float))
    if spec.goal_kind == "targeted":
        goal = AttackGoal("targeted", true_label=true_label, target_label=spec.target_label)
    else:
        goal = AttackGoal("untargeted", true_label=true_label)
    oracle = make_oracle(o_spec, QueryLedger(budget=budget))
    trace = run_attack(config, x, oracle, goal, init=init)
    return trace, oracle.ledger.count


def run_experiment(spec: ExperimentSpec, workers: int = 1):
    """Run the whole grid and write all artifacts; returns (table, out_dir).

    Per-run failures are recorded in the metadata and do not abort the
    ensemble. Identical spec and seed produce byte-identical CSV and JSONL
    outputs; wall time lives only in the metadata file.
    """
    out_dir = Path(os.environ.get(OUTPUT_DIR_ENV_VAR) or spec.output_dir)
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()

    tasks = []
    for oi, o_spec in enumerate(spec.oracles):
        inputs = generate_inputs(spec.inputs, o_spec, _run_seed(spec.seed, oi))
        init = _resolve_init(spec.init, o_spec)
        for mi, method in enumerate(spec.methods):
            for ii, x in enumerate(inputs):
                for rep in range(spec.runs_per_input):
                    seed = _run_seed(spec.seed, oi, mi, ii, rep)
                    run_id = f"{o_spec.name}__{method.name}__i{ii}_r{rep}"
                    tasks.append((run_id, (oi, mi), (spec, o_spec, method, x, seed, init)))

    outcomes = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {run_id: pool.submit(_execute_run, task) for run_id, _, task in tasks}
        for run_id, _, _ in tasks:
            try:
                outcomes[run_id] = ("ok", futures[run_id].result())
            except Exception as e:  # noqa: BLE001 - surfaced in metadata
                outcomes[run_id] = ("error", e)
    else:
        for run_id, _, task in tasks:
            try:
                outcomes[run_id] = ("ok", _execute_run(task))
            except Exception as e:  # noqa: BLE001 - surfaced in metadata
                outcomes[run_id] = ("error", e)

    cell_traces: dict = {}
    run_meta = []
    for run_id, cell_key, task in tasks:
        status, payload = outcomes[run_id]
        entry = {"run_id": run_id, "seed": task[4], "oracle": task[1].name, "method": task[2].name}
        if status == "ok":
            trace, queries = payload
            cell_traces.setdefault(cell_key, []).append(trace)
            trace_path = runs_dir / f"{run_id}.trace.jsonl"
            trace_path.write_text(trace_to_jsonl(trace))
            entry.update(
                succeeded=trace.succeeded, total_queries=queries,
                final_l2=trace.final_l2 if trace.per_query else None,
                final_linf=trace.final_linf if trace.per_query else None,
                trace_file=str(trace_path.relative_to(out_dir)), error=None,
            )
        else:
            entry.update(succeeded=False, error=f"{type(payload).__name__}: {payload}")
        run_meta.append(entry)

    table = BudgetTable(budgets=list(spec.budgets), norm=spec.norm)
    for oi, o_spec in enumerate(spec.oracles):
        for mi, method in enumerate(spec.methods):
            traces = cell_traces.get((oi, mi), [])
            if traces:
                cell = aggregate(traces, spec.budgets, spec.norm, o_spec.name, method.name)
                table = table.merge(cell)

    csv_text = table_to_csv(table)
    (out_dir / "results.csv").write_text(csv_text)

    if spec.emit_plot_data:
        plots_dir = out_dir / "plots"
        plots_dir.mkdir(exist_ok=True)
        grid = _plot_grid(max(spec.budgets))
        for oi, o_spec in enumerate(spec.oracles):
            for mi, method in enumerate(spec.methods):
                traces = cell_traces.get((oi, mi), [])
                if not traces:
                    continue
                lines = ["query,mean_distortion"]
                for q in grid:
                    vals = [distortion_at_budget(t, q, spec.norm) if t.per_query else NO_RESULT
                            for t in traces]
                    ok = [v for v in vals if not is_no_result(v)]
                    lines.append(f"{q},{_fmt(float(np.mean(ok))) if ok else '-'}")
                (plots_dir / f"{o_spec.name}__{method.name}.csv").write_text("\n".join(lines) + "\n")

    metadata = {
        "spec": spec.to_dict(),
        "runs": run_meta,
        "csv_sha256": _sha256_text(csv_text),
        "wall_time_s": time.time() - started,
    }
    (out_dir / "metadata.json").write_text(json.dumps(metadata, indent=2, sort_keys=True))
    return table, out_dir


def _plot_grid(max_budget: int, points: int = 100) -> list:
    step = max(1, max_budget // points)
    return list(range(step, max_budget + 1, step))


def _sha256_text(text: str) -> str:
    import hashlib

    return hashlib.sha256(text.encode()).hexdigest()
