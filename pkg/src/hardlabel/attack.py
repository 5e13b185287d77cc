"""The iterative hard-label attack built on tangent-point stepping.

One run is: find any adversarial point, binary-search it onto the decision
boundary, then loop. Each iteration estimates the boundary normal from a
batch of probe queries, jumps to the tangent point of a virtual hemisphere
(or semi-ellipsoid) around the boundary sample, halving the radius until
the tangent point is adversarial, and binary-searches back to the
boundary. A plain jump along the estimated normal is kept as the baseline
mode so direction choices can be compared under equal budgets.

Everything is driven by one seeded generator per run: identical config and
seed reproduce the trace byte for byte.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry
from .geometry import (
    DegenerateDirectionError,
    InfeasibleEllipseError,
    InfeasibleRadiusError,
    NotOutsideBallError,
)
from .oracles import AttackGoal, BudgetExhaustedError, Oracle, QueryLedger, phi

MODES = ("hemisphere", "semi_ellipsoid", "hsja_baseline")


class AttackError(Exception):
    pass


class InitFailedError(AttackError):
    """No adversarial starting point could be produced."""


class StepFailedError(AttackError):
    """Radius halving ran out before finding an adversarial candidate."""


class ZeroEstimateError(AttackError):
    """The gradient estimate degenerated to the zero vector."""


@dataclass
class AttackConfig:
    """Knobs of one attack run.

    ``r`` is the axis ratio of the semi-ellipsoid mode (height radius over
    in-plane radius, at least 1); ``B0`` the probe count of the first
    iteration, grown as ``round(B0 * sqrt(t))``; ``bs_tol`` the absolute
    gap at which the boundary binary search stops; ``probe_delta`` the
    probe offset (dimension-scaled from the current distortion when None).
    """

    mode: str = "hemisphere"
    r: float = 1.5
    B0: int = 100
    T: int = 10
    bs_tol: float = 1e-4
    max_halvings: int = 15
    min_radius: float = 1e-8
    probe_delta: float | None = None
    seed: int = 0
    budget: int | None = None
    norm_report: str = "both"  # "l2" | "linf" | "both"
    name: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.B0 < 1 or self.T < 1:
            raise ValueError("B0 and T must be at least 1")
        if self.r < 1.0:
            raise ValueError("radius ratio r must be at least 1")
        if self.bs_tol <= 0.0:
            raise ValueError("bs_tol must be positive")
        if self.norm_report not in ("l2", "linf", "both"):
            raise ValueError(f"unknown norm_report {self.norm_report!r}")
        if not self.name:
            self.name = self.mode

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "r": self.r, "B0": self.B0, "T": self.T,
            "bs_tol": self.bs_tol, "max_halvings": self.max_halvings,
            "min_radius": self.min_radius, "probe_delta": self.probe_delta,
            "seed": self.seed, "budget": self.budget,
            "norm_report": self.norm_report, "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttackConfig":
        return cls(**d)


@dataclass
class InitSpec:
    """How to produce the first adversarial point.

    ``random_blend`` blends the input toward fresh uniform noise with a
    weight that ramps up across attempts; ``provided_point`` verifies and
    returns a given point; the pool strategies scan candidate points in
    order of their distance to the input.
    """

    strategy: str = "random_blend"
    point: np.ndarray | None = None
    pool: list | None = None
    attempts: int = 200

    STRATEGIES = ("random_blend", "provided_point", "nearest_of_pool", "farthest_of_pool")

    def __post_init__(self):
        if self.strategy not in self.STRATEGIES:
            raise ValueError(f"unknown init strategy {self.strategy!r}")


@dataclass
class TraceEvent:
    query_index: int
    l2: float
    linf: float
    point: np.ndarray


@dataclass
class IterationStat:
    t: int
    R_initial: float
    halvings: int
    B_t: int
    d_t: float
    grad_queries: int
    step_queries: int
    bs_queries: int
    step_failed: bool = False


@dataclass
class AttackTrace:
    """Per-query best-so-far distortion log plus per-iteration bookkeeping.

    ``per_query`` holds the change points of the best-so-far curve: one
    event per improvement, at the ledger count where the improving point
    was confirmed adversarial. Every recorded point satisfies the goal.
    """

    per_query: list = field(default_factory=list)
    per_iteration: list = field(default_factory=list)
    final_point: np.ndarray | None = None
    succeeded: bool = False
    init_queries: int = 0
    boundary_queries: int = 0
    total_queries: int = 0

    def best_event_at(self, budget: int) -> TraceEvent | None:
        best = None
        for ev in self.per_query:
            if ev.query_index <= budget:
                best = ev
            else:
                break
        return best

    @property
    def final_l2(self) -> float:
        return self.per_query[-1].l2 if self.per_query else math.inf

    @property
    def final_linf(self) -> float:
        return self.per_query[-1].linf if self.per_query else math.inf


def initialize_adversarial(x, oracle: Oracle, goal: AttackGoal, rng, init: InitSpec) -> np.ndarray:
    """Produce a point the oracle labels as a success for ``goal``."""
    x = np.asarray(x, dtype=float)
    lo, hi = oracle.spec.domain_bounds()

    if init.strategy == "provided_point":
        if init.point is None:
            raise InitFailedError("provided_point strategy needs a point")
        p = np.asarray(init.point, dtype=float)
        if phi(oracle.classify(p), goal) != 1:
            raise InitFailedError("provided point is not adversarial")
        return p

    if init.strategy in ("nearest_of_pool", "farthest_of_pool"):
        if not init.pool:
            raise InitFailedError("pool strategy needs a non-empty pool")
        pool = [np.asarray(p, dtype=float) for p in init.pool]
        dists = [float(np.linalg.norm(p - x)) for p in pool]
        order = np.argsort(dists, kind="stable")
        if init.strategy == "farthest_of_pool":
            order = order[::-1]
        for idx in order:
            if phi(oracle.classify(pool[idx]), goal) == 1:
                return pool[idx]
        raise InitFailedError("no pool point is adversarial")

    # random_blend: blend toward fresh uniform noise, ramping the blend
    # weight up so late attempts degenerate to pure noise.
    ramp = max(1, init.attempts // 4)
    for attempt in range(init.attempts):
        noise = rng.uniform(lo, hi)
        weight = min(1.0, (attempt + 1) / ramp)
        candidate = (1.0 - weight) * x + weight * noise
        if phi(oracle.classify(candidate), goal) == 1:
            return candidate
    raise InitFailedError(f"no adversarial point found in {init.attempts} attempts")


def binary_search_boundary(x, x_adv, oracle: Oracle, goal: AttackGoal, bs_tol: float) -> np.ndarray:
    """Map an adversarial point onto the boundary of the adversarial region.

    Bisects the segment from the benign ``x`` to ``x_adv`` until the
    bracket is shorter than ``bs_tol`` and returns the adversarial end of
    the bracket, so the result always satisfies the goal.
    """
    x = np.asarray(x, dtype=float)
    x_adv = np.asarray(x_adv, dtype=float)
    gap = float(np.linalg.norm(x_adv - x))
    if gap <= bs_tol:
        return x_adv
    lo, hi = 0.0, 1.0  # blend weights; hi side is adversarial
    while (hi - lo) * gap > bs_tol:
        mid = 0.5 * (lo + hi)
        p = (1.0 - mid) * x + mid * x_adv
        if phi(oracle.classify(p), goal) == 1:
            hi = mid
        else:
            lo = mid
    return (1.0 - hi) * x + hi * x_adv


def estimate_gradient(x_b, oracle: Oracle, goal: AttackGoal, B_t: int, delta: float, rng) -> np.ndarray:
    """Monte-Carlo estimate of the boundary normal at a boundary point.

    Draws ``B_t`` directions uniformly on the unit sphere, probes the
    oracle at ``clip(x_b + delta * dir)``, and averages the directions
    weighted by the centered success indicator. When every probe agrees
    the mean direction (sign-flipped if all probes failed) is used
    instead. Consumes exactly ``B_t`` queries.
    """
    x_b = np.asarray(x_b, dtype=float)
    n = x_b.shape[0]
    dirs = rng.standard_normal((int(B_t), n))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    outcomes = np.empty(int(B_t))
    for i in range(int(B_t)):
        probe = oracle.clip(x_b + delta * dirs[i])
        outcomes[i] = phi(oracle.classify(probe), goal)
    mean = float(outcomes.mean())
    if mean == 1.0:
        g = dirs.sum(axis=0)
    elif mean == 0.0:
        g = -dirs.sum(axis=0)
    else:
        g = ((outcomes - mean)[:, None] * dirs).sum(axis=0)
    norm = float(np.linalg.norm(g))
    if norm == 0.0:
        raise ZeroEstimateError("probe outcomes cancelled exactly; retry with a larger delta")
    return g / norm


def tangent_step(x, x_prev, u, oracle: Oracle, goal: AttackGoal, mode: str, r: float,
                 d_prev: float, t: int, max_halvings: int, min_radius: float):
    """Jump to the first adversarial tangent point, halving the radius on failure.

    Starts at radius ``d_prev / sqrt(t)``. Each candidate is solved at the
    current radius, clipped to the domain, and tested; both a failed test
    and a geometrically infeasible radius trigger a halving. With ratio 1
    the semi-ellipsoid degenerates to the hemisphere exactly, so that case
    is routed to the hemisphere solver and the two modes produce identical
    arithmetic. Returns ``(point, halvings, radius_used)``.
    """
    x = np.asarray(x, dtype=float)
    x_prev = np.asarray(x_prev, dtype=float)
    radius = d_prev / math.sqrt(t)
    halvings = 0
    while True:
        if radius < min_radius:
            raise StepFailedError(f"radius {radius!r} fell below min_radius")
        try:
            if mode == "hemisphere" or r == 1.0:
                sol = geometry.tangent_point_hemisphere(x, x_prev, u, radius)
            else:
                sol = geometry.tangent_point_semi_ellipsoid(x, x_prev, u, radius, radius / r)
            candidate = oracle.clip(sol.k)
            if phi(oracle.classify(candidate), goal) == 1:
                return candidate, halvings, radius
        except (InfeasibleRadiusError, InfeasibleEllipseError, NotOutsideBallError):
            pass  # shrink and retry, same as a failed test
        if halvings >= max_halvings:
            raise StepFailedError(f"no adversarial tangent point after {halvings} halvings")
        radius *= 0.5
        halvings += 1


def hsja_jump_step(x, x_prev, u, oracle: Oracle, goal: AttackGoal,
                   d_prev: float, t: int, max_halvings: int, min_radius: float = 0.0):
    """Baseline jump straight along the estimated normal, halving the step.

    Mirrors the geometric-progression step of the boundary-walking
    baseline; comparisons against :func:`tangent_step` under equal budgets
    isolate the direction choice. Returns ``(point, halvings, step_used)``.
    """
    x_prev = np.asarray(x_prev, dtype=float)
    step = d_prev / math.sqrt(t)
    halvings = 0
    while True:
        if step < min_radius:
            raise StepFailedError(f"step {step!r} fell below min_radius")
        candidate = oracle.clip(x_prev + step * u)
        if phi(oracle.classify(candidate), goal) == 1:
            return candidate, halvings, step
        if halvings >= max_halvings:
            raise StepFailedError(f"no adversarial jump after {halvings} halvings")
        step *= 0.5
        halvings += 1


def run_attack(config: AttackConfig, x, oracle: Oracle, goal: AttackGoal,
               init: InitSpec | None = None, gradient_fn=None) -> AttackTrace:
    """Full attack loop; returns the per-query trace.

    ``gradient_fn(x_b, t, rng) -> unit vector`` replaces the Monte-Carlo
    estimator when given (used to study the geometry with the true normal
    injected). The trace is finalized cleanly when the ledger budget runs
    out mid-flight. Step failures degrade to no-op iterations.
    """
    init = init or InitSpec()
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(config.seed)
    if oracle.ledger is None:
        oracle.ledger = QueryLedger(budget=config.budget)
    ledger = oracle.ledger
    trace = AttackTrace()
    best = {"l2": math.inf, "point": None}

    def record(point):
        l2 = float(np.linalg.norm(point - x))
        if l2 < best["l2"]:
            linf = float(np.max(np.abs(point - x)))
            best["l2"] = l2
            best["point"] = np.array(point, dtype=float)
            trace.per_query.append(TraceEvent(ledger.count, l2, linf, best["point"].copy()))

    try:
        if phi(oracle.classify(x), goal) == 1:
            raise InitFailedError("input already satisfies the attack goal")
        x_adv = initialize_adversarial(x, oracle, goal, rng, init)
        trace.succeeded = True
        record(x_adv)
        trace.init_queries = ledger.count

        boundary = binary_search_boundary(x, x_adv, oracle, goal, config.bs_tol)
        trace.boundary_queries = ledger.count - trace.init_queries
        record(boundary)
        d_prev = float(np.linalg.norm(boundary - x))
        n = x.shape[0]

        for t in range(1, config.T + 1):
            B_t = int(round(config.B0 * math.sqrt(t)))
            delta = config.probe_delta if config.probe_delta is not None else d_prev / math.sqrt(n)
            marker = ledger.count
            if gradient_fn is not None:
                u = np.asarray(gradient_fn(boundary, t, rng), dtype=float)
            else:
                try:
                    u = estimate_gradient(boundary, oracle, goal, B_t, delta, rng)
                except ZeroEstimateError:
                    try:
                        u = estimate_gradient(boundary, oracle, goal, B_t, 10.0 * delta, rng)
                    except ZeroEstimateError:
                        u = None  # degrade to a no-op iteration
            grad_queries = ledger.count - marker

            marker = ledger.count
            R_initial = d_prev / math.sqrt(t)
            step_failed = False
            halvings = 0
            try:
                if u is None:
                    raise StepFailedError("no usable direction estimate")
                if config.mode == "hsja_baseline":
                    candidate, halvings, _ = hsja_jump_step(
                        x, boundary, u, oracle, goal, d_prev, t,
                        config.max_halvings, config.min_radius)
                else:
                    try:
                        candidate, halvings, _ = tangent_step(
                            x, boundary, u, oracle, goal, config.mode, config.r,
                            d_prev, t, config.max_halvings, config.min_radius)
                    except DegenerateDirectionError:
                        # No 2-plane exists; fall back to a direct jump.
                        candidate, halvings, _ = hsja_jump_step(
                            x, boundary, u, oracle, goal, d_prev, t,
                            config.max_halvings, config.min_radius)
            except StepFailedError:
                step_failed = True
                candidate = None
            step_queries = ledger.count - marker

            marker = ledger.count
            if candidate is not None:
                record(candidate)
                boundary = binary_search_boundary(x, candidate, oracle, goal, config.bs_tol)
                record(boundary)
                d_prev = float(np.linalg.norm(boundary - x))
            bs_queries = ledger.count - marker

            trace.per_iteration.append(IterationStat(
                t=t, R_initial=R_initial, halvings=halvings, B_t=B_t, d_t=d_prev,
                grad_queries=grad_queries, step_queries=step_queries,
                bs_queries=bs_queries, step_failed=step_failed))
    except BudgetExhaustedError:
        pass  # budget ran dry; the trace below stays valid

    trace.final_point = best["point"]
    trace.total_queries = ledger.count
    return trace
