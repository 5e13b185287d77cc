"""Hard-label black-box attack toolkit built on tangent-point geometry."""

from .attack import AttackConfig, AttackTrace, InitSpec, run_attack
from .geometry import (
    PlaneBasis,
    TangentSolution,
    feasibility_check,
    plane_basis,
    project_onto_hyperplane,
    tangent_point_hemisphere,
    tangent_point_semi_ellipsoid,
)
from .harness import BudgetTable, ExperimentSpec, InputSpec, aggregate, distortion_at_budget, run_experiment
from .oracles import AttackGoal, OracleSpec, QueryLedger, make_oracle, phi
from .verification import brute_force_min_distance, brute_force_tangent, intersect_line_hyperplane

__all__ = [
    "AttackConfig",
    "AttackGoal",
    "AttackTrace",
    "BudgetTable",
    "ExperimentSpec",
    "InitSpec",
    "InputSpec",
    "OracleSpec",
    "PlaneBasis",
    "QueryLedger",
    "TangentSolution",
    "aggregate",
    "brute_force_min_distance",
    "brute_force_tangent",
    "distortion_at_budget",
    "feasibility_check",
    "intersect_line_hyperplane",
    "make_oracle",
    "phi",
    "plane_basis",
    "project_onto_hyperplane",
    "run_attack",
    "run_experiment",
    "tangent_point_hemisphere",
    "tangent_point_semi_ellipsoid",
]
