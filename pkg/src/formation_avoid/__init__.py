"""MILP avoidance-trajectory planning for commercial aircraft formations.

Pipeline: parse a scenario (formation, intruders, performance envelope,
safety minima), assemble a mixed-integer linear program with big-M
disjunctive separation constraints, solve it on a pluggable backend, then
independently validate and report the resulting trajectories.
"""

from .formulation import build_model, expected_counts
from .lp_format import export_lp, parse_lp
from .milp import MilpModel, MilpParams, ModelError, VarKey
from .scenario import (AxisTriple, ConflictReport, PhysicsError, Scenario,
                       ScenarioError, SchemaError, TrajectorySet,
                       designated_positions, nominal_trajectory,
                       parse_scenario, predict_conflict, scenario_to_json)
from .solvers import (BackendUnavailable, Solution, SolutionStatus,
                      SolveOptions, SolverError, available_backends,
                      extract_trajectories, get_backend, solve)
from .traj_io import read_trajectory_csv, write_trajectory_csv
from .validation import (ObjectiveBreakdown, OracleResult, ValidationReport,
                         brute_force_plan, interpolated_min_separation,
                         recompute_objective, validate)

__version__ = "0.1.0"

__all__ = [
    "AxisTriple", "Scenario", "TrajectorySet", "ConflictReport",
    "ScenarioError", "SchemaError", "PhysicsError",
    "parse_scenario", "scenario_to_json", "nominal_trajectory",
    "predict_conflict", "designated_positions",
    "MilpModel", "MilpParams", "ModelError", "VarKey",
    "build_model", "expected_counts", "export_lp", "parse_lp",
    "SolveOptions", "Solution", "SolutionStatus", "SolverError",
    "BackendUnavailable", "available_backends", "get_backend", "solve",
    "extract_trajectories",
    "ValidationReport", "ObjectiveBreakdown", "OracleResult",
    "validate", "interpolated_min_separation", "brute_force_plan",
    "recompute_objective",
    "read_trajectory_csv", "write_trajectory_csv",
]
