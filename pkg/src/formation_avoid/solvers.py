"""Pluggable MILP backends and solution extraction.

Two engines ship by default: "scipy" (HiGHS branch-and-cut through
scipy.optimize.milp, the primary engine) and "glpk" (GLPK through cvxopt,
used as an independent cross-check on small models).  Backends register in
a module-level table; selection order is an explicit argument, then the
FORMATION_MILP_BACKEND environment variable, then the first available
entry.
"""

from __future__ import annotations

import abc
import math
import os
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .milp import EQ, GEQ, LEQ, MilpModel, VarKey
from .scenario import Scenario, TrajectorySet, intruder_positions
from .validation import ObjectiveBreakdown, recompute_objective

__all__ = [
    "SolveOptions",
    "Solution",
    "SolutionStatus",
    "SolveStats",
    "SolverError",
    "BackendUnavailable",
    "MilpBackend",
    "available_backends",
    "get_backend",
    "solve",
    "extract_trajectories",
    "BACKEND_ENV_VAR",
]

BACKEND_ENV_VAR = "FORMATION_MILP_BACKEND"
BINARY_TOL = 1e-6
OBJECTIVE_AGREEMENT_RTOL = 1e-4


class SolverError(RuntimeError):
    pass


class BackendUnavailable(SolverError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    relative_gap_target: float = 0.01
    time_limit_s: float = 900.0
    seed: int = 0  # recorded for provenance; current backends are deterministic
    backend: str = ""

    def __post_init__(self):
        if not 0.0 < self.relative_gap_target <= 1.0:
            raise ValueError("relative_gap_target must be in (0, 1]")
        if self.time_limit_s <= 0:
            raise ValueError("time_limit_s must be > 0")


class SolutionStatus(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE_WITH_GAP = "feasible_with_gap"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    TIMED_OUT_NO_SOLUTION = "timed_out_no_solution"

    @property
    def has_values(self) -> bool:
        return self in (SolutionStatus.OPTIMAL, SolutionStatus.FEASIBLE_WITH_GAP)


@dataclass(frozen=True)
class SolveStats:
    wall_time_s: float
    node_count: int | None
    backend: str


@dataclass(frozen=True)
class Solution:
    status: SolutionStatus
    objective: float | None
    relative_gap: float | None
    values: dict[VarKey, float] | None
    stats: SolveStats


def _model_arrays(model: MilpModel):
    """Column-oriented arrays shared by the backends."""
    n = model.num_vars
    c = np.zeros(n)
    for coef, key in model.objective.terms:
        c[model.ordinal(key)] += coef
    lb = np.empty(n)
    ub = np.empty(n)
    binary = np.zeros(n, dtype=bool)
    keys = [None] * n
    for key, info in model.variables.items():
        o = model.ordinal(key)
        lb[o], ub[o], binary[o] = info.lb, info.ub, info.binary
        keys[o] = key
    return c, lb, ub, binary, keys


class MilpBackend(abc.ABC):
    """Minimal engine contract: continuous + binary variables, linear rows,
    minimization, a gap target and a time limit."""

    name: str = ""

    @classmethod
    @abc.abstractmethod
    def available(cls) -> bool: ...

    @abc.abstractmethod
    def solve(self, model: MilpModel, opts: SolveOptions) -> Solution: ...


class ScipyHighsBackend(MilpBackend):
    """HiGHS via scipy.optimize.milp."""

    name = "scipy"

    @classmethod
    def available(cls) -> bool:
        try:
            from scipy.optimize import milp  # noqa: F401
            return True
        except ImportError:
            return False

    def solve(self, model: MilpModel, opts: SolveOptions) -> Solution:
        import scipy.sparse as sp
        from scipy.optimize import Bounds, LinearConstraint, milp

        c, lb, ub, binary, keys = _model_arrays(model)
        rows, cols, data, rlo, rhi = [], [], [], [], []
        for ri, con in enumerate(model.constraints):
            for coef, key in con.body.terms:
                rows.append(ri)
                cols.append(model.ordinal(key))
                data.append(coef)
            if con.sense == LEQ:
                rlo.append(-np.inf), rhi.append(con.rhs)
            elif con.sense == GEQ:
                rlo.append(con.rhs), rhi.append(np.inf)
            else:
                rlo.append(con.rhs), rhi.append(con.rhs)
        mat = sp.csc_array(sp.coo_array((data, (rows, cols)),
                                        shape=(model.num_constraints, model.num_vars)))
        t0 = time.monotonic()
        res = milp(c, constraints=[LinearConstraint(mat, np.array(rlo), np.array(rhi))],
                   integrality=binary.astype(int), bounds=Bounds(lb, ub),
                   options={"time_limit": opts.time_limit_s,
                            "mip_rel_gap": opts.relative_gap_target,
                            "presolve": True})
        wall = time.monotonic() - t0
        stats = SolveStats(wall, getattr(res, "mip_node_count", None), self.name)
        constant = model.objective.constant

        if res.status == 2:
            return Solution(SolutionStatus.INFEASIBLE, None, None, None, stats)
        if res.status == 3:
            return Solution(SolutionStatus.UNBOUNDED, None, None, None, stats)
        if res.x is None:
            if res.status == 1:
                return Solution(SolutionStatus.TIMED_OUT_NO_SOLUTION, None, None, None, stats)
            raise SolverError(f"backend {self.name}: {res.message}")

        objective = float(res.fun) + constant
        gap = _relative_gap(objective, getattr(res, "mip_dual_bound", None), constant)
        if res.status == 0:
            status = (SolutionStatus.OPTIMAL if gap is None or gap <= 1e-9
                      else SolutionStatus.FEASIBLE_WITH_GAP)
        else:  # hit a limit with an incumbent in hand
            status = SolutionStatus.FEASIBLE_WITH_GAP
        values = {key: float(res.x[o]) for o, key in enumerate(keys)}
        return Solution(status, objective, gap, values, stats)


def _relative_gap(objective: float, dual_bound: float | None, constant: float) -> float | None:
    """(incumbent - bound) / |incumbent| after undoing the constant shift."""
    if dual_bound is None or not math.isfinite(dual_bound):
        return None
    bound = dual_bound + constant
    return abs(objective - bound) / max(1.0, abs(objective))


class GlpkBackend(MilpBackend):
    """GLPK via cvxopt; proves optimality (gap 0) or times out."""

    name = "glpk"

    @classmethod
    def available(cls) -> bool:
        try:
            from cvxopt import glpk  # noqa: F401
            return True
        except ImportError:
            return False

    def solve(self, model: MilpModel, opts: SolveOptions) -> Solution:
        from cvxopt import glpk, matrix, spmatrix

        c, lb, ub, binary, keys = _model_arrays(model)
        n = model.num_vars

        g_i, g_j, g_v, h = [], [], [], []
        a_i, a_j, a_v, b = [], [], [], []
        for con in model.constraints:
            if con.sense == EQ:
                ri = len(b)
                for coef, key in con.body.terms:
                    a_i.append(ri), a_j.append(model.ordinal(key)), a_v.append(coef)
                b.append(con.rhs)
            else:
                sign = 1.0 if con.sense == LEQ else -1.0
                ri = len(h)
                for coef, key in con.body.terms:
                    g_i.append(ri), g_j.append(model.ordinal(key)), g_v.append(sign * coef)
                h.append(sign * con.rhs)
        for o in range(n):
            if binary[o]:
                continue  # glpk binaries carry implicit [0, 1] bounds
            if math.isfinite(ub[o]):
                ri = len(h)
                g_i.append(ri), g_j.append(o), g_v.append(1.0)
                h.append(ub[o])
            if math.isfinite(lb[o]):
                ri = len(h)
                g_i.append(ri), g_j.append(o), g_v.append(-1.0)
                h.append(-lb[o])

        G = spmatrix(g_v, g_i, g_j, (len(h), n), tc="d")
        Amat = spmatrix(a_v, a_i, a_j, (len(b), n), tc="d") if b else None
        saved = dict(glpk.options)
        glpk.options.update({"msg_lev": "GLP_MSG_OFF",
                             "tm_lim": int(opts.time_limit_s * 1000)})
        t0 = time.monotonic()
        try:
            if Amat is not None:
                status, x = glpk.ilp(matrix(c), G, matrix(h), Amat, matrix(b),
                                     I=set(), B=set(np.flatnonzero(binary).tolist()))
            else:
                status, x = glpk.ilp(matrix(c), G, matrix(h),
                                     I=set(), B=set(np.flatnonzero(binary).tolist()))
        finally:
            glpk.options.clear()
            glpk.options.update(saved)
        wall = time.monotonic() - t0
        stats = SolveStats(wall, None, self.name)

        if status == "optimal":
            xs = np.array(x).ravel()
            objective = float(c @ xs) + model.objective.constant
            values = {key: float(xs[o]) for o, key in enumerate(keys)}
            return Solution(SolutionStatus.OPTIMAL, objective, 0.0, values, stats)
        if x is not None and status in ("feasible", "undefined"):
            xs = np.array(x).ravel()
            objective = float(c @ xs) + model.objective.constant
            values = {key: float(xs[o]) for o, key in enumerate(keys)}
            return Solution(SolutionStatus.FEASIBLE_WITH_GAP, objective, None, values, stats)
        low = (status or "").lower()
        if "dual infeasible" in low:
            return Solution(SolutionStatus.UNBOUNDED, None, None, None, stats)
        if "infeasible" in low:
            return Solution(SolutionStatus.INFEASIBLE, None, None, None, stats)
        if "time" in low or "unknown" in low:
            return Solution(SolutionStatus.TIMED_OUT_NO_SOLUTION, None, None, None, stats)
        raise SolverError(f"backend {self.name}: unexpected status {status!r}")


_BACKENDS: dict[str, type[MilpBackend]] = {}


def register_backend(cls: type[MilpBackend]):
    _BACKENDS[cls.name] = cls
    return cls


register_backend(ScipyHighsBackend)
register_backend(GlpkBackend)


def available_backends() -> list[str]:
    return [name for name, cls in _BACKENDS.items() if cls.available()]


def get_backend(name: str = "") -> MilpBackend:
    """Resolve a backend: explicit name, else $FORMATION_MILP_BACKEND, else
    the first available registered engine."""
    name = name or os.environ.get(BACKEND_ENV_VAR, "")
    if name:
        cls = _BACKENDS.get(name)
        if cls is None:
            raise BackendUnavailable(
                f"unknown backend {name!r}; registered: {', '.join(_BACKENDS)}")
        if not cls.available():
            raise BackendUnavailable(
                f"backend {name!r} is not importable; install its package or pick one of: "
                f"{', '.join(available_backends())}")
        return cls()
    for cls in _BACKENDS.values():
        if cls.available():
            return cls()
    raise BackendUnavailable("no MILP backend available (tried: "
                             + ", ".join(_BACKENDS) + ")")


def solve(model: MilpModel, opts: SolveOptions = SolveOptions()) -> Solution:
    """Solve on the selected backend and sanity-check the returned point:
    every variable present, binaries within 1e-6 of {0, 1} (then rounded)."""
    backend = get_backend(opts.backend)
    sol = backend.solve(model, opts)
    if not sol.status.has_values:
        return sol
    values = sol.values
    cleaned = {}
    for key, info in model.variables.items():
        if key not in values:
            raise SolverError(f"backend {backend.name} returned no value for {key.name}")
        v = values[key]
        if info.binary:
            r = round(v)
            if abs(v - r) > BINARY_TOL:
                raise SolverError(
                    f"backend {backend.name}: binary {key.name} = {v} violates integrality")
            v = float(r)
        cleaned[key] = v
    return Solution(sol.status, sol.objective, sol.relative_gap, cleaned, sol.stats)


def extract_trajectories(model: MilpModel, sol: Solution,
                         s: Scenario) -> tuple[TrajectorySet, ObjectiveBreakdown]:
    """Map solved state variables back to time series and recompute the cost
    terms from the trajectory; the recomputed total must match the solver's
    objective to 1e-4 relative (anything worse signals a backend or
    indexing bug)."""
    if not sol.status.has_values:
        raise SolverError(f"no values to extract from status {sol.status.value}")
    A, T = s.n_aircraft, s.steps
    pos = np.empty((A, T, 3))
    vel = np.empty((A, T, 3))
    acc = np.empty((A, T, 3))
    try:
        for p in range(1, A + 1):
            for i in range(1, T + 1):
                for d in (1, 2, 3):
                    pos[p - 1, i - 1, d - 1] = sol.values[VarKey.pos(i, p, d)]
                    vel[p - 1, i - 1, d - 1] = sol.values[VarKey.vel(i, p, d)]
                    acc[p - 1, i - 1, d - 1] = sol.values[VarKey.acc(i, p, d)]
    except KeyError as exc:
        raise SolverError(f"solution is missing variable {exc}") from None
    itrack = intruder_positions(s)
    ivel = (np.stack([np.broadcast_to(s.intruders[r].velocity.as_array(), (T, 3))
                      for r in range(s.n_intruders)])
            if s.n_intruders else np.zeros((0, T, 3)))
    traj = TrajectorySet(s.dt, pos, vel, acc, itrack, ivel)
    breakdown = recompute_objective(traj, s)
    rel_err = abs(breakdown.total - sol.objective) / max(1.0, abs(sol.objective))
    if rel_err > OBJECTIVE_AGREEMENT_RTOL:
        raise SolverError(
            f"recomputed objective {breakdown.total} disagrees with solver objective "
            f"{sol.objective} (relative error {rel_err:.2e})")
    return traj, breakdown
