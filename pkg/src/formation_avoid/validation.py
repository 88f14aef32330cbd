"""Independent trajectory verification.

Everything here is re-derived from positions alone: disjunctive separation
conditions are evaluated geometrically, never through model binaries or
slacks, so this module can referee any solver's output.  Tolerances:
dynamics residuals 1e-6 ft, separation margins 1e-4 ft, exact terminal
conditions 1e-6; margins are signed (positive = margin, negative =
violation).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .scenario import (AxisTriple, Scenario, TrajectorySet,
                       designated_position_array)

__all__ = [
    "ObjectiveBreakdown",
    "FamilyResult",
    "InterpolatedFinding",
    "SeparationScan",
    "ValidationReport",
    "OracleResult",
    "validate",
    "interpolated_min_separation",
    "brute_force_plan",
    "recompute_objective",
    "slot_assignment_for",
]

DYNAMICS_TOL = 1e-6     # ft
SEPARATION_TOL = 1e-4   # ft
EXACT_TOL = 1e-6        # ft, ft/s: "exact" terminal conditions
PLACE_TOL = 1e-6        # ft of headroom when counting at-place misses


# ---------------------------------------------------------------------------
# Objective recomputation

@dataclass(frozen=True)
class ObjectiveBreakdown:
    """The four cost terms recomputed directly from a trajectory."""

    maneuver: float
    avoidance: float
    drag: float
    smoothness: float

    @property
    def total(self) -> float:
        return self.maneuver + self.avoidance + self.drag + self.smoothness

    def to_dict(self) -> dict:
        return {"maneuver": self.maneuver, "avoidance": self.avoidance,
                "drag": self.drag, "smoothness": self.smoothness, "total": self.total}


def slot_assignment_for(traj: TrajectorySet, s: Scenario) -> tuple[int, ...]:
    """Slot index (1-based) per non-lead aircraft, recovered as the
    permutation minimizing final-step deviation from the lead-anchored
    offsets; ties break to the lexicographically smallest assignment."""
    A = s.n_aircraft
    if A < 2:
        return ()
    last = traj.positions[:, -1, :]
    offsets = np.array([o.as_array() for o in s.formation.slot_offsets])
    best, best_cost = None, math.inf
    for perm in itertools.permutations(range(A - 1)):
        cost = sum(np.abs(last[p] - last[0] - offsets[perm[p - 1]]).sum()
                   for p in range(1, A))
        if cost < best_cost - 1e-12:
            best, best_cost = perm, cost
    return tuple(slot + 1 for slot in best)


def recompute_objective(traj: TrajectorySet, s: Scenario) -> ObjectiveBreakdown:
    """Evaluate the four cost terms from the trajectory itself (not from any
    solver slacks): L1 acceleration effort, count of aircraft-steps away
    from designated positions, L1 deviation from the assigned drag-optimal
    slots, and total vertical variation."""
    w = s.weights
    maneuver = w.maneuver * float(np.abs(traj.accelerations).sum())
    smoothness = w.smoothness * float(np.abs(np.diff(traj.positions[:, :, 2], axis=1)).sum())

    designated = designated_position_array(s)
    tol = s.safety.formation_tol.as_array()
    deviation = np.abs(traj.positions - designated)
    missed = np.any(deviation > tol + PLACE_TOL, axis=2)  # (A, T)
    avoidance = w.avoidance * float(missed.sum())

    drag = 0.0
    if s.n_aircraft >= 2:
        assignment = slot_assignment_for(traj, s)
        for p in range(1, s.n_aircraft):
            off = s.formation.slot_offsets[assignment[p - 1] - 1].as_array()
            target = traj.positions[0] + off
            drag += float(np.abs(traj.positions[p] - target).sum())
        drag *= w.drag
    return ObjectiveBreakdown(maneuver, avoidance, drag, smoothness)


# ---------------------------------------------------------------------------
# Validation report

@dataclass(frozen=True)
class FamilyResult:
    name: str
    passed: bool
    violation_count: int
    worst_margin: float               # positive = margin, negative = violation
    worst_step: int | None = None     # 1-based
    worst_actor: str | None = None    # "A2", "A1/A2", "A2/I1"
    worst_axis: int | None = None     # 1..3
    first_step: int | None = None     # earliest violating step, if any
    first_actor: str | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "violation_count": self.violation_count,
                "worst_margin": self.worst_margin, "worst_step": self.worst_step,
                "worst_actor": self.worst_actor, "worst_axis": self.worst_axis,
                "first_step": self.first_step, "first_actor": self.first_actor}


@dataclass(frozen=True)
class InterpolatedFinding:
    """Advisory sub-step separation finding; never affects the hard verdict."""

    kind: str          # "formation" or "intruder"
    actor: str
    first_time_s: float | None
    sampled_times_s: tuple[float, ...]
    per_axis_min: AxisTriple

    def to_dict(self) -> dict:
        return {"kind": self.kind, "actor": self.actor,
                "first_time_s": self.first_time_s,
                "sampled_times_s": list(self.sampled_times_s),
                "per_axis_min": list(self.per_axis_min)}


@dataclass(frozen=True)
class ValidationReport:
    families: tuple[FamilyResult, ...]
    advisory: tuple[InterpolatedFinding, ...]

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.families)

    def family(self, name: str) -> FamilyResult:
        for f in self.families:
            if f.name == name:
                return f
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"overall_pass": self.passed,
                "families": [f.to_dict() for f in self.families],
                "advisory": {"interpolated": [a.to_dict() for a in self.advisory]}}


class _Worst:
    """Track the minimum margin, its location and the earliest violation."""

    def __init__(self, tol: float):
        self.tol = tol
        self.margin = math.inf
        self.where: tuple = (None, None, None)
        self.violations = 0
        self.first: tuple = (None, None)

    def update(self, margin: float, step=None, actor=None, axis=None, tol=None):
        if margin < -(self.tol if tol is None else tol):
            self.violations += 1
            if self.first[0] is None or (step is not None and step < self.first[0]):
                self.first = (step, actor)
        if margin < self.margin:
            self.margin = margin
            self.where = (step, actor, axis)

    def result(self, name: str) -> FamilyResult:
        margin = 0.0 if math.isinf(self.margin) else float(self.margin)
        return FamilyResult(name, self.violations == 0, self.violations, margin,
                            self.where[0], self.where[1], self.where[2],
                            self.first[0], self.first[1])


def _disjunctive_margin(gaps: np.ndarray, minima: np.ndarray) -> tuple[float, int]:
    """Best per-axis clearance of an either-or separation condition:
    max_d(|gap_d| - minimum_d) and the worst axis (1-based argmax)."""
    margins = np.abs(gaps) - minima
    d = int(np.argmax(margins))
    return float(margins[d]), d + 1


def _wake_face_margin(rel: np.ndarray, box) -> float:
    """Positive when the relative position lies outside the wake box."""
    return max(rel[0],
               -rel[0] - box.behind_len,
               rel[1] - box.half_width,
               -rel[1] - box.half_width,
               rel[2] - box.above_height,
               -rel[2] - box.below_depth)


def validate(traj: TrajectorySet, s: Scenario, samples_per_step: int = 8) -> ValidationReport:
    """Check a trajectory against every scenario constraint family.

    Hard families: dynamics, envelope, formation/intruder separation, wake,
    terminal and course bounds.  Sub-step interpolated separation findings
    are attached as advisory only: the model is discrete, so its contract
    holds at the time steps.
    """
    A, T, NI = s.n_aircraft, s.steps, s.n_intruders
    if traj.positions.shape != (A, T, 3):
        raise ValueError(f"trajectory shape {traj.positions.shape} does not match scenario ({A}, {T}, 3)")
    if traj.intruder_positions.shape[0] != NI:
        raise ValueError(f"expected {NI} intruder tracks, got {traj.intruder_positions.shape[0]}")

    pos, vel, acc = traj.positions, traj.velocities, traj.accelerations
    wind = s.wind.as_array()

    # dynamics residuals
    dyn = _Worst(DYNAMICS_TOL)
    res_x = pos[:, 1:, :] - pos[:, :-1, :] - (vel[:, :-1, :] + wind) * s.dt
    res_v = vel[:, 1:, :] - vel[:, :-1, :] - acc[:, :-1, :] * s.dt
    for name, res in (("x", res_x), ("v", res_v)):
        for p in range(A):
            for i in range(T - 1):
                for d in range(3):
                    dyn.update(DYNAMICS_TOL - abs(res[p, i, d]), i + 2, f"A{p + 1}", d + 1)

    # envelope
    env = _Worst(SEPARATION_TOL)
    v_lo, v_hi = s.envelope.v_lo.as_array(), s.envelope.v_hi.as_array()
    u_lo, u_hi = s.envelope.u_lo.as_array(), s.envelope.u_hi.as_array()
    for p in range(A):
        for i in range(T):
            for d in range(3):
                m = min(vel[p, i, d] - v_lo[d], v_hi[d] - vel[p, i, d],
                        acc[p, i, d] - u_lo[d], u_hi[d] - acc[p, i, d])
                env.update(m, i + 1, f"A{p + 1}", d + 1)

    # formation pairwise separation (disjunctive, geometric)
    form = _Worst(SEPARATION_TOL)
    sep = s.safety.formation_sep.as_array()
    for p in range(A):
        for q in range(p + 1, A):
            gaps = pos[p] - pos[q]
            for i in range(T):
                m, d = _disjunctive_margin(gaps[i], sep)
                form.update(m, i + 1, f"A{p + 1}/A{q + 1}", d)

    # intruder separation
    intr = _Worst(SEPARATION_TOL)
    minima = s.safety.intruder_sep.as_array()
    for p in range(A):
        for r in range(NI):
            gaps = pos[p] - traj.intruder_positions[r]
            for i in range(T):
                m, d = _disjunctive_margin(gaps[i], minima)
                intr.update(m, i + 1, f"A{p + 1}/I{r + 1}", d)

    # wake boxes (formation and intruder generators; self excluded)
    wake = _Worst(SEPARATION_TOL)
    box = s.safety.wake_box
    for p in range(A):
        for q in range(A):
            if q == p:
                continue
            rel = pos[p] - pos[q]
            for i in range(T):
                wake.update(_wake_face_margin(rel[i], box), i + 1, f"A{p + 1}/A{q + 1}", None)
        for r in range(NI):
            rel = pos[p] - traj.intruder_positions[r]
            for i in range(T):
                wake.update(_wake_face_margin(rel[i], box), i + 1, f"A{p + 1}/I{r + 1}", None)

    # terminal window and final formation geometry
    term = _Worst(EXACT_TOL)
    v_init = s.formation.initial_velocities[0].as_array()
    for p in range(A):
        for i in range(T - s.terminal_window, T):
            term.update(EXACT_TOL - abs(vel[p, i, 0] - v_init[0]), i + 1, f"A{p + 1}", 1)
            term.update(EXACT_TOL - abs(vel[p, i, 1]), i + 1, f"A{p + 1}", 2)
            term.update(EXACT_TOL - abs(vel[p, i, 2]), i + 1, f"A{p + 1}", 3)
            for d in range(3):
                term.update(EXACT_TOL - abs(acc[p, i, d]), i + 1, f"A{p + 1}", d + 1)
    if A >= 2:
        assignment = slot_assignment_for(traj, s)
        tol = s.safety.formation_tol.as_array()
        for p in range(1, A):
            off = s.formation.slot_offsets[assignment[p - 1] - 1].as_array()
            dev = np.abs(pos[p, -1] - pos[0, -1] - off)
            d = int(np.argmin(tol - dev))
            term.update(float((tol - dev)[d]), T, f"A{p + 1}", d + 1, tol=SEPARATION_TOL)

    # course bounds inside the terminal window
    course = _Worst(SEPARATION_TOL)
    center = s.formation.initial_positions[0].d2
    chw = s.safety.course_half_width
    for p in range(A):
        for i in range(T - s.terminal_window, T):
            course.update(chw - abs(pos[p, i, 1] - center), i + 1, f"A{p + 1}", 2)

    families = (
        dyn.result("dynamics"),
        env.result("envelope"),
        form.result("formation_separation"),
        intr.result("intruder_separation"),
        wake.result("wake"),
        term.result("terminal"),
        course.result("course_bounds"),
    )

    advisory = []
    if samples_per_step >= 2:
        for p in range(A):
            for q in range(p + 1, A):
                scan = interpolated_min_separation(pos[p], pos[q], s.safety.formation_sep,
                                                   s.dt, samples_per_step)
                if scan.violated or scan.sampled_violation_times:
                    advisory.append(InterpolatedFinding(
                        "formation", f"A{p + 1}/A{q + 1}", scan.first_violation_time,
                        scan.sampled_violation_times, scan.per_axis_min))
            for r in range(NI):
                scan = interpolated_min_separation(pos[p], traj.intruder_positions[r],
                                                   s.safety.intruder_sep, s.dt, samples_per_step)
                if scan.violated or scan.sampled_violation_times:
                    advisory.append(InterpolatedFinding(
                        "intruder", f"A{p + 1}/I{r + 1}", scan.first_violation_time,
                        scan.sampled_violation_times, scan.per_axis_min))

    return ValidationReport(tuple(families), tuple(advisory))


# ---------------------------------------------------------------------------
# Sub-step separation scan

@dataclass(frozen=True)
class SeparationScan:
    """Separation between two piecewise-linear tracks, inside time steps.

    `first_violation_time` comes from the closed-form per-axis gap
    equations (exact for linear motion); `sampled_violation_times` holds
    the uniform-sample instants at which the disjunctive condition failed,
    so `samples_per_step=2` reproduces the discrete endpoint check.
    """

    per_axis_min: AxisTriple
    min_margin: float
    first_violation_time: float | None
    sampled_violation_times: tuple[float, ...]

    @property
    def violated(self) -> bool:
        return self.first_violation_time is not None


def interpolated_min_separation(pos_a: np.ndarray, pos_b: np.ndarray,
                                minima: AxisTriple, dt: float,
                                samples_per_step: int) -> SeparationScan:
    """Scan two (T, 3) tracks for loss of disjunctive separation between
    steps, interpolating both linearly inside each step."""
    if samples_per_step < 2:
        raise ValueError("samples_per_step must be >= 2")
    pos_a = np.asarray(pos_a, dtype=float)
    pos_b = np.asarray(pos_b, dtype=float)
    if pos_a.shape != pos_b.shape or pos_a.ndim != 2 or pos_a.shape[1] != 3:
        raise ValueError("expected two (T, 3) position arrays of equal length")
    T = pos_a.shape[0]
    rmin = minima.as_array() if isinstance(minima, AxisTriple) else np.asarray(minima, float)

    rel = pos_a - pos_b
    per_axis_min = np.abs(rel[0]).copy()
    min_margin = math.inf
    first_violation = None
    sampled = []

    taus = np.linspace(0.0, 1.0, samples_per_step)
    for k in range(T - 1):
        r0, r1 = rel[k], rel[k + 1]
        drel = r1 - r0

        # exact per-axis minima: endpoint or interior zero crossing
        for d in range(3):
            lo = min(abs(r0[d]), abs(r1[d]))
            if drel[d] != 0.0:
                t_zero = -r0[d] / drel[d]
                if 0.0 < t_zero < 1.0:
                    lo = 0.0
            per_axis_min[d] = min(per_axis_min[d], lo)

        # exact violation window: intersection of per-axis |gap| < r intervals
        lo_t, hi_t = 0.0, 1.0
        empty = False
        for d in range(3):
            if drel[d] == 0.0:
                if abs(r0[d]) >= rmin[d]:
                    empty = True
                    break
                continue
            t1 = (-rmin[d] - r0[d]) / drel[d]
            t2 = (rmin[d] - r0[d]) / drel[d]
            lo_t = max(lo_t, min(t1, t2))
            hi_t = min(hi_t, max(t1, t2))
        if not empty and lo_t < hi_t and first_violation is None:
            first_violation = (k + lo_t) * dt

        # margin evaluated at endpoints, per-axis ±r crossings and samples
        candidates = set(taus.tolist())
        for d in range(3):
            if drel[d] != 0.0:
                for target in (-rmin[d], rmin[d], 0.0):
                    t = (target - r0[d]) / drel[d]
                    if 0.0 <= t <= 1.0:
                        candidates.add(t)
        for t in sorted(candidates):
            g = r0 + drel * t
            min_margin = min(min_margin, float(np.max(np.abs(g) - rmin)))

        # uniform samples: disjunctive check exactly as the discrete one
        for t in taus:
            if k < T - 2 and t == 1.0:
                continue  # avoid double-counting shared endpoints
            g = np.abs(r0 + drel * t)
            if np.all(g < rmin):
                sampled.append((k + t) * dt)

    if T == 1:
        min_margin = float(np.max(np.abs(rel[0]) - rmin))

    return SeparationScan(AxisTriple.of(per_axis_min), min_margin,
                          first_violation, tuple(sampled))


# ---------------------------------------------------------------------------
# Brute-force oracle

@dataclass(frozen=True)
class OracleResult:
    best_cost: float | None
    best_trajectory: TrajectorySet | None
    nodes_explored: int
    feasible_count: int


SEARCH_SIZE_CAP = 10_000_000


def brute_force_plan(s: Scenario, accel_levels: list[float],
                     axes: tuple[int, ...] = (2,)) -> OracleResult:
    """Exhaustive grid search over acceleration sequences.

    Accelerations on the searched axes take values from `accel_levels` at
    every step (axes not searched stay 0); trajectories are integrated with
    the same dynamics the model uses, infeasible ones are discarded via the
    validator's geometry, and the best recomputed objective wins.  Ties go
    to the lexicographically smallest acceleration sequence.  Intended for
    tiny instances: the grid size is capped at 10^7.
    """
    if not accel_levels:
        raise ValueError("accel_levels must not be empty")
    axes = tuple(sorted(set(axes)))
    if not axes or any(d not in (1, 2, 3) for d in axes):
        raise ValueError("axes must be a non-empty subset of {1, 2, 3}")
    A, T = s.n_aircraft, s.steps
    levels = sorted(float(v) for v in accel_levels)
    size = float(len(levels)) ** (len(axes) * (T - 1) * A)
    if size > SEARCH_SIZE_CAP:
        raise ValueError(f"search size {size:.3g} exceeds cap {SEARCH_SIZE_CAP:.0e}")

    u_lo, u_hi = s.envelope.u_lo.as_array(), s.envelope.u_hi.as_array()
    v_lo, v_hi = s.envelope.v_lo.as_array(), s.envelope.v_hi.as_array()
    levels = [v for v in levels if all(u_lo[d - 1] <= v <= u_hi[d - 1] for d in axes)]
    if not levels:
        raise ValueError("no acceleration level fits inside the envelope")

    wind = s.wind.as_array()
    window_start = T - s.terminal_window + 1  # first 1-based step of the window
    v_init = s.formation.initial_velocities[0].as_array()
    itrack = None
    if s.n_intruders:
        from .scenario import intruder_positions
        itrack = intruder_positions(s)
    sep = s.safety.formation_sep.as_array()
    rmin = s.safety.intruder_sep.as_array()
    box = s.safety.wake_box
    center = s.formation.initial_positions[0].d2
    chw = s.safety.course_half_width

    pos = np.zeros((A, T, 3))
    vel = np.zeros((A, T, 3))
    acc = np.zeros((A, T, 3))
    for p in range(A):
        pos[p, 0] = s.formation.initial_positions[p].as_array()
        vel[p, 0] = s.formation.initial_velocities[p].as_array()

    slots = [(p, d) for p in range(A) for d in axes]  # aircraft/axis choice slots
    nodes = 0
    feasible = 0
    best_cost = math.inf
    best_seq: tuple | None = None
    best_state: tuple | None = None
    itrack_arr = itrack if itrack is not None else np.zeros((0, T, 3))
    ivel = (np.stack([np.broadcast_to(s.intruders[r].velocity.as_array(), (T, 3))
                      for r in range(s.n_intruders)])
            if s.n_intruders else np.zeros((0, T, 3)))

    def step_ok(i: int) -> bool:
        """Geometric checks at 0-based step index i (already integrated)."""
        step1 = i + 1
        for p in range(A):
            for q in range(p + 1, A):
                if np.max(np.abs(pos[p, i] - pos[q, i]) - sep) < -SEPARATION_TOL:
                    return False
            for q in range(A):
                if q != p and _wake_face_margin(pos[p, i] - pos[q, i], box) < -SEPARATION_TOL:
                    return False
            if itrack is not None:
                for r in range(s.n_intruders):
                    gap = pos[p, i] - itrack[r, i]
                    if np.max(np.abs(gap) - rmin) < -SEPARATION_TOL:
                        return False
                    if _wake_face_margin(gap, box) < -SEPARATION_TOL:
                        return False
            if step1 >= window_start:
                if abs(pos[p, i, 1] - center) > chw + SEPARATION_TOL:
                    return False
                if (abs(vel[p, i, 0] - v_init[0]) > EXACT_TOL
                        or abs(vel[p, i, 1]) > EXACT_TOL or abs(vel[p, i, 2]) > EXACT_TOL):
                    return False
        return True

    if not step_ok(0):
        return OracleResult(None, None, 0, 0)

    seq: list[float] = []

    def descend(i: int):
        """Choose accelerations for 1-based step i (affects state i+1)."""
        nonlocal nodes, feasible, best_cost, best_seq, best_state
        if i == T:
            traj = TrajectorySet(s.dt, pos.copy(), vel.copy(), acc.copy(),
                                 itrack_arr.copy(), ivel.copy())
            report = validate(traj, s, samples_per_step=2)
            if not report.passed:
                return
            feasible += 1
            cost = recompute_objective(traj, s).total
            key = tuple(seq)
            if cost < best_cost - 1e-12 or (abs(cost - best_cost) <= 1e-12
                                            and (best_seq is None or key < best_seq)):
                best_cost = cost
                best_seq = key
                best_state = (pos.copy(), vel.copy(), acc.copy())
            return

        in_window = (i >= window_start)
        choices = [0.0] if in_window else levels
        k = i - 1  # 0-based index of the step being decided
        for combo in itertools.product(choices, repeat=len(slots)):
            nodes += 1
            for (p, d), val in zip(slots, combo):
                acc[p, k, d - 1] = val
            vel[:, k + 1] = vel[:, k] + acc[:, k] * s.dt
            if np.any(vel[:, k + 1] < v_lo - 1e-9) or np.any(vel[:, k + 1] > v_hi + 1e-9):
                continue
            pos[:, k + 1] = pos[:, k] + (vel[:, k] + wind) * s.dt
            if not step_ok(k + 1):
                continue
            seq.extend(combo)
            descend(i + 1)
            del seq[len(seq) - len(combo):]
        for (p, d) in slots:
            acc[p, k, d - 1] = 0.0

    descend(1)

    if best_state is None:
        return OracleResult(None, None, nodes, feasible)
    bpos, bvel, bacc = best_state
    best_traj = TrajectorySet(s.dt, bpos, bvel, bacc, itrack_arr.copy(), ivel.copy())
    return OracleResult(best_cost, best_traj, nodes, feasible)
