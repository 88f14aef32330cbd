"""Assembles the avoidance MILP from a scenario.

Families, with row counts for A aircraft, NI intruders, T steps, terminal
window W, and P = A*(A-1)/2 unordered pairs, G = A*(A-1) + A*NI wake
(protected, generator) pairs:

  dynamics              6*(T-1)*A      position/velocity update equalities
  pairwise separation   7*T*P          6 big-M rows + 1 cardinality per pair-step
  wake avoidance        7*T*G          6 box-face rows + 1 cardinality
  intruder separation   7*T*A*NI       6 big-M rows + 1 cardinality
  slot assignment       2*(A-1)        one-slot-per-aircraft / one-aircraft-per-slot
  terminal              8*W*A + 6*(A-1)^2
  maneuver links        6*T*A          g >= |u|
  smoothness links      2*(T-1)*A      k >= |vertical step change|
  drag links            6*T*(A-1)^2    h >= |offset from assigned slot|, y-gated
  at-place links        6*T*A          |x - designated| <= tol unless b = 0

Variables: 9*T*A state (x, v, u), 3*T*A maneuver slacks, 3*T*(A-1) drag
slacks, (T-1)*A smoothness slacks, T*A at-place binaries, 6*T*P + 6*T*G +
6*T*A*NI disjunction binaries and (A-1)^2 assignment binaries.

Every disjunction is encoded as six one-sided rows relaxed by binaries plus
a cardinality bound of five, so at least one row must hold at face value.
"""

from __future__ import annotations

from .milp import EQ, GEQ, LEQ, LinTerm, MilpModel, MilpParams, ModelError, VarKey, tight_big_m
from .scenario import Scenario, designated_position_array, intruder_positions

__all__ = [
    "build_model",
    "register_variables",
    "add_performance_bounds",
    "add_dynamics",
    "add_pairwise_separation",
    "add_wake_avoidance",
    "add_intruder_separation",
    "add_slot_assignment",
    "add_terminal_constraints",
    "add_objective",
    "expected_counts",
]


def _axes():
    return (1, 2, 3)


def register_variables(model: MilpModel, s: Scenario) -> MilpModel:
    """Create every variable in canonical order; bounds are loose except the
    fixed initial state, binaries and nonnegative slacks."""
    A, T, NI = s.n_aircraft, s.steps, s.n_intruders
    inf = float("inf")

    for i in range(1, T + 1):
        for p in range(1, A + 1):
            x0 = s.formation.initial_positions[p - 1]
            v0 = s.formation.initial_velocities[p - 1]
            for d in _axes():
                if i == 1:
                    model.add_var(VarKey.pos(i, p, d), x0[d - 1], x0[d - 1])
                    model.add_var(VarKey.vel(i, p, d), v0[d - 1], v0[d - 1])
                else:
                    model.add_var(VarKey.pos(i, p, d), -inf, inf)
                    model.add_var(VarKey.vel(i, p, d), -inf, inf)
                model.add_var(VarKey.acc(i, p, d), -inf, inf)

    for i in range(1, T + 1):
        for p in range(1, A + 1):
            for d in _axes():
                model.add_var(VarKey.maneuver_slack(i, p, d), 0.0, inf)
    for i in range(1, T + 1):
        for p in range(2, A + 1):
            for d in _axes():
                model.add_var(VarKey.drag_slack(i, p, d), 0.0, inf)
    for i in range(2, T + 1):
        for p in range(1, A + 1):
            model.add_var(VarKey.smooth_slack(i, p), 0.0, inf)
    for i in range(1, T + 1):
        for p in range(1, A + 1):
            model.add_var(VarKey.at_place(i, p), 0.0, 1.0, binary=True)

    for i in range(1, T + 1):
        for p in range(1, A + 1):
            for q in range(p + 1, A + 1):
                for d in _axes():
                    for sgn in (1, 2):
                        model.add_var(VarKey.sep_bin(i, p, q, d, sgn), 0.0, 1.0, binary=True)
    for i in range(1, T + 1):
        for p in range(1, A + 1):
            for q in _wake_generators(s, p):
                for f in range(1, 7):
                    model.add_var(VarKey.wake_bin(i, p, q, f), 0.0, 1.0, binary=True)
    for i in range(1, T + 1):
        for p in range(1, A + 1):
            for r in range(1, NI + 1):
                for d in _axes():
                    for sgn in (1, 2):
                        model.add_var(VarKey.intruder_bin(i, p, r, d, sgn), 0.0, 1.0, binary=True)
    for p in range(2, A + 1):
        for slot in range(1, A):
            model.add_var(VarKey.slot_assign(p, slot), 0.0, 1.0, binary=True)
    return model


def _wake_generators(s: Scenario, p: int) -> list[int]:
    """Generator ids threatening aircraft p: other formation aircraft keep
    their own index, intruder r maps to A + r."""
    others = [q for q in range(1, s.n_aircraft + 1) if q != p]
    return others + [s.n_aircraft + r for r in range(1, s.n_intruders + 1)]


def add_performance_bounds(model: MilpModel, s: Scenario) -> MilpModel:
    """Envelope boxes on velocity and acceleration, plus the per-step
    reachable interval on position (initial position advanced by the extreme
    wind-adjusted velocities)."""
    A, T = s.n_aircraft, s.steps
    env, wind = s.envelope, s.wind
    for i in range(1, T + 1):
        for p in range(1, A + 1):
            x0 = s.formation.initial_positions[p - 1]
            for d in _axes():
                model.tighten_bounds(VarKey.vel(i, p, d), env.v_lo[d - 1], env.v_hi[d - 1])
                model.tighten_bounds(VarKey.acc(i, p, d), env.u_lo[d - 1], env.u_hi[d - 1])
                span = (i - 1) * s.dt
                lo = x0[d - 1] + (env.v_lo[d - 1] + wind[d - 1]) * span
                hi = x0[d - 1] + (env.v_hi[d - 1] + wind[d - 1]) * span
                model.tighten_bounds(VarKey.pos(i, p, d), lo, hi)
    return model


def add_dynamics(model: MilpModel, s: Scenario) -> MilpModel:
    """Discrete-time double-integrator update with constant wind drift:
    x(i+1) = x(i) + (v(i) + W) dt and v(i+1) = v(i) + u(i) dt."""
    for i in range(1, s.steps):
        for p in range(1, s.n_aircraft + 1):
            for d in _axes():
                body = (LinTerm().add(1.0, VarKey.pos(i + 1, p, d))
                        .add(-1.0, VarKey.pos(i, p, d))
                        .add(-s.dt, VarKey.vel(i, p, d)))
                model.add_constraint(f"dyn_x({i},{p},{d})", body, EQ, s.wind[d - 1] * s.dt)
                body = (LinTerm().add(1.0, VarKey.vel(i + 1, p, d))
                        .add(-1.0, VarKey.vel(i, p, d))
                        .add(-s.dt, VarKey.acc(i, p, d)))
                model.add_constraint(f"dyn_v({i},{p},{d})", body, EQ, 0.0)
    return model


def _relaxed_geq(model: MilpModel, label: str, body: LinTerm, rhs: float,
                 binary: VarKey, params: MilpParams):
    """Emit body >= rhs - M*binary with the tightest sufficient M."""
    m = tight_big_m(model, body, GEQ, rhs, params)
    relaxed = LinTerm(list(body.terms), body.constant).add(m, binary)
    model.add_constraint(label, relaxed, GEQ, rhs)


def _gated_leq(model: MilpModel, label: str, body: LinTerm, rhs: float,
               gate: VarKey, params: MilpParams):
    """Emit body <= rhs + M*(1 - gate): binding only when gate = 1."""
    m = tight_big_m(model, body, LEQ, rhs, params)
    relaxed = LinTerm(list(body.terms), body.constant).add(m, gate)
    model.add_constraint(label, relaxed, LEQ, rhs + m)


def _gated_geq(model: MilpModel, label: str, body: LinTerm, rhs: float,
               gate: VarKey, params: MilpParams):
    """Emit body >= rhs - M*(1 - gate): binding only when gate = 1."""
    m = tight_big_m(model, body, GEQ, rhs, params)
    relaxed = LinTerm(list(body.terms), body.constant).add(-m, gate)
    model.add_constraint(label, relaxed, GEQ, rhs - m)


def add_pairwise_separation(model: MilpModel, s: Scenario, params: MilpParams) -> MilpModel:
    """Either-or minimum separation inside the formation: per step and pair,
    at least one axis keeps a gap of the per-axis minimum in one direction."""
    sep = s.safety.formation_sep
    for i in range(1, s.steps + 1):
        for p in range(1, s.n_aircraft + 1):
            for q in range(p + 1, s.n_aircraft + 1):
                bins = []
                for d in _axes():
                    for sgn, lo, hi in ((1, p, q), (2, q, p)):
                        key = VarKey.sep_bin(i, p, q, d, sgn)
                        bins.append(key)
                        body = (LinTerm().add(1.0, VarKey.pos(i, lo, d))
                                .add(-1.0, VarKey.pos(i, hi, d)))
                        _relaxed_geq(model, f"sep({i},{p},{q},{d},{sgn})", body,
                                     sep[d - 1], key, params)
                card = LinTerm()
                for key in bins:
                    card.add(1.0, key)
                model.add_constraint(f"sep_card({i},{p},{q})", card, LEQ, 5.0)
    return model


def add_wake_avoidance(model: MilpModel, s: Scenario, params: MilpParams) -> MilpModel:
    """Keep every aircraft outside the trailing wake box of every other
    aircraft and of every intruder: at least one box face must separate."""
    box = s.safety.wake_box
    ipos = intruder_positions(s) if s.n_intruders else None
    A = s.n_aircraft
    # face -> (axis, sign, threshold): sign*(rel position on axis) >= threshold
    faces = (
        (1, +1.0, 0.0),
        (1, -1.0, box.behind_len),
        (2, +1.0, box.half_width),
        (2, -1.0, box.half_width),
        (3, +1.0, box.above_height),
        (3, -1.0, box.below_depth),
    )
    for i in range(1, s.steps + 1):
        for p in range(1, A + 1):
            for q in _wake_generators(s, p):
                bins = []
                for f, (d, sign, threshold) in enumerate(faces, start=1):
                    key = VarKey.wake_bin(i, p, q, f)
                    bins.append(key)
                    body = LinTerm().add(sign, VarKey.pos(i, p, d))
                    if q <= A:
                        body.add(-sign, VarKey.pos(i, q, d))
                    else:
                        body.constant -= sign * ipos[q - A - 1, i - 1, d - 1]
                    _relaxed_geq(model, f"wake({i},{p},{q},{f})", body, threshold, key, params)
                card = LinTerm()
                for key in bins:
                    card.add(1.0, key)
                model.add_constraint(f"wake_card({i},{p},{q})", card, LEQ, 5.0)
    return model


def add_intruder_separation(model: MilpModel, s: Scenario, params: MilpParams) -> MilpModel:
    """Disjunctive minimum safe distance from every intruder: six relaxed
    one-sided gap rows whose binaries may not all be active at once."""
    minima = s.safety.intruder_sep
    ipos = intruder_positions(s)
    for i in range(1, s.steps + 1):
        for p in range(1, s.n_aircraft + 1):
            for r in range(1, s.n_intruders + 1):
                bins = []
                for d in _axes():
                    ref = ipos[r - 1, i - 1, d - 1]
                    for sgn, sign in ((1, +1.0), (2, -1.0)):
                        key = VarKey.intruder_bin(i, p, r, d, sgn)
                        bins.append(key)
                        body = LinTerm([(sign, VarKey.pos(i, p, d))], -sign * ref)
                        _relaxed_geq(model, f"intr({i},{p},{r},{d},{sgn})", body,
                                     minima[d - 1], key, params)
                card = LinTerm()
                for key in bins:
                    card.add(1.0, key)
                model.add_constraint(f"intr_card({i},{p},{r})", card, LEQ, 5.0)
    return model


def add_slot_assignment(model: MilpModel, s: Scenario) -> MilpModel:
    """Permutation of non-lead aircraft over formation slots; the lead keeps
    the apex and takes no assignment variable."""
    A = s.n_aircraft
    if A < 2:
        return model
    for p in range(2, A + 1):
        row = LinTerm()
        for slot in range(1, A):
            row.add(1.0, VarKey.slot_assign(p, slot))
        model.add_constraint(f"assign_ac({p})", row, EQ, 1.0)
    for slot in range(1, A):
        row = LinTerm()
        for p in range(2, A + 1):
            row.add(1.0, VarKey.slot_assign(p, slot))
        model.add_constraint(f"assign_slot({slot})", row, EQ, 1.0)
    return model


def add_terminal_constraints(model: MilpModel, s: Scenario, params: MilpParams) -> MilpModel:
    """Final-window recovery: no lateral/vertical velocity, no acceleration,
    initial along-course speed, inside the course boundaries; and at the last
    step each non-lead aircraft sits at its assigned slot within tolerance."""
    A, T, W = s.n_aircraft, s.steps, s.terminal_window
    if T <= W:
        raise ModelError(f"horizon {T} must exceed terminal window {W}")
    v_init = s.formation.initial_velocities[0]
    center = s.formation.initial_positions[0].d2
    chw = s.safety.course_half_width

    for i in range(T - W + 1, T + 1):
        for p in range(1, A + 1):
            model.add_constraint(f"term_v1({i},{p})",
                                 LinTerm().add(1.0, VarKey.vel(i, p, 1)), EQ, v_init.d1)
            model.add_constraint(f"term_v2({i},{p})",
                                 LinTerm().add(1.0, VarKey.vel(i, p, 2)), EQ, 0.0)
            model.add_constraint(f"term_v3({i},{p})",
                                 LinTerm().add(1.0, VarKey.vel(i, p, 3)), EQ, 0.0)
            for d in _axes():
                model.add_constraint(f"term_u({i},{p},{d})",
                                     LinTerm().add(1.0, VarKey.acc(i, p, d)), EQ, 0.0)
            model.add_constraint(f"course_hi({i},{p})",
                                 LinTerm().add(1.0, VarKey.pos(i, p, 2)), LEQ, center + chw)
            model.add_constraint(f"course_lo({i},{p})",
                                 LinTerm().add(1.0, VarKey.pos(i, p, 2)), GEQ, center - chw)

    tol = s.safety.formation_tol
    for p in range(2, A + 1):
        for slot in range(1, A):
            off = s.formation.slot_offsets[slot - 1]
            gate = VarKey.slot_assign(p, slot)
            for d in _axes():
                rel = (LinTerm().add(1.0, VarKey.pos(T, p, d))
                       .add(-1.0, VarKey.pos(T, 1, d)))
                rel.constant -= off[d - 1]
                _gated_leq(model, f"form_final_hi({p},{slot},{d})", rel,
                           tol[d - 1], gate, params)
                neg = (LinTerm().add(-1.0, VarKey.pos(T, p, d))
                       .add(1.0, VarKey.pos(T, 1, d)))
                neg.constant += off[d - 1]
                _gated_leq(model, f"form_final_lo({p},{slot},{d})", neg,
                           tol[d - 1], gate, params)
    return model


def add_objective(model: MilpModel, s: Scenario, params: MilpParams) -> MilpModel:
    """Linearized cost: maneuver effort + time away from designated
    positions + drag-optimal-slot deviation + vertical roughness."""
    A, T = s.n_aircraft, s.steps
    w = s.weights
    designated = designated_position_array(s)
    tol = s.safety.formation_tol

    # maneuver: g >= |u|
    for i in range(1, T + 1):
        for p in range(1, A + 1):
            for d in _axes():
                g = VarKey.maneuver_slack(i, p, d)
                u = VarKey.acc(i, p, d)
                model.add_constraint(f"man_hi({i},{p},{d})",
                                     LinTerm().add(1.0, g).add(-1.0, u), GEQ, 0.0)
                model.add_constraint(f"man_lo({i},{p},{d})",
                                     LinTerm().add(1.0, g).add(1.0, u), GEQ, 0.0)
                model.add_objective_term(w.maneuver, g)

    # smoothness: k >= |vertical position change|
    for i in range(2, T + 1):
        for p in range(1, A + 1):
            k = VarKey.smooth_slack(i, p)
            hi = (LinTerm().add(1.0, k).add(-1.0, VarKey.pos(i, p, 3))
                  .add(1.0, VarKey.pos(i - 1, p, 3)))
            lo = (LinTerm().add(1.0, k).add(1.0, VarKey.pos(i, p, 3))
                  .add(-1.0, VarKey.pos(i - 1, p, 3)))
            model.add_constraint(f"smooth_hi({i},{p})", hi, GEQ, 0.0)
            model.add_constraint(f"smooth_lo({i},{p})", lo, GEQ, 0.0)
            model.add_objective_term(w.smoothness, k)

    # drag: h >= |deviation from the lead-anchored assigned slot|, gated by y
    for i in range(1, T + 1):
        for p in range(2, A + 1):
            for slot in range(1, A):
                off = s.formation.slot_offsets[slot - 1]
                gate = VarKey.slot_assign(p, slot)
                for d in _axes():
                    h = VarKey.drag_slack(i, p, d)
                    pos_dev = (LinTerm().add(1.0, h)
                               .add(-1.0, VarKey.pos(i, p, d))
                               .add(1.0, VarKey.pos(i, 1, d)))
                    pos_dev.constant += off[d - 1]
                    _gated_geq(model, f"drag_hi({i},{p},{slot},{d})", pos_dev, 0.0, gate, params)
                    neg_dev = (LinTerm().add(1.0, h)
                               .add(1.0, VarKey.pos(i, p, d))
                               .add(-1.0, VarKey.pos(i, 1, d)))
                    neg_dev.constant -= off[d - 1]
                    _gated_geq(model, f"drag_lo({i},{p},{slot},{d})", neg_dev, 0.0, gate, params)
    for i in range(1, T + 1):
        for p in range(2, A + 1):
            for d in _axes():
                model.add_objective_term(w.drag, VarKey.drag_slack(i, p, d))

    # avoidance time: b = 1 only if within tolerance of the designated position
    for i in range(1, T + 1):
        for p in range(1, A + 1):
            b = VarKey.at_place(i, p)
            for d in _axes():
                target = designated[p - 1, i - 1, d - 1]
                above = LinTerm([(1.0, VarKey.pos(i, p, d))], -target)
                _gated_leq(model, f"place_hi({i},{p},{d})", above, tol[d - 1], b, params)
                below = LinTerm([(-1.0, VarKey.pos(i, p, d))], target)
                _gated_leq(model, f"place_lo({i},{p},{d})", below, tol[d - 1], b, params)
            model.add_objective_term(-w.avoidance, b)
            model.add_objective_constant(w.avoidance)
    return model


def build_model(s: Scenario, params: MilpParams = MilpParams()) -> MilpModel:
    """Register all variables, apply every constraint family in fixed order,
    and attach the objective.  Deterministic: identical inputs produce an
    identical model, including variable and row order."""
    if s.steps * s.n_aircraft > params.size_cap:
        raise ModelError(
            f"steps*aircraft = {s.steps * s.n_aircraft} exceeds size cap {params.size_cap}")
    model = MilpModel()
    register_variables(model, s)
    add_performance_bounds(model, s)
    add_dynamics(model, s)
    if s.n_aircraft >= 2:
        add_pairwise_separation(model, s, params)
    if s.n_aircraft >= 2 or s.n_intruders >= 1:
        add_wake_avoidance(model, s, params)
    if s.n_intruders >= 1:
        add_intruder_separation(model, s, params)
    if s.n_aircraft >= 2:
        add_slot_assignment(model, s)
    add_terminal_constraints(model, s, params)
    add_objective(model, s, params)
    model.finalize_objective()

    counts = expected_counts(s)
    if model.num_vars != counts["variables"] or model.num_constraints != counts["constraints"]:
        raise ModelError(
            f"internal count mismatch: {model.num_vars}/{model.num_constraints} vs {counts}")
    return model


def expected_counts(s: Scenario) -> dict:
    """Closed-form variable/constraint totals for a scenario (see module doc)."""
    A, T, NI, W = s.n_aircraft, s.steps, s.n_intruders, s.terminal_window
    pairs = A * (A - 1) // 2
    wake_pairs = A * (A - 1) + A * NI
    variables = (9 * T * A              # x, v, u
                 + 3 * T * A            # g
                 + 3 * T * (A - 1)      # h
                 + (T - 1) * A          # k
                 + T * A                # b
                 + 6 * T * pairs        # sep
                 + 6 * T * wake_pairs   # wk
                 + 6 * T * A * NI       # a
                 + (A - 1) ** 2)        # y
    constraints = (6 * (T - 1) * A
                   + 7 * T * pairs
                   + 7 * T * wake_pairs
                   + 7 * T * A * NI
                   + (2 * (A - 1) if A >= 2 else 0)
                   + 8 * W * A + 6 * (A - 1) ** 2
                   + 6 * T * A                # maneuver links
                   + 2 * (T - 1) * A          # smoothness links
                   + 6 * T * (A - 1) ** 2     # drag links
                   + 6 * T * A)               # at-place links
    return {"variables": variables, "constraints": constraints,
            "binaries": T * A + 6 * T * (pairs + wake_pairs + A * NI) + (A - 1) ** 2}
