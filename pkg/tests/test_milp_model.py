import itertools
import json

import numpy as np
import pytest

from formation_avoid import build_model, expected_counts, parse_scenario
from formation_avoid.formulation import (add_dynamics, add_intruder_separation,
                                         add_performance_bounds,
                                         add_pairwise_separation,
                                         add_slot_assignment,
                                         add_terminal_constraints,
                                         add_wake_avoidance,
                                         register_variables)
from formation_avoid.milp import (GEQ, LEQ, LinTerm, MilpModel, MilpParams,
                                  ModelError, VarKey, tight_big_m)
from formation_avoid.scenario import nominal_trajectory
from formation_avoid.validation import recompute_objective

from conftest import feasible_point, make_scenario, scenario_dict, tiny_intruder_dict


class TestContainers:
    def test_varkey_names_follow_the_scheme(self):
        assert VarKey.pos(2, 1, 3).name == "x_2_1_3"
        assert VarKey.maneuver_slack(1, 2, 1).name == "g_1_2_1"
        assert VarKey.smooth_slack(4, 2).name == "k_4_2"
        assert VarKey.sep_bin(1, 1, 2, 3, 2).name == "sep_1_1_2_3_2"
        assert VarKey.wake_bin(9, 1, 3, 6).name == "wk_9_1_3_6"
        assert VarKey.intruder_bin(1, 2, 1, 1, 1).name == "a_1_2_1_1_1"
        assert VarKey.slot_assign(3, 2).name == "y_3_2"

    def test_duplicate_variable_rejected(self):
        m = MilpModel()
        m.add_var(VarKey.pos(1, 1, 1), 0, 1)
        with pytest.raises(ModelError, match="duplicate"):
            m.add_var(VarKey.pos(1, 1, 1), 0, 1)

    def test_duplicate_label_rejected(self):
        m = MilpModel()
        k = m.add_var(VarKey.pos(1, 1, 1), 0, 1)
        m.add_constraint("row", LinTerm().add(1, k), LEQ, 1)
        with pytest.raises(ModelError, match="label"):
            m.add_constraint("row", LinTerm().add(1, k), GEQ, 0)

    def test_unregistered_variable_rejected(self):
        m = MilpModel()
        with pytest.raises(ModelError, match="unregistered"):
            m.add_constraint("row", LinTerm().add(1, VarKey.pos(1, 1, 1)), LEQ, 1)

    def test_linterm_merges_duplicates(self):
        k = VarKey.pos(1, 1, 1)
        t = LinTerm().add(2.0, k).add(3.0, k).add(-5.0, VarKey.pos(1, 1, 2))
        canon = t.canonicalized()
        assert canon.terms == [(5.0, k), (-5.0, VarKey.pos(1, 1, 2))]

    def test_linterm_drops_zero_coefficients(self):
        k = VarKey.pos(1, 1, 1)
        t = LinTerm().add(2.0, k).add(-2.0, k)
        assert t.canonicalized().terms == []

    def test_constant_folds_into_rhs(self):
        m = MilpModel()
        k = m.add_var(VarKey.pos(1, 1, 1), -10, 10)
        m.add_constraint("row", LinTerm([(1.0, k)], 3.0), LEQ, 5.0)
        assert m.constraints[0].rhs == 2.0
        assert m.constraints[0].body.constant == 0.0

    def test_tight_big_m_exceeds_worst_case(self):
        m = MilpModel()
        x = m.add_var(VarKey.pos(1, 1, 1), -100.0, 200.0)
        body = LinTerm().add(1.0, x)
        params = MilpParams()
        assert tight_big_m(m, body, GEQ, 50.0, params) == 151.0  # 50 - (-100) + 1
        assert tight_big_m(m, body, LEQ, 50.0, params) == 151.0  # 200 - 50 + 1

    def test_big_m_cap_violation_raises(self):
        m = MilpModel()
        x = m.add_var(VarKey.pos(1, 1, 1), -1e7, 1e7)
        with pytest.raises(ModelError, match="big-M"):
            tight_big_m(m, LinTerm().add(1.0, x), GEQ, 0.0, MilpParams())


def _registered(s):
    m = MilpModel()
    register_variables(m, s)
    add_performance_bounds(m, s)
    return m


class TestConstraintFamilies:
    def test_dynamics_row_count(self):
        s = make_scenario(steps=10)
        m = _registered(s)
        add_dynamics(m, s)
        assert m.num_constraints == 108  # 2 * 9 * 2 * 3

    def test_dynamics_smallest_horizon(self):
        s = make_scenario(formation={"count": 1}, steps=7, terminal_window=5)
        m = MilpModel()
        register_variables(m, s)
        add_dynamics(m, s)
        assert sum(1 for c in m.constraints if c.label.startswith("dyn_")) == 36
        s2 = json.loads(json.dumps(scenario_dict(formation={"count": 1}, steps=7, terminal_window=5)))
        # per-step pair of x and v rows on each axis
        assert sum(1 for c in m.constraints if c.label.startswith("dyn_x")) == 18

    def test_calm_wind_position_rows_structure(self):
        s = make_scenario(steps=10)
        m = _registered(s)
        add_dynamics(m, s)
        row = next(c for c in m.constraints if c.label == "dyn_x(3,1,2)")
        kinds = sorted(k.kind for _, k in row.body.terms)
        assert kinds == ["v", "x", "x"]
        v_coef = next(c for c, k in row.body.terms if k.kind == "v")
        assert v_coef == -s.dt
        assert row.rhs == 0.0  # calm wind

    def test_wind_moves_to_rhs(self):
        s = make_scenario(steps=10, wind=[10.0, 0.0, 0.0])
        m = _registered(s)
        add_dynamics(m, s)
        row = next(c for c in m.constraints if c.label == "dyn_x(1,1,1)")
        assert row.rhs == 10.0 * s.dt

    def test_velocity_bounds_applied_everywhere(self):
        s = make_scenario(steps=10)
        m = _registered(s)
        for i in range(2, 11):  # step 1 is pinned to the initial state
            for p in (1, 2):
                info = m.var_info(VarKey.vel(i, p, 1))
                assert (info.lb, info.ub) == (680.0, 820.0)

    def test_acceleration_bounds_straddle_zero(self):
        s = make_scenario(steps=10)
        m = _registered(s)
        for d in (1, 2, 3):
            info = m.var_info(VarKey.acc(4, 1, d))
            assert info.lb <= 0.0 <= info.ub

    def test_reachable_box_contains_nominal(self):
        s = make_scenario(steps=10)
        m = _registered(s)
        traj = nominal_trajectory(s)
        for i in range(1, 11):
            for p in (1, 2):
                for d in (1, 2, 3):
                    info = m.var_info(VarKey.pos(i, p, d))
                    x = traj.positions[p - 1, i - 1, d - 1]
                    assert info.lb - 1e-9 <= x <= info.ub + 1e-9

    def test_pairwise_separation_counts(self):
        s = make_scenario(steps=10)
        m = _registered(s)
        add_pairwise_separation(m, s, MilpParams())
        assert sum(1 for c in m.constraints if c.label.startswith("sep(")) == 60
        assert sum(1 for c in m.constraints if c.label.startswith("sep_card")) == 10

    def test_pairwise_separation_disjunct_satisfiable(self):
        # two aircraft 400 ft apart laterally with 300 ft minima: the lateral
        # disjunct rows hold with their binaries at 0
        s = make_scenario(formation={
            "count": 2, "slot_offsets": [[0.0, 400.0, 0.0]],
            "initial_positions": [[0, 0, 0], [0, 400, 0]],
        }, steps=10)
        m = _registered(s)
        add_pairwise_separation(m, s, MilpParams())
        vals, _ = feasible_point(build_model(s), s)
        row = next(c for c in m.constraints if c.label == "sep(1,1,2,2,2)")
        lhs = sum(c * vals[k] for c, k in row.body.terms if k.kind == "x")
        assert lhs >= 300.0  # second-direction lateral gap stands on its own

    def test_single_aircraft_emits_no_separation(self):
        s = make_scenario(formation={"count": 1}, steps=10)
        m = _registered(s)
        add_pairwise_separation(m, s, MilpParams())
        assert m.num_constraints == 0

    def test_wake_counts_with_intruder(self):
        s = parse_scenario(json.dumps(scenario_dict(
            steps=10,
            intruders=[{"position": [15000.0, -15000.0, 0.0], "velocity": [0.0, 750.0, 0.0]}])))
        m = _registered(s)
        add_wake_avoidance(m, s, MilpParams())
        # generators: 2 ordered aircraft pairs + 2 aircraft-intruder pairs
        assert sum(1 for c in m.constraints if c.label.startswith("wake(")) == 6 * 10 * 4
        assert sum(1 for c in m.constraints if c.label.startswith("wake_card")) == 10 * 4

    def test_no_wake_rows_for_lone_aircraft(self):
        s = make_scenario(formation={"count": 1}, steps=10)
        m = _registered(s)
        add_wake_avoidance(m, s, MilpParams())
        assert m.num_constraints == 0

    def test_intruder_rows_and_cardinality(self):
        s = parse_scenario(json.dumps(tiny_intruder_dict()))
        m = _registered(s)
        add_intruder_separation(m, s, MilpParams())
        assert sum(1 for c in m.constraints if c.label.startswith("intr(")) == 6 * 8
        assert sum(1 for c in m.constraints if c.label.startswith("intr_card")) == 8

    def test_slot_assignment_three_aircraft(self):
        s = make_scenario(formation={"count": 3}, steps=10)
        m = _registered(s)
        add_slot_assignment(m, s)
        assert len(m.keys_of_kind("y")) == 4  # (A-1)^2
        assert m.num_constraints == 4          # 2*(A-1)

    def test_terminal_row_count_formula(self):
        s = make_scenario(steps=12)
        m = _registered(s)
        add_slot_assignment(m, s)
        n0 = m.num_constraints
        add_terminal_constraints(m, s, MilpParams())
        # 8 rows per aircraft per window step + 6*(A-1)^2 final-formation rows
        assert m.num_constraints - n0 == 8 * 5 * 2 + 6

    def test_impossibly_narrow_course_is_detected_by_solver(self):
        from formation_avoid.solvers import SolutionStatus, SolveOptions, solve
        s = make_scenario(steps=12, safety={"course_half_width": 500.0})
        sol = solve(build_model(s), SolveOptions(time_limit_s=60))
        assert sol.status is SolutionStatus.INFEASIBLE


class TestBuildModel:
    def test_count_formulas(self):
        s = parse_scenario(json.dumps(scenario_dict(
            steps=10,
            intruders=[{"position": [15000.0, -15000.0, 0.0], "velocity": [0.0, 750.0, 0.0]}])))
        m = build_model(s)
        counts = expected_counts(s)
        assert m.num_vars == counts["variables"]
        assert m.num_constraints == counts["constraints"]
        assert m.num_binaries == counts["binaries"]
        assert len(m.keys_of_kind("x")) == 60  # 3 * T * A state positions
        assert len(m.keys_of_kind("x")) + len(m.keys_of_kind("v")) + len(m.keys_of_kind("u")) == 180

    def test_lone_aircraft_model_is_lean(self):
        s = make_scenario(formation={"count": 1}, steps=10)
        m = build_model(s)
        prefixes = {c.label.split("(")[0] for c in m.constraints}
        assert prefixes == {"dyn_x", "dyn_v", "term_v1", "term_v2", "term_v3",
                            "term_u", "course_hi", "course_lo",
                            "man_hi", "man_lo", "smooth_hi", "smooth_lo",
                            "place_hi", "place_lo"}

    def test_deterministic_serialization(self):
        s = parse_scenario(json.dumps(tiny_intruder_dict()))
        assert build_model(s).canonical_text() == build_model(s).canonical_text()

    def test_objective_isolation_from_intruders(self):
        base = scenario_dict(steps=10)
        with_intr = dict(base, intruders=[
            {"position": [15000.0, -15000.0, 0.0], "velocity": [0.0, 750.0, 0.0]}])
        m1 = build_model(parse_scenario(json.dumps(base)))
        m2 = build_model(parse_scenario(json.dumps(with_intr)))
        obj1 = [(c, k.name) for c, k in m1.objective.canonicalized().terms]
        obj2 = [(c, k.name) for c, k in m2.objective.canonicalized().terms]
        assert obj1 == obj2
        assert m1.objective.constant == m2.objective.constant
        assert m2.num_constraints > m1.num_constraints

    def test_size_cap(self):
        s = make_scenario(steps=200)
        with pytest.raises(ModelError, match="size cap"):
            build_model(s, MilpParams(size_cap=300))

    def test_big_m_rows_are_sufficient(self):
        """Every relaxed row must stay satisfiable over the bounds box when
        its binary releases it: M strictly exceeds the worst-case slack."""
        s = parse_scenario(json.dumps(scenario_dict(
            steps=8, terminal_window=5,
            intruders=[{"position": [6000.0, -6000.0, 0.0], "velocity": [0.0, 750.0, 0.0]}])))
        m = build_model(s)
        checked = 0
        for con in m.constraints:
            family = con.label.split("(")[0]
            if family in ("sep", "wake", "intr"):
                # body + M*bin >= rhs: with bin = 1 the row must be vacuous
                (mcoef, _), rest = _split_big_m(con, binary_sign=+1)
                assert _body_inf(m, rest) + mcoef > con.rhs, con.label
                checked += 1
            elif family in ("place_hi", "place_lo", "form_final_hi", "form_final_lo"):
                # body + M*gate <= rhs(+M folded): gate = 0 must be vacuous
                (_, _), rest = _split_big_m(con, binary_sign=+1)
                assert _body_sup(m, rest) < con.rhs, con.label
                checked += 1
            elif family in ("drag_hi", "drag_lo"):
                # body - M*gate >= rhs(-M folded): gate = 0 must be vacuous
                (_, _), rest = _split_big_m(con, binary_sign=-1)
                assert _body_inf(m, rest) > con.rhs, con.label
                checked += 1
        assert checked > 100

    def test_nominal_point_is_feasible_with_matching_objective(self):
        s = make_scenario(steps=12)  # conflict-free, in slots
        m = build_model(s)
        vals, traj = feasible_point(m, s)
        objective, violations = m.evaluate(vals, tol=1e-6)
        assert violations == []
        breakdown = recompute_objective(traj, s)
        assert objective == pytest.approx(breakdown.total, abs=1e-9)
        assert breakdown.total == 0.0

    def test_nominal_point_violates_exactly_where_geometry_says(self):
        from formation_avoid import predict_conflict
        s = parse_scenario(json.dumps(scenario_dict(
            steps=24, intruders=[{"position": [9000.0, -9000.0, 0.0],
                                  "velocity": [0.0, 750.0, 0.0]}])))
        m = build_model(s)
        vals, traj = feasible_point(m, s)
        _, violations = m.evaluate(vals, tol=1e-6)
        assert predict_conflict(s).has_conflict
        assert violations, "conflicting nominal must violate the model"
        minima = s.safety.intruder_sep.as_array()
        box = s.safety.wake_box
        for label, _amount in violations:
            # only disjunction cardinality rows may fire, and each must match
            # the geometric fact it encodes
            family, idx = label.split("(")
            nums = [int(t) for t in idx.rstrip(")").split(",")]
            assert family in ("intr_card", "wake_card"), label
            if family == "intr_card":
                i, p, r = nums
                gaps = np.abs(traj.positions[p - 1, i - 1] - traj.intruder_positions[r - 1, i - 1])
                assert np.all(gaps < minima), label
            else:
                i, p, g = nums
                other = (traj.positions[g - 1, i - 1] if g <= s.n_aircraft
                         else traj.intruder_positions[g - s.n_aircraft - 1, i - 1])
                rel = traj.positions[p - 1, i - 1] - other
                assert (-box.behind_len <= rel[0] < 0 and abs(rel[1]) < box.half_width
                        and -box.below_depth < rel[2] < box.above_height), label


def _split_big_m(con, binary_sign):
    """Return ((coef, key), remaining_terms) for the big-M gate term: the
    single binary-kind variable in the row."""
    big = None
    rest = []
    for coef, key in con.body.terms:
        if key.kind in ("sep", "wk", "a", "b", "y"):
            assert big is None, f"two big-M terms in {con.label}"
            assert (1 if coef > 0 else -1) == binary_sign, con.label
            big = (coef, key)
        else:
            rest.append((coef, key))
    assert big is not None, f"no big-M term in {con.label}"
    return big, rest


def _body_inf(m, terms):
    lo = 0.0
    for coef, key in terms:
        info = m.var_info(key)
        lo += min(coef * info.lb, coef * info.ub)
    return lo


def _body_sup(m, terms):
    hi = 0.0
    for coef, key in terms:
        info = m.var_info(key)
        hi += max(coef * info.lb, coef * info.ub)
    return hi


class TestDisjunctionTruthTable:
    def test_encoding_matches_geometry_on_random_points(self):
        """The 6-row + cardinality-5 pattern admits a feasible binary
        completion exactly when some axis meets its minimum."""
        rng = np.random.default_rng(7)
        minima = np.array([1500.0, 1500.0, 600.0])
        m_values = np.array([1e5, 1e5, 1e5, 1e5, 1e5, 1e5])
        mismatches = 0
        for _ in range(300):
            rel = rng.uniform(-3000, 3000, size=3)
            feasible_geometric = bool(np.any(np.abs(rel) >= minima))
            ok = _truth_table_feasible(rel, minima, m_values)
            mismatches += (ok != feasible_geometric)
        assert mismatches == 0


def _truth_table_feasible(rel, minima, m_values) -> bool:
    """Rows ordered (axis, direction): row 2d+j is sign_j*rel_d >= minima_d."""
    signs = [(d, sign) for d in range(3) for sign in (+1.0, -1.0)]
    for pattern in itertools.product((0, 1), repeat=6):
        if sum(pattern) > 5:
            continue
        if all(sign * rel[d] >= minima[d] - m_values[row] * pattern[row]
               for row, (d, sign) in enumerate(signs)):
            return True
    return False
