import json
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from formation_avoid import parse_scenario
from formation_avoid.milp import VarKey
from formation_avoid.scenario import designated_position_array, nominal_trajectory

CONFIG_DIR = Path(str(resources.files("formation_avoid") / "configs"))

# evasive-rated envelope used by the bundled configs
EVASIVE_ENVELOPE = {
    "v_min": [680.0, -220.0, -42.0], "v_max": [820.0, 220.0, 42.0],
    "u_min": [-2.0, -18.0, -4.0], "u_max": [2.0, 18.0, 4.0],
}


def config_text(name: str) -> str:
    return (CONFIG_DIR / name).read_text()


def scenario_dict(**overrides) -> dict:
    doc = {"dt": 1.0, "steps": 12, "formation": {"count": 2},
           "envelope": dict(EVASIVE_ENVELOPE)}
    doc.update(overrides)
    return doc


def make_scenario(**overrides):
    return parse_scenario(json.dumps(scenario_dict(**overrides)))


def tiny_intruder_dict() -> dict:
    """One aircraft, one slowly converging co-speed intruder, T=8: the
    smallest scenario that forces a lateral deviation."""
    return {
        "dt": 1.0, "steps": 8, "terminal_window": 5,
        "formation": {"count": 1},
        "intruders": [{"position": [0.0, 1520.0, 0.0], "velocity": [750.0, -6.25, 0.0]}],
        "envelope": dict(EVASIVE_ENVELOPE),
    }


@pytest.fixture
def tiny_intruder_scenario():
    return parse_scenario(json.dumps(tiny_intruder_dict()))


def feasible_point(model, s):
    """Extend the nominal trajectory to a full variable assignment: zero
    slacks, identity slots, and disjunction binaries chosen geometrically
    (0 exactly where the corresponding one-sided row holds)."""
    traj = nominal_trajectory(s)
    A, T = s.n_aircraft, s.steps
    vals = {}
    for i in range(1, T + 1):
        for p in range(1, A + 1):
            for d in range(1, 4):
                vals[VarKey.pos(i, p, d)] = traj.positions[p - 1, i - 1, d - 1]
                vals[VarKey.vel(i, p, d)] = traj.velocities[p - 1, i - 1, d - 1]
                vals[VarKey.acc(i, p, d)] = 0.0
                vals[VarKey.maneuver_slack(i, p, d)] = 0.0
            vals[VarKey.at_place(i, p)] = 1.0
            if p >= 2:
                for d in range(1, 4):
                    vals[VarKey.drag_slack(i, p, d)] = 0.0
            if i >= 2:
                vals[VarKey.smooth_slack(i, p)] = 0.0
    for p in range(2, A + 1):
        for slot in range(1, A):
            vals[VarKey.slot_assign(p, slot)] = 1.0 if slot == p - 1 else 0.0

    sep = s.safety.formation_sep
    box = s.safety.wake_box
    faces = ((1, +1, 0.0), (1, -1, box.behind_len),
             (2, +1, box.half_width), (2, -1, box.half_width),
             (3, +1, box.above_height), (3, -1, box.below_depth))
    for i in range(1, T + 1):
        for p in range(1, A + 1):
            for q in range(p + 1, A + 1):
                for d in range(1, 4):
                    gap = traj.positions[p - 1, i - 1, d - 1] - traj.positions[q - 1, i - 1, d - 1]
                    vals[VarKey.sep_bin(i, p, q, d, 1)] = 0.0 if gap >= sep[d - 1] else 1.0
                    vals[VarKey.sep_bin(i, p, q, d, 2)] = 0.0 if -gap >= sep[d - 1] else 1.0
            generators = [q for q in range(1, A + 1) if q != p]
            generators += [A + r for r in range(1, s.n_intruders + 1)]
            for q in generators:
                if q <= A:
                    other = traj.positions[q - 1, i - 1]
                else:
                    other = traj.intruder_positions[q - A - 1, i - 1]
                rel = traj.positions[p - 1, i - 1] - other
                for f, (d, sign, thr) in enumerate(faces, start=1):
                    vals[VarKey.wake_bin(i, p, q, f)] = 0.0 if sign * rel[d - 1] >= thr else 1.0
            for r in range(1, s.n_intruders + 1):
                gap = traj.positions[p - 1, i - 1] - traj.intruder_positions[r - 1, i - 1]
                minima = s.safety.intruder_sep
                for d in range(1, 4):
                    vals[VarKey.intruder_bin(i, p, r, d, 1)] = 0.0 if gap[d - 1] >= minima[d - 1] else 1.0
                    vals[VarKey.intruder_bin(i, p, r, d, 2)] = 0.0 if -gap[d - 1] >= minima[d - 1] else 1.0

    # at-place binaries must drop to 0 wherever the nominal point is off target
    designated = designated_position_array(s)
    tol = s.safety.formation_tol.as_array()
    for i in range(1, T + 1):
        for p in range(1, A + 1):
            dev = np.abs(traj.positions[p - 1, i - 1] - designated[p - 1, i - 1])
            if np.any(dev > tol):
                vals[VarKey.at_place(i, p)] = 0.0
    return vals, traj
