"""Flat trajectory CSV and plot-data emission.

One schema serves solve, validate and report:
``step,time_s,aircraft,x1_ft,x2_ft,x3_ft,v1_fps,v2_fps,v3_fps,u1_fps2,u2_fps2,u3_fps2``
with formation aircraft ids ``A1..An`` and intruders ``I1..``; steps are
1-based.  Intruder rows carry their constant velocity and zero acceleration.
"""

from __future__ import annotations

import csv
import io
import re

import numpy as np

from .milp import fmt
from .scenario import TrajectorySet

__all__ = ["CSV_HEADER", "TrajectoryCsvError", "write_trajectory_csv",
           "read_trajectory_csv", "report_series"]

CSV_HEADER = ["step", "time_s", "aircraft",
              "x1_ft", "x2_ft", "x3_ft",
              "v1_fps", "v2_fps", "v3_fps",
              "u1_fps2", "u2_fps2", "u3_fps2"]

_ID_RE = re.compile(r"^([AI])([1-9]\d*)$")


class TrajectoryCsvError(ValueError):
    pass


def write_trajectory_csv(traj: TrajectorySet) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    times = traj.times

    def rows(ident, pos, vel, acc):
        for i in range(traj.steps):
            w.writerow([i + 1, fmt(times[i]), ident,
                        *(fmt(pos[i, d]) for d in range(3)),
                        *(fmt(vel[i, d]) for d in range(3)),
                        *(fmt(acc[i, d]) for d in range(3))])

    zero = np.zeros((traj.steps, 3))
    for p in range(traj.n_aircraft):
        rows(f"A{p + 1}", traj.positions[p], traj.velocities[p], traj.accelerations[p])
    for r in range(traj.n_intruders):
        rows(f"I{r + 1}", traj.intruder_positions[r], traj.intruder_velocities[r], zero)
    return out.getvalue()


def read_trajectory_csv(text: str) -> TrajectorySet:
    """Parse the flat schema back into a TrajectorySet.

    Requires the exact header, contiguous 1-based steps for every craft and
    consistent times; raises TrajectoryCsvError otherwise.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TrajectoryCsvError("empty file") from None
    if header != CSV_HEADER:
        raise TrajectoryCsvError(f"bad header: expected {','.join(CSV_HEADER)}")

    series: dict[str, dict[int, list[float]]] = {}
    times: dict[int, float] = {}
    for ln, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise TrajectoryCsvError(f"line {ln}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        ident = row[2]
        if not _ID_RE.match(ident):
            raise TrajectoryCsvError(f"line {ln}: bad craft id {ident!r}")
        try:
            step = int(row[0])
            values = [float(v) for v in row[1:2] + row[3:]]
        except ValueError as exc:
            raise TrajectoryCsvError(f"line {ln}: {exc}") from None
        t, state = values[0], values[1:]
        if step in series.setdefault(ident, {}):
            raise TrajectoryCsvError(f"line {ln}: duplicate step {step} for {ident}")
        if step in times and times[step] != t:
            raise TrajectoryCsvError(f"line {ln}: inconsistent time {t} at step {step}")
        times[step] = t
        series[ident][step] = state

    if not series:
        raise TrajectoryCsvError("no data rows")
    steps = sorted(times)
    T = len(steps)
    if steps != list(range(1, T + 1)):
        raise TrajectoryCsvError(f"steps are not contiguous from 1: {steps[:5]}...")
    for ident, per_step in series.items():
        if len(per_step) != T:
            raise TrajectoryCsvError(f"{ident} has {len(per_step)} rows, expected {T}")

    if T >= 2:
        dts = np.diff([times[i] for i in steps])
        if np.ptp(dts) > 1e-9 or dts[0] <= 0:
            raise TrajectoryCsvError("time column is not a uniform increasing grid")
        dt = float(dts[0])
    else:
        dt = 1.0

    def ids_of(prefix):
        found = sorted(int(_ID_RE.match(k).group(2)) for k in series if k.startswith(prefix))
        if found != list(range(1, len(found) + 1)):
            raise TrajectoryCsvError(f"{prefix} ids are not contiguous from 1: {found}")
        return found

    a_ids, i_ids = ids_of("A"), ids_of("I")
    if not a_ids:
        raise TrajectoryCsvError("no formation aircraft rows")

    def unpack(idents, prefix):
        n = len(idents)
        pos = np.empty((n, T, 3))
        vel = np.empty((n, T, 3))
        acc = np.empty((n, T, 3))
        for k in idents:
            per_step = series[f"{prefix}{k}"]
            for i in steps:
                state = per_step[i]
                pos[k - 1, i - 1] = state[0:3]
                vel[k - 1, i - 1] = state[3:6]
                acc[k - 1, i - 1] = state[6:9]
        return pos, vel, acc

    pos, vel, acc = unpack(a_ids, "A")
    ipos, ivel, _ = unpack(i_ids, "I") if i_ids else (np.zeros((0, T, 3)),) * 3
    return TrajectorySet(dt, pos, vel, acc, ipos, ivel)


def report_series(traj: TrajectorySet) -> dict[str, str]:
    """Per-craft plot-data files: top-down track (along-course vs lateral),
    side view (along-course vs vertical) and velocity traces, as plain
    columnar text for any plotting tool."""
    files: dict[str, str] = {}
    times = traj.times

    def emit(ident, pos, vel):
        top = ["# x1_ft x2_ft"]
        side = ["# x1_ft x3_ft"]
        vtr = ["# time_s v1_fps v2_fps v3_fps"]
        for i in range(traj.steps):
            top.append(f"{fmt(pos[i, 0])} {fmt(pos[i, 1])}")
            side.append(f"{fmt(pos[i, 0])} {fmt(pos[i, 2])}")
            vtr.append(f"{fmt(times[i])} {fmt(vel[i, 0])} {fmt(vel[i, 1])} {fmt(vel[i, 2])}")
        files[f"topdown_{ident}.dat"] = "\n".join(top) + "\n"
        files[f"side_{ident}.dat"] = "\n".join(side) + "\n"
        files[f"velocity_{ident}.dat"] = "\n".join(vtr) + "\n"

    for p in range(traj.n_aircraft):
        emit(f"A{p + 1}", traj.positions[p], traj.velocities[p])
    for r in range(traj.n_intruders):
        emit(f"I{r + 1}", traj.intruder_positions[r], traj.intruder_velocities[r])
    return files
