"""Command-line surface: build | solve | validate | report | sweep.

Exit codes: 0 success, 2 bad input (schema/physics/CSV), 3 model proven
infeasible, 4 time limit with no incumbent, 5 backend unavailable or solver
failure, 6 trajectory fails hard validation.  Every command writes a
manifest listing its inputs and the sha256 of every output file; reruns
with identical inputs differ only in the timestamp field.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from .formulation import build_model
from .lp_format import export_lp
from .milp import MilpParams, ModelError
from .scenario import ScenarioError, parse_scenario, scenario_to_json, intruder_positions
from .solvers import (BackendUnavailable, SolveOptions, SolutionStatus,
                      SolverError, extract_trajectories, solve)
from .traj_io import (TrajectoryCsvError, read_trajectory_csv, report_series,
                      write_trajectory_csv)
from .validation import validate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_TIMEOUT = 4
EXIT_BACKEND = 5
EXIT_VALIDATION = 6


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _write(path: Path, text: str) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return _sha256(text)


def _manifest(out_dir: Path, command: str, scenario_path: str | None,
              scenario_text: str | None, options: dict, backend: str | None,
              outputs: dict[str, str]):
    doc = {
        "command": command,
        "scenario": None if scenario_path is None else
                    {"path": str(scenario_path), "sha256": _sha256(scenario_text)},
        "options": options,
        "backend": backend,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "outputs": outputs,
    }
    _write(out_dir / "manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(what, f"cannot read {path}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# build

def cmd_build(args) -> int:
    text = _read_text(args.scenario, "scenario")
    s = parse_scenario(text)
    model = build_model(s, MilpParams())
    lp = export_lp(model)
    out = Path(args.out)
    outputs = {"model.lp": _write(out / "model.lp", lp)}
    _manifest(out, "build", args.scenario, text, {}, None, outputs)
    print(f"wrote {out / 'model.lp'}: {model.num_vars} variables, "
          f"{model.num_constraints} rows, {model.num_binaries} binaries")
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve

def _solve_options(args) -> SolveOptions:
    return SolveOptions(relative_gap_target=args.gap, time_limit_s=args.time_limit,
                        seed=args.seed, backend=args.backend)


def cmd_solve(args) -> int:
    text = _read_text(args.scenario, "scenario")
    s = parse_scenario(text)
    model = build_model(s, MilpParams())
    opts = _solve_options(args)
    sol = solve(model, opts)
    gap = "n/a" if sol.relative_gap is None else f"{sol.relative_gap:.4%}"
    print(f"status={sol.status.value} objective="
          f"{'n/a' if sol.objective is None else f'{sol.objective:.6f}'} "
          f"gap={gap} wall={sol.stats.wall_time_s:.1f}s backend={sol.stats.backend}")
    if sol.status is SolutionStatus.INFEASIBLE:
        return EXIT_INFEASIBLE
    if sol.status is SolutionStatus.TIMED_OUT_NO_SOLUTION:
        return EXIT_TIMEOUT
    if sol.status is SolutionStatus.UNBOUNDED:
        print("model reported unbounded; this indicates a corrupted model", file=sys.stderr)
        return EXIT_BACKEND

    traj, breakdown = extract_trajectories(model, sol, s)
    out = Path(args.out)
    csv_text = write_trajectory_csv(traj)
    breakdown_doc = dict(breakdown.to_dict(),
                         solver_objective=sol.objective,
                         relative_gap=sol.relative_gap,
                         status=sol.status.value)
    outputs = {
        "trajectory.csv": _write(out / "trajectory.csv", csv_text),
        "breakdown.json": _write(out / "breakdown.json",
                                 json.dumps(breakdown_doc, indent=2, sort_keys=True) + "\n"),
    }
    opt_doc = {"gap": args.gap, "time_limit": args.time_limit, "seed": args.seed}
    _manifest(out, "solve", args.scenario, text, opt_doc, sol.stats.backend, outputs)
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate

def cmd_validate(args) -> int:
    text = _read_text(args.scenario, "scenario")
    s = parse_scenario(text)
    csv_text = _read_text(args.trajectory, "trajectory")
    traj = read_trajectory_csv(csv_text)
    if traj.n_aircraft != s.n_aircraft or traj.steps != s.steps:
        raise TrajectoryCsvError(
            f"trajectory is {traj.n_aircraft} aircraft x {traj.steps} steps; "
            f"scenario needs {s.n_aircraft} x {s.steps}")
    if traj.steps >= 2 and abs(traj.dt - s.dt) > 1e-9:
        raise TrajectoryCsvError(f"trajectory dt {traj.dt} != scenario dt {s.dt}")
    if traj.n_intruders != s.n_intruders:
        raise TrajectoryCsvError(
            f"trajectory has {traj.n_intruders} intruders, scenario {s.n_intruders}")
    if s.n_intruders:
        import numpy as np
        ref = intruder_positions(s)
        if float(np.max(np.abs(ref - traj.intruder_positions))) > 1e-6:
            raise TrajectoryCsvError("intruder tracks in the CSV do not match the scenario")

    report = validate(traj, s, samples_per_step=args.samples_per_step)
    doc = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        _write(Path(args.out), doc)
    print(doc, end="")
    return EXIT_OK if report.passed else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# report

def cmd_report(args) -> int:
    csv_text = _read_text(args.trajectory, "trajectory")
    out = Path(args.out)
    try:
        traj = read_trajectory_csv(csv_text)
    except TrajectoryCsvError as exc:
        if "no data rows" in str(exc):
            print("warning: empty trajectory, nothing to report", file=sys.stderr)
            out.mkdir(parents=True, exist_ok=True)
            return EXIT_OK
        raise
    outputs = {}
    for name, content in report_series(traj).items():
        outputs[name] = _write(out / name, content)
    _manifest(out, "report", None, None, {}, None, outputs)
    print(f"wrote {len(outputs)} series files to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def _sweep_cells(s, spec: dict) -> list[dict]:
    idx = spec.get("intruder", 1)
    if not isinstance(idx, int) or not 1 <= idx <= s.n_intruders:
        raise ScenarioError("sweep.intruder", f"intruder index {idx} out of range")
    intr = s.intruders[idx - 1]
    base_speed = math.hypot(intr.velocity.d1, intr.velocity.d2)
    base_heading = math.degrees(math.atan2(intr.velocity.d2, intr.velocity.d1))
    axes = {
        "d1": spec.get("d1", [intr.position.d1]),
        "d2": spec.get("d2", [intr.position.d2]),
        "speed": spec.get("speed", [base_speed]),
        "heading_deg": spec.get("heading_deg", [base_heading]),
    }
    for key, vals in axes.items():
        if not isinstance(vals, list) or not all(isinstance(v, (int, float)) for v in vals):
            raise ScenarioError(f"sweep.{key}", "expected a list of numbers")
    cells = []
    for d1 in axes["d1"]:
        for d2 in axes["d2"]:
            for speed in axes["speed"]:
                for heading in axes["heading_deg"]:
                    cells.append({"d1": float(d1), "d2": float(d2),
                                  "speed": float(speed), "heading_deg": float(heading)})
    return cells


def _sweep_worker(payload: dict) -> dict:
    """Solve one sweep cell; never raises (failures are recorded in-row)."""
    cell = payload["cell"]
    row = dict(cell)
    try:
        doc = json.loads(payload["scenario_json"])
        intr = doc["intruders"][payload["intruder"] - 1]
        rad = math.radians(cell["heading_deg"])
        intr["position"] = [cell["d1"], cell["d2"], intr["position"][2]]
        intr["velocity"] = [cell["speed"] * math.cos(rad),
                            cell["speed"] * math.sin(rad), intr["velocity"][2]]
        s = parse_scenario(json.dumps(doc))
        model = build_model(s, MilpParams())
        t0 = time.monotonic()
        sol = solve(model, SolveOptions(**payload["options"]))
        row.update(status=sol.status.value,
                   objective="" if sol.objective is None else sol.objective,
                   relative_gap="" if sol.relative_gap is None else sol.relative_gap,
                   wall_time_s=round(time.monotonic() - t0, 3), error="")
    except Exception as exc:  # cell failures never abort the sweep
        row.update(status="error", objective="", relative_gap="",
                   wall_time_s="", error=str(exc))
    return row


SWEEP_COLUMNS = ["cell", "d1", "d2", "speed", "heading_deg",
                 "status", "objective", "relative_gap", "wall_time_s", "error"]


def cmd_sweep(args) -> int:
    text = _read_text(args.scenario, "scenario")
    s = parse_scenario(text)
    spec_text = _read_text(args.sweep_spec, "sweep-spec")
    try:
        spec = json.loads(spec_text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("sweep-spec", f"not valid JSON: {exc}") from None
    if not isinstance(spec, dict):
        raise ScenarioError("sweep-spec", "expected a JSON object")
    unknown = set(spec) - {"intruder", "d1", "d2", "speed", "heading_deg"}
    if unknown:
        raise ScenarioError("sweep-spec", f"unknown key(s): {', '.join(sorted(unknown))}")

    cells = _sweep_cells(s, spec)
    scenario_json = scenario_to_json(s)
    options = {"relative_gap_target": args.gap, "time_limit_s": args.time_limit,
               "seed": args.seed, "backend": args.backend}
    payloads = [{"scenario_json": scenario_json, "intruder": spec.get("intruder", 1),
                 "cell": cell, "options": options} for cell in cells]

    jobs = args.jobs or os.cpu_count() or 1
    if jobs > 1 and len(payloads) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_worker, payloads))
    else:
        rows = [_sweep_worker(p) for p in payloads]

    lines = [",".join(SWEEP_COLUMNS)]
    for k, row in enumerate(rows, start=1):
        lines.append(",".join(str(v) for v in
                              [k, row["d1"], row["d2"], row["speed"], row["heading_deg"],
                               row["status"], row["objective"], row["relative_gap"],
                               row["wall_time_s"], row["error"].replace(",", ";")]))
    table = "\n".join(lines) + "\n"
    out = Path(args.out)
    outputs = {"results.csv": _write(out / "results.csv", table)}
    _manifest(out, "sweep", args.scenario, text,
              {"jobs": jobs, "cells": len(cells), **options}, args.backend or None, outputs)
    print(table, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="formation-avoid",
        description="MILP avoidance-trajectory planning for aircraft formations")
    sub = p.add_subparsers(dest="command", required=True)

    def common_solver_flags(sp):
        sp.add_argument("--backend", default="",
                        help="MILP backend (default: $FORMATION_MILP_BACKEND or first available)")
        sp.add_argument("--gap", type=float, default=0.05,
                        help="relative optimality gap target (default 0.05)")
        sp.add_argument("--time-limit", type=float, default=900.0,
                        help="solver time limit in seconds (default 900)")
        sp.add_argument("--seed", type=int, default=0, help="recorded in the manifest")

    sp = sub.add_parser("build", help="export the model as an LP file")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("solve", help="solve a scenario and write the trajectory")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    common_solver_flags(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("validate", help="independently check a trajectory CSV")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--trajectory", required=True)
    sp.add_argument("--out", default="", help="optional report JSON path")
    sp.add_argument("--samples-per-step", type=int, default=8)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("report", help="emit per-craft plot-data series")
    sp.add_argument("--trajectory", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("sweep", help="solve a grid of intruder geometries")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--sweep-spec", required=True,
                    help='JSON: {"intruder":1,"d1":[...],"d2":[...],"speed":[...],"heading_deg":[...]}')
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--jobs", type=int, default=0,
                    help="parallel cells (default: logical core count)")
    common_solver_flags(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, TrajectoryCsvError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BackendUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: set --backend or FORMATION_MILP_BACKEND to an installed engine "
              "(scipy needs SciPy with HiGHS, glpk needs cvxopt)", file=sys.stderr)
        return EXIT_BACKEND
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
