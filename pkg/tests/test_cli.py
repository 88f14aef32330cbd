import json
import shutil
from pathlib import Path

import pytest

from formation_avoid.cli import main
from formation_avoid.scenario import nominal_trajectory, parse_scenario
from formation_avoid.traj_io import (read_trajectory_csv, report_series,
                                     write_trajectory_csv)

from conftest import CONFIG_DIR, config_text, tiny_intruder_dict


@pytest.fixture
def tiny_path(tmp_path):
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps(tiny_intruder_dict()))
    return p


def _manifest(out_dir: Path) -> dict:
    return json.loads((out_dir / "manifest.json").read_text())


class TestBuild:
    def test_bundled_config_builds(self, tmp_path):
        rc = main(["build", "--scenario", str(CONFIG_DIR / "side_intruder_2ac.json"),
                   "--out", str(tmp_path / "b")])
        assert rc == 0
        assert (tmp_path / "b" / "model.lp").exists()
        man = _manifest(tmp_path / "b")
        assert man["command"] == "build"
        assert set(man["outputs"]) == {"model.lp"}

    def test_malformed_config_exits_2_without_output(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"dt": -1}')
        out = tmp_path / "b"
        rc = main(["build", "--scenario", str(bad), "--out", str(out)])
        assert rc == 2
        assert not out.exists()

    def test_missing_file_exits_2(self, tmp_path):
        rc = main(["build", "--scenario", str(tmp_path / "nope.json"),
                   "--out", str(tmp_path / "b")])
        assert rc == 2

    def test_build_twice_is_byte_identical(self, tiny_path, tmp_path):
        main(["build", "--scenario", str(tiny_path), "--out", str(tmp_path / "b1")])
        main(["build", "--scenario", str(tiny_path), "--out", str(tmp_path / "b2")])
        lp1 = (tmp_path / "b1" / "model.lp").read_bytes()
        lp2 = (tmp_path / "b2" / "model.lp").read_bytes()
        assert lp1 == lp2
        m1, m2 = _manifest(tmp_path / "b1"), _manifest(tmp_path / "b2")
        m1.pop("created_utc"), m2.pop("created_utc")
        assert m1 == m2


class TestSolve:
    def test_tiny_solve_writes_outputs(self, tiny_path, tmp_path, capsys):
        out = tmp_path / "s"
        rc = main(["solve", "--scenario", str(tiny_path), "--out", str(out),
                   "--gap", "0.0001", "--time-limit", "60"])
        assert rc == 0
        printed = capsys.readouterr().out
        assert "status=optimal" in printed and "gap=" in printed
        breakdown = json.loads((out / "breakdown.json").read_text())
        assert breakdown["total"] == pytest.approx(breakdown["solver_objective"], rel=1e-4)
        traj = read_trajectory_csv((out / "trajectory.csv").read_text())
        assert traj.n_aircraft == 1 and traj.steps == 8
        assert set(_manifest(out)["outputs"]) == {"trajectory.csv", "breakdown.json"}

    def test_conflict_free_scenario_has_zero_maneuver_cost(self, tmp_path):
        doc = dict(tiny_intruder_dict(), intruders=[])
        sc = tmp_path / "free.json"
        sc.write_text(json.dumps(doc))
        out = tmp_path / "s"
        rc = main(["solve", "--scenario", str(sc), "--out", str(out),
                   "--gap", "0.0001", "--time-limit", "60"])
        assert rc == 0
        breakdown = json.loads((out / "breakdown.json").read_text())
        assert breakdown["maneuver"] == pytest.approx(0.0, abs=1e-9)

    def test_infeasible_exits_3(self, tmp_path):
        rc = main(["solve", "--scenario", str(CONFIG_DIR / "infeasible_terminal_2ac.json"),
                   "--out", str(tmp_path / "s"), "--time-limit", "300"])
        assert rc == 3
        assert not (tmp_path / "s" / "trajectory.csv").exists()

    def test_timeout_without_incumbent_exits_4(self, tmp_path):
        rc = main(["solve", "--scenario", str(CONFIG_DIR / "side_intruder_2ac.json"),
                   "--out", str(tmp_path / "s"), "--time-limit", "0.01"])
        assert rc == 4

    def test_unknown_backend_exits_5_with_hint(self, tiny_path, tmp_path, capsys):
        rc = main(["solve", "--scenario", str(tiny_path), "--out", str(tmp_path / "s"),
                   "--backend", "cplex"])
        assert rc == 5
        assert "hint" in capsys.readouterr().err

    def test_solve_rerun_is_deterministic(self, tiny_path, tmp_path):
        for d in ("s1", "s2"):
            main(["solve", "--scenario", str(tiny_path), "--out", str(tmp_path / d),
                  "--gap", "0.0001", "--time-limit", "60"])
        assert ((tmp_path / "s1" / "trajectory.csv").read_bytes()
                == (tmp_path / "s2" / "trajectory.csv").read_bytes())
        assert ((tmp_path / "s1" / "breakdown.json").read_bytes()
                == (tmp_path / "s2" / "breakdown.json").read_bytes())


class TestValidateCommand:
    def _solve(self, tiny_path, tmp_path):
        out = tmp_path / "s"
        assert main(["solve", "--scenario", str(tiny_path), "--out", str(out),
                     "--gap", "0.0001", "--time-limit", "60"]) == 0
        return out / "trajectory.csv"

    def test_solver_output_feeds_back_clean(self, tiny_path, tmp_path, capsys):
        csv_path = self._solve(tiny_path, tmp_path)
        rc = main(["validate", "--scenario", str(tiny_path), "--trajectory", str(csv_path),
                   "--out", str(tmp_path / "report.json")])
        assert rc == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["overall_pass"] is True

    def test_nominal_under_conflict_geometry_exits_6(self, tmp_path):
        sc = CONFIG_DIR / "side_intruder_2ac.json"
        s = parse_scenario(sc.read_text())
        csv_path = tmp_path / "nominal.csv"
        csv_path.write_text(write_trajectory_csv(nominal_trajectory(s)))
        rc = main(["validate", "--scenario", str(sc), "--trajectory", str(csv_path)])
        assert rc == 6

    def test_truncated_csv_exits_2(self, tiny_path, tmp_path):
        csv_path = self._solve(tiny_path, tmp_path)
        lines = csv_path.read_text().splitlines()
        truncated = tmp_path / "cut.csv"
        truncated.write_text("\n".join(lines[:5]) + "\n")
        rc = main(["validate", "--scenario", str(tiny_path), "--trajectory", str(truncated)])
        assert rc == 2

    def test_wrong_scenario_shape_exits_2(self, tiny_path, tmp_path):
        csv_path = self._solve(tiny_path, tmp_path)
        rc = main(["validate", "--scenario", str(CONFIG_DIR / "side_intruder_2ac.json"),
                   "--trajectory", str(csv_path)])
        assert rc == 2


class TestReport:
    def test_per_craft_series_files(self, tiny_path, tmp_path):
        out = tmp_path / "s"
        main(["solve", "--scenario", str(tiny_path), "--out", str(out),
              "--gap", "0.0001", "--time-limit", "60"])
        rep = tmp_path / "r"
        rc = main(["report", "--trajectory", str(out / "trajectory.csv"), "--out", str(rep)])
        assert rc == 0
        names = {p.name for p in rep.iterdir()}
        assert names == {"topdown_A1.dat", "side_A1.dat", "velocity_A1.dat",
                         "topdown_I1.dat", "side_I1.dat", "velocity_I1.dat",
                         "manifest.json"}

    def test_co_altitude_intruder_side_view_is_single_altitude(self, tiny_path, tmp_path):
        out = tmp_path / "s"
        main(["solve", "--scenario", str(tiny_path), "--out", str(out),
              "--gap", "0.0001", "--time-limit", "60"])
        traj = read_trajectory_csv((out / "trajectory.csv").read_text())
        side = report_series(traj)["side_I1.dat"]
        altitudes = {line.split()[1] for line in side.splitlines()[1:]}
        assert altitudes == {"0"}

    def test_two_aircraft_plus_intruder_gives_three_tracks_per_view(self):
        s = parse_scenario(config_text("side_intruder_2ac.json"))
        files = report_series(nominal_trajectory(s))
        topdown = [n for n in files if n.startswith("topdown_")]
        side = [n for n in files if n.startswith("side_")]
        assert sorted(topdown) == ["topdown_A1.dat", "topdown_A2.dat", "topdown_I1.dat"]
        assert sorted(side) == ["side_A1.dat", "side_A2.dat", "side_I1.dat"]

    def test_empty_trajectory_warns_and_exits_0(self, tmp_path, capsys):
        empty = tmp_path / "empty.csv"
        empty.write_text("step,time_s,aircraft,x1_ft,x2_ft,x3_ft,v1_fps,v2_fps,v3_fps,"
                         "u1_fps2,u2_fps2,u3_fps2\n")
        rc = main(["report", "--trajectory", str(empty), "--out", str(tmp_path / "r")])
        assert rc == 0
        assert "empty trajectory" in capsys.readouterr().err
        assert list((tmp_path / "r").iterdir()) == []


class TestSweep:
    def test_three_by_three_grid(self, tiny_path, tmp_path):
        spec = tmp_path / "sweep.json"
        spec.write_text(json.dumps({"d2": [1520.0, 1600.0, 1800.0],
                                    "speed": [700.0, 750.0, 800.0]}))
        out = tmp_path / "w"
        rc = main(["sweep", "--scenario", str(tiny_path), "--sweep-spec", str(spec),
                   "--out", str(out), "--jobs", "2", "--gap", "0.001",
                   "--time-limit", "60"])
        assert rc == 0
        lines = (out / "results.csv").read_text().splitlines()
        assert len(lines) == 10  # header + 9 cells
        assert lines[0].startswith("cell,d1,d2,speed,heading_deg,status")
        statuses = [ln.split(",")[5] for ln in lines[1:]]
        assert all(st in ("optimal", "feasible_with_gap", "infeasible") for st in statuses)

    def test_impossible_cell_is_recorded_not_fatal(self, tiny_path, tmp_path):
        # a cell whose intruder sits on top of the fixed initial state is
        # infeasible; the other cell still solves
        spec = tmp_path / "sweep.json"
        spec.write_text(json.dumps({"d2": [0.0, 1520.0], "intruder": 1}))
        out = tmp_path / "w"
        rc = main(["sweep", "--scenario", str(tiny_path), "--sweep-spec", str(spec),
                   "--out", str(out), "--jobs", "1", "--gap", "0.001",
                   "--time-limit", "60"])
        assert rc == 0
        lines = (out / "results.csv").read_text().splitlines()
        by_d2 = {ln.split(",")[2]: ln.split(",")[5] for ln in lines[1:]}
        assert by_d2["0.0"] == "infeasible"
        assert by_d2["1520.0"] == "optimal"

    def test_empty_grid(self, tiny_path, tmp_path):
        spec = tmp_path / "sweep.json"
        spec.write_text(json.dumps({"d2": []}))
        out = tmp_path / "w"
        rc = main(["sweep", "--scenario", str(tiny_path), "--sweep-spec", str(spec),
                   "--out", str(out)])
        assert rc == 0
        assert (out / "results.csv").read_text().splitlines() == [
            "cell,d1,d2,speed,heading_deg,status,objective,relative_gap,wall_time_s,error"]

    def test_bad_spec_exits_2(self, tiny_path, tmp_path):
        spec = tmp_path / "sweep.json"
        spec.write_text(json.dumps({"warp": [1]}))
        rc = main(["sweep", "--scenario", str(tiny_path), "--sweep-spec", str(spec),
                   "--out", str(tmp_path / "w")])
        assert rc == 2


class TestTrajectoryCsv:
    def test_round_trip(self, tiny_path):
        s = parse_scenario(tiny_path.read_text())
        traj = nominal_trajectory(s)
        back = read_trajectory_csv(write_trajectory_csv(traj))
        assert back.steps == traj.steps and back.dt == traj.dt
        assert (back.positions == traj.positions).all()
        assert (back.intruder_positions == traj.intruder_positions).all()

    def test_header_mismatch(self):
        import pytest as _pytest
        from formation_avoid.traj_io import TrajectoryCsvError
        with _pytest.raises(TrajectoryCsvError, match="header"):
            read_trajectory_csv("a,b,c\n1,2,3\n")
