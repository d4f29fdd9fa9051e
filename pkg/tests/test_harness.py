import csv
import io
import json
import math

import pytest

from squatjump import cli, harness
from squatjump.harness import EXIT_CONFIG, EXIT_FAULT, EXIT_OK, SWEEP_FIELDS, ScenarioError

SHORT = {
    "name": "short",
    "model": "builtin:icub_sagittal",
    "jump": {"height": 0.04, "displacement": 0.11},
    "controller": {"mode": "velocity"},
    "sim": {"duration": 0.02},
    "expectations": [{"field": "status", "equals": "no_takeoff"}],
}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_bundled_scenarios_pass(bundled_runs):
    assert set(bundled_runs) == {"velocity_jump_4cm", "torque_jump_4cm", "ablation_momentum"}
    for name, rec in bundled_runs.items():
        assert rec["codes"] == [EXIT_OK, EXIT_OK], (name, rec["lines"])
        assert all(line.startswith("PASS ") for line in rec["lines"])
        for d in rec["dirs"]:
            assert (d / "profile.csv").is_file() and (d / "summary.json").is_file()
    s = bundled_runs["velocity_jump_4cm"]["summary"]
    assert s["passed"] is True and len(s["expectations"]) == 7
    assert s["takeoff_speed"] == pytest.approx(0.886, rel=0.05)
    ab = bundled_runs["ablation_momentum"]
    for run in ("constrained", "unconstrained"):
        assert (ab["dirs"][0] / run / "log.csv").is_file()
    assert set(ab["summary"]["runs"]) == {"constrained", "unconstrained"}


def test_malformed_json_exits_2_without_artifacts(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x", "jump": ')
    out = tmp_path / "out"
    assert cli.main(["run", str(bad), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert "not valid JSON" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.json")]) == EXIT_CONFIG


@pytest.mark.parametrize("patch", [
    {"colour": "red"},
    {"jump": {"height": -0.04, "displacement": 0.11}},
    {"controller": {"mode": "position"}},
    {"sim": {"contact": {"stiffness": 0.0}}},
    {"sim": {"gravity": [0.0, 0.0, -1.62]}},
    {"model": "nowhere.json"},
    {"feet": ["left_foot", "hand"]},
    {"runs": {"a": {"output": "x"}}},
    {"expectations": [{"field": "takeoff_sped", "min": 0.8}]},
    {"expectations": [{"field": "takeoff_speed"}]},
    {"expectations": [{"field": "takeoff_speed", "rel_to": "flight_time"}]},
    {"expectations": [{"field": "takeoff_speed", "max": 1.0, "tolerance": 2}]},
    {"expectations": [{"field": "takeoff_speed", "run": "other", "max": 1.0}]},
])
def test_bad_scenarios_rejected(tmp_path, patch):
    d = {**SHORT, **patch}
    with pytest.raises(ScenarioError):
        harness.parse_scenario(d, tmp_path)
    out = tmp_path / "out"
    assert cli.main(["run", str(write(tmp_path / "s.json", d)), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_multi_run_expectation_must_name_run(tmp_path):
    d = {**SHORT, "runs": {"a": {}, "b": {}}}
    with pytest.raises(ScenarioError, match="must name a run"):
        harness.parse_scenario(d, tmp_path)


def test_model_path_relative_to_scenario(tmp_path):
    sc = harness.load_scenario(harness.bundled_scenarios()[0])
    assert sc.runs[0].model == harness.icub_sagittal().to_dict()
    (tmp_path / "m").mkdir()
    write(tmp_path / "m" / "robot.json", sc.runs[0].model)
    sc2 = harness.parse_scenario({**SHORT, "model": "m/robot.json"}, tmp_path)
    assert sc2.runs[0].model == sc.runs[0].model


def test_run_writes_artifacts_and_verdicts(tmp_path, capsys):
    path = write(tmp_path / "s.json", SHORT)
    out = tmp_path / "out"
    assert cli.main(["run", str(path), "--out", str(out)]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == ["PASS main: status = 'no_takeoff' == 'no_takeoff'"]
    s = json.loads((out / "summary.json").read_text())
    assert s["passed"] is True and s["status"] == "no_takeoff"
    assert (out / "log.csv").read_text().startswith("t,phase,")
    assert (out / "profile.csv").read_text().startswith("t,z_d,zdot_d,zddot_d\n")
    # a failing expectation gives exit 1
    d = {**SHORT, "expectations": [{"field": "status", "equals": "ok"}]}
    assert cli.main(["run", str(write(tmp_path / "f.json", d)), "--out", str(out)]) == 1
    assert capsys.readouterr().out.startswith("FAIL ")


def test_fault_exit_3(tmp_path):
    d = {**SHORT, "controller": {"mode": "velocity", "gains": {"K_com": 1e6}}, "sim": {"duration": 0.3}}
    lines = []
    code = harness.run_scenario(harness.parse_scenario(d, tmp_path), tmp_path / "out", dump_qp=True,
                                echo=lines.append)
    assert code == EXIT_FAULT
    assert any(line.startswith("FAULT main: controller_fault") for line in lines)
    s = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert s["status"] == "controller_fault" and s["fault"]
    assert (tmp_path / "out" / "failed_qp.txt").is_file()


def test_sweep_speed_column_and_row_order(tmp_path):
    grid = {"jump.height": [0.01, 0.02, 0.04]}
    out = harness.sweep(SHORT, grid, tmp_path, tmp_path / "sweep.csv")
    rows = read_csv(out)
    assert [float(r["jump.height"]) for r in rows] == [0.01, 0.02, 0.04]
    for r in rows:
        v = float(r["desired_takeoff_speed"])
        assert v == pytest.approx(math.sqrt(2 * 9.81 * float(r["jump.height"])), rel=1e-3)
        assert r["run"] == "main" and r["status"] == "no_takeoff"
    assert out.read_text() == harness.sweep(SHORT, grid, tmp_path, tmp_path / "again.csv").read_text()


def test_sweep_empty_grid_is_header_only(tmp_path):
    out = harness.sweep(SHORT, {}, tmp_path, tmp_path / "e.csv")
    assert out.read_text() == "run," + ",".join(SWEEP_FIELDS) + "\n"
    with pytest.raises(ScenarioError):
        harness.sweep(SHORT, {"jump.height": 0.04}, tmp_path, tmp_path / "x.csv")


def test_sweep_records_faults_per_row(tmp_path):
    d = {**SHORT, "sim": {"duration": 0.3}}
    grid = {"controller.gains.K_com": [1e6, 5.0]}
    rows = read_csv(harness.sweep(d, grid, tmp_path, tmp_path / "f.csv"))
    assert rows[0]["status"] == "controller_fault" and rows[0]["fault"]
    assert rows[1]["status"] == "ok" and rows[1]["fault"] == ""


@pytest.fixture(scope="module")
def momentum_gain_sweep(tmp_path_factory):
    base = harness.bundled_scenarios()[0].parent
    d = harness.load_json(base / "velocity_jump_4cm.json")
    d.pop("expectations")
    out = tmp_path_factory.mktemp("kh") / "kh.csv"
    rows = read_csv(harness.sweep(d, {"controller.gains.K_H": [0.0, 100.0]}, base, out))
    assert [r["status"] for r in rows] == ["ok", "ok"]
    return rows


def test_sweep_momentum_gain_reduces_takeoff_momentum(momentum_gain_sweep):
    zero, default = momentum_gain_sweep
    assert float(zero["takeoff_angular_momentum"]) > float(default["takeoff_angular_momentum"])


@pytest.mark.xfail(strict=True, reason="flight pitch on this model is set by the landing-pose joint motion; "
                                       "K_H = 0 pitches 0.375 deg against 0.402 deg at the default gain")
def test_sweep_momentum_gain_orders_pitch(momentum_gain_sweep):
    zero, default = momentum_gain_sweep
    assert float(zero["base_pitch_excursion_deg"]) >= float(default["base_pitch_excursion_deg"])


def test_threads_env(monkeypatch):
    monkeypatch.setenv("JUMP_THREADS", "3")
    assert harness.threads() == 3
    monkeypatch.delenv("JUMP_THREADS")
    assert harness.threads() >= 1
    for bad in ("0", "-2", "many"):
        monkeypatch.setenv("JUMP_THREADS", bad)
        with pytest.raises(ScenarioError):
            harness.threads()


def test_parallel_sweep_matches_serial(tmp_path, monkeypatch):
    grid = {"jump.height": [0.01, 0.03]}
    monkeypatch.setenv("JUMP_THREADS", "1")
    serial = harness.sweep(SHORT, grid, tmp_path, tmp_path / "s.csv").read_text()
    monkeypatch.setenv("JUMP_THREADS", "2")
    assert harness.sweep(SHORT, grid, tmp_path, tmp_path / "p.csv").read_text() == serial


def test_cli_sweep_and_bad_env(tmp_path, monkeypatch, capsys):
    path = write(tmp_path / "s.json", SHORT)
    grid = write(tmp_path / "g.json", {"jump.displacement": [0.1]})
    out = tmp_path / "sw.csv"
    assert cli.main(["sweep", str(path), "--grid", str(grid), "--out", str(out)]) == EXIT_OK
    assert len(read_csv(out)) == 1
    assert capsys.readouterr().out.strip() == str(out)
    monkeypatch.setenv("JUMP_THREADS", "0")
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert not (tmp_path / "o").exists()


def test_cli_dump_profile(tmp_path, capsys):
    assert cli.main(["dump-profile", "height=0.04", "displacement=0.11", "--dt", "0.01"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,z_d,zdot_d,zddot_d"
    last = [float(v) for v in lines[-1].split(",")]
    assert last[1] == pytest.approx(0.11, abs=1e-9) and last[2] == pytest.approx(math.sqrt(2 * 9.81 * 0.04))
    out = tmp_path / "p.csv"
    params = '{"height": 0.04, "displacement": 0.11, "curve": {"type": "hermite", "unit_displacement": 0.287}}'
    assert cli.main(["dump-profile", params, "--out", str(out)]) == EXIT_OK
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert float(rows[-1][0]) == pytest.approx(0.4326, abs=1e-3)
    scen = harness.bundled_scenarios()[0]
    assert cli.main(["dump-profile", str(scen), "--out", str(tmp_path / "q.csv")]) == EXIT_OK
    assert cli.main(["dump-profile", "height=-1", "displacement=0.1"]) == EXIT_CONFIG
    assert cli.main(["dump-profile", "height"]) == EXIT_CONFIG
    assert cli.main(["dump-profile", "height=0.04", "displacement=0.1", "--dt", "0"]) == EXIT_CONFIG
