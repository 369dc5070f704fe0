from __future__ import annotations

import json
import subprocess
import sys

import pytest

from hrsg_ftc import __version__
from hrsg_ftc.cli import main, set_dotted, sweep_points
from hrsg_ftc.errors import ConfigError
from hrsg_ftc.harness import standard_scenario_dict


@pytest.fixture
def scenario(tmp_path):
    def make(**changes):
        d = standard_scenario_dict()
        d["duration"] = 20.0
        d.update(changes)
        p = tmp_path / "scenario.json"
        p.write_text(json.dumps(d))
        return p
    return make


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_unknown_flag_exits_one(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "standard", "--bogus"])
    assert info.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_verify_gains_standard(capsys):
    assert main(["verify-gains", "standard"]) == 0
    out = capsys.readouterr().out
    assert "gains_pass = True" in out and "uub_radius = " in out


def test_bad_dt_is_config_error(scenario, capsys):
    assert main(["run", str(scenario(dt=0.0))]) == 1
    assert "dt must be positive" in capsys.readouterr().err


def test_missing_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.json")]) == 1


def test_run_writes_outputs(scenario, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(scenario()), "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"trace.csv", "metrics.txt", "certificate.txt"}
    header = (out / "trace.csv").read_text().splitlines()[0]
    assert header == "t,x1,x2,xhat1,xhat2,phi_true,phi_hat,u_cmd,u_eff,s,V,loss,wnorm"


def test_run_both_subdirs(scenario, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(scenario()), "--controller", "both", "--out", str(out)]) == 0
    for name in ("smc", "pid"):
        assert (out / name / "trace.csv").is_file()


def test_output_dir_env(scenario, tmp_path, monkeypatch):
    monkeypatch.setenv("FTC_OUTPUT_DIR", str(tmp_path / "env_out"))
    assert main(["run", str(scenario())]) == 0
    assert (tmp_path / "env_out" / "trace.csv").is_file()


def test_replay(scenario, tmp_path, capsys):
    log = tmp_path / "log.csv"
    log.write_text("t_s,u_cmd,u_actual\n0,0.5,0.5\n10,0.7,0.4\n15,0.0,0.15\n20,0.7,0.4\n")
    out = tmp_path / "out"
    assert main(["replay", "--log", str(log), "--scenario", str(scenario()),
                 "--out", str(out)]) == 0
    assert "overdelivery" in capsys.readouterr().out
    assert (out / "trace.csv").is_file()


def test_sweep_three_points(scenario, tmp_path):
    spec = {"scenario": str(scenario()), "grid": {"observer.lambda1": [2.0, 3.0, 4.0]}}
    sp = tmp_path / "sweep.json"
    sp.write_text(json.dumps(spec))
    out = tmp_path / "sweep"
    assert main(["sweep", str(sp), "--out", str(out), "--workers", "1"]) == 0
    dirs = sorted(p for p in out.iterdir() if p.is_dir())
    assert len(dirs) == 3
    for i, d in enumerate(dirs):
        assert {"trace.csv", "metrics.txt", "certificate.txt"} <= {p.name for p in d.iterdir()}
        assert json.loads((d / "point.json").read_text()) == {"observer.lambda1": 2.0 + i}


def test_sweep_parallel(scenario, tmp_path):
    spec = {"scenario": json.loads(scenario(duration=5.0).read_text()),
            "grid": {"smc.k": [0.5, 1.0]}}
    sp = tmp_path / "sweep.json"
    sp.write_text(json.dumps(spec))
    assert main(["sweep", str(sp), "--out", str(tmp_path / "s"), "--workers", "2"]) == 0
    assert len(list((tmp_path / "s").glob("point_*/trace.csv"))) == 2


def test_sweep_helpers():
    assert sweep_points({"grid": {"a": [1, 2], "b.c": [3]}}) == [{"a": 1, "b.c": 3},
                                                                  {"a": 2, "b.c": 3}]
    d = {"b": {"c": 0}}
    set_dotted(d, "b.c", 5)
    assert d == {"b": {"c": 5}}
    with pytest.raises(ConfigError):
        sweep_points({"grid": {}})
    with pytest.raises(ConfigError):
        set_dotted({"b": 1}, "b.c", 2)


def test_numeric_abort_exits_two(tmp_path, capsys):
    d = standard_scenario_dict()
    d["duration"] = 100.0
    d["disturbances"]["d2"] = 1e4
    d["pinn"]["window"] = 2000
    p = tmp_path / "blow.json"
    p.write_text(json.dumps(d))
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "numeric abort" in capsys.readouterr().err


def test_entry_point_module():
    res = subprocess.run([sys.executable, "-m", "hrsg_ftc", "--version"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and __version__ in res.stdout
