import hashlib
import json
import subprocess
import sys

import pytest

from brwtrace.cli import main


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_simulate_writes_manifest_and_trace(tmp_path):
    assert main(["simulate", "--depth", "6", "--seed", "4", "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "simulate" and man["config"]["depth"] == 6
    for name, digest in man["artifacts"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
    assert (tmp_path / "trace.csv").read_text().startswith("x,y,N\n")


def test_depth_zero_trace(tmp_path):
    assert main(["simulate", "--depth", "0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "trace.csv").read_text() == "x,y,N\ne,,0\n"


@pytest.mark.parametrize("cmd", [
    ["simulate", "--depth", "8"],
    ["recurrence", "--depth", "20", "--replicas", "10"],
    ["spectral", "--group", "free:2", "--radius", "5"],
    ["mtp-test", "--samples", "200"],
    ["growth", "--depth", "12"],
])
def test_byte_identical_reruns(cmd, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(cmd + ["--seed", "9", "--out", str(a)]) == 0
    assert main(cmd + ["--seed", "9", "--out", str(b)]) == 0
    assert _files(a) == _files(b)


def test_threads_do_not_change_output(tmp_path):
    cmd = ["recurrence", "--depth", "20", "--replicas", "12", "--seed", "2"]
    assert main(cmd + ["--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(cmd + ["--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    a.pop("manifest.json"), b.pop("manifest.json")
    assert a == b


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ndepth = 3\nseed=5\n")
    assert main(["simulate", "--config", str(cfg), "--seed", "6", "--out", str(tmp_path / "o")]) == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["config"]["depth"] == 3 and man["config"]["seed"] == 6


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("deepth=3\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "deepth" in capsys.readouterr().err


def test_env_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("BRWTRACE_OUT", str(tmp_path / "env"))
    assert main(["simulate", "--depth", "2"]) == 0
    assert (tmp_path / "env" / "trace.csv").exists()


@pytest.mark.parametrize("argv", [
    ["simulate", "--group", "free:0"],
    ["simulate", "--group", "Free:2"],
    ["simulate", "--p", "1:0.5,2:0.6"],
    ["simulate", "--depth", "-1"],
    ["recurrence", "--threads", "0"],
    ["cutpoints", "--depth", "3", "--windows", "50"],
    ["simulate", "--bogus", "1"],
])
def test_validation_exit_code(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == 2


def test_resource_exit_code(tmp_path, capsys):
    code = main(["simulate", "--p", "2:1", "--depth", "30", "--budget", "1000", "--out", str(tmp_path)])
    assert code == 3
    assert "resource" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "brwtrace.cli", "spectral", "--group",
                           "zprod:2,2,2,2", "--radius", "10", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "spectral" in json.loads((tmp_path / "manifest.json").read_text())["command"]
