from __future__ import annotations

import os
import shutil
import subprocess
import sys

import pytest

from conftest import DATA, fixture_text, with_second_finger
from ctrlnet.cli import main


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    """A scratch copy of the fixture files, so outputs land in tmp."""
    monkeypatch.delenv("CTRLNET_CONFIG", raising=False)
    for f in DATA.iterdir():
        shutil.copy(f, tmp_path / f.name)
    return tmp_path


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# check


def test_check_fixture_is_silent(capsys, workdir):
    assert _run(capsys, "check", workdir / "fixture.ctrl") == (0, "", "")


def test_check_reports_exclusivity_violation(capsys, workdir):
    (workdir / "bad.ctrl").write_text(with_second_finger(fixture_text()))
    code, out, err = _run(capsys, "check", workdir / "bad.ctrl")
    assert code == 1 and out == ""
    (line,) = err.splitlines()
    assert line.startswith("error ") and "joint-conflict" in line
    assert line.count("bad.ctrl:") == 3  # the diagnostic location plus both interface spans


def test_check_unknown_joint_after_urdf_change(capsys, workdir):
    urdf = (workdir / "fixture.urdf").read_text().replace('<joint name="wr"', '<joint name="wrist_r"')
    (workdir / "renamed.urdf").write_text(urdf)
    (workdir / "m.ctrl").write_text(fixture_text().replace('"fixture.urdf"', '"renamed.urdf"'))
    code, _, err = _run(capsys, "check", workdir / "m.ctrl")
    assert code == 1
    assert "unknown-joint" in err and "'wr'" in err


def test_missing_file_is_usage_error(capsys, workdir):
    code, _, err = _run(capsys, "check", workdir / "nope.ctrl")
    assert code == 2 and "nope.ctrl" in err


def test_bad_arguments_are_usage_errors(capsys):
    assert _run(capsys, "frobnicate")[0] == 2
    assert _run(capsys)[0] == 2


# compile


def test_compile_writes_both_artifacts(capsys, workdir):
    out = workdir / "out"
    assert _run(capsys, "compile", workdir / "fixture.ctrl", "--out-dir", out)[0] == 0
    assert sorted(p.name for p in out.iterdir()) == ["network.dot", "network.json"]


def test_compile_selected_artifact_and_determinism(capsys, workdir):
    a, b = workdir / "a", workdir / "b"
    for d in (a, b):
        assert _run(capsys, "compile", workdir / "fixture.ctrl", "--json", "--out-dir", d)[0] == 0
    assert [p.name for p in a.iterdir()] == ["network.json"]
    assert (a / "network.json").read_bytes() == (b / "network.json").read_bytes()


def test_compile_failure_writes_nothing(capsys, workdir):
    (workdir / "bad.ctrl").write_text(with_second_finger(fixture_text()))
    out = workdir / "out"
    assert _run(capsys, "compile", workdir / "bad.ctrl", "--out-dir", out)[0] == 1
    assert not out.exists()


# simulate


def test_simulate_trace_has_header_plus_ticks(capsys, workdir):
    trace = workdir / "t.csv"
    code, out, err = _run(capsys, "simulate", workdir / "fixture.ctrl", workdir / "fixture.scenario.yaml", "--trace", trace)
    assert code == 0, err
    assert len(trace.read_text().splitlines()) == 1001
    assert "l2.other_arm: final position error" in out


def test_simulate_duration_override(capsys, workdir):
    trace = workdir / "t.csv"
    args = ("simulate", workdir / "fixture.ctrl", workdir / "fixture.scenario.yaml", "--trace", trace)
    assert _run(capsys, *args, "--duration", "0.5")[0] == 0
    assert len(trace.read_text().splitlines()) == 51


def test_simulate_unbound_set_point(capsys, workdir):
    code, _, err = _run(capsys, "simulate", workdir / "fixture.ctrl", workdir / "fixture_no_finger.scenario.yaml")
    assert code == 1 and "l2.finger" in err


def test_simulate_rejects_bad_dt(capsys, workdir):
    code, _, _ = _run(capsys, "simulate", workdir / "fixture.ctrl", workdir / "fixture.scenario.yaml", "--dt", "0")
    assert code == 2


def test_simulate_runtime_failure(capsys, workdir):
    code, _, err = _run(capsys, "simulate", workdir / "arm_broken.ctrl", workdir / "arm_back.scenario.yaml")
    assert code == 3 and "runtime failure" in err


# sequence


def test_sequence_prints_events(capsys, workdir):
    code, out, _ = _run(capsys, "sequence", workdir / "two_stage.seq")
    assert code == 0
    assert out.splitlines() == [
        "0 out started",
        "50 out terminated_by_predicate",
        "50 back started",
        "316 back terminated_by_predicate",
    ]


def test_sequence_writes_event_file(capsys, workdir):
    events = workdir / "ev.txt"
    code, out, _ = _run(capsys, "sequence", workdir / "two_stage.seq", "--events", events, "--trace", workdir / "s.csv")
    assert code == 0 and out == ""
    assert len(events.read_text().splitlines()) == 4


def test_sequence_abort_exit_code(capsys, workdir):
    code, out, err = _run(capsys, "sequence", workdir / "aborting.seq")
    assert code == 3
    assert out.splitlines()[-1] == "20 broken failed"


def test_empty_sequence(capsys, workdir):
    code, _, err = _run(capsys, "sequence", workdir / "empty.seq")
    assert code == 1 and "empty-sequence" in err


def test_module_entry_point(workdir):
    env = dict(os.environ)
    env.pop("CTRLNET_CONFIG", None)
    proc = subprocess.run(
        [sys.executable, "-m", "ctrlnet", "check", str(workdir / "fixture.ctrl")],
        capture_output=True,
        text=True,
        env=env,
    )
    assert (proc.returncode, proc.stdout, proc.stderr) == (0, "", "")
