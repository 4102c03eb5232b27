from __future__ import annotations

import json
import subprocess
import sys

import pytest

from cartankit.cli import main
from cartankit.project import FIXTURE_NAMES, canonicalize, fixture_path, load_project


def _checks(name: str) -> list[str]:
    return json.loads(fixture_path(name).read_text())["checks"]


MATRIX = [(name, check) for name in FIXTURE_NAMES for check in _checks(name)]


def run_cli(capsys, *argv: str, verbosity: str | None = None, monkeypatch=None) -> tuple[int, str, str]:
    if monkeypatch is not None and verbosity is not None:
        monkeypatch.setenv("CARTANKIT_VERBOSITY", verbosity)
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("name,check", MATRIX)
def test_fixture_exit_codes(capsys, monkeypatch, name, check):
    code, out, _ = run_cli(capsys, check, name, verbosity="0", monkeypatch=monkeypatch)
    expected = 1 if name.endswith("_broken") else 0
    assert code == expected
    assert out.startswith(f"{check} {name}: ")


def test_every_broken_fixture_fails_somewhere():
    for name in FIXTURE_NAMES:
        if name.endswith("_broken"):
            assert _checks(name)


def test_output_is_deterministic(capsys, monkeypatch):
    first = run_cli(capsys, "check-data", "example2", "--json", verbosity="2", monkeypatch=monkeypatch)
    second = run_cli(capsys, "check-data", "example2", "--json", verbosity="2", monkeypatch=monkeypatch)
    assert first == second
    payload = json.loads(first[1])
    assert payload["verdict"] == "SAT"


def test_canonical_round_trip(capsys):
    for name in FIXTURE_NAMES:
        raw = json.loads(fixture_path(name).read_text())
        once = canonicalize(raw)
        assert canonicalize(once) == once
        code, out, _ = run_cli(capsys, "canonical", name)
        assert code == 0
        assert json.loads(out) == once
        assert load_project(once).canonical() == once


def test_schema_error_reports_path(capsys, tmp_path):
    raw = json.loads(fixture_path("example2").read_text())
    raw["algebroid"]["rank"] = "two"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw))
    code, out, err = run_cli(capsys, "check-data", str(bad))
    assert code == 2
    assert out == ""
    assert err.strip() == "error: $.algebroid.rank: 'two' is not of type 'integer'"


def test_unparsable_expression_reports_path(capsys, tmp_path):
    raw = json.loads(fixture_path("example2").read_text())
    raw["algebroid"]["brackets"]["(1,1,2)"] = "1/(y"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw))
    code, _, err = run_cli(capsys, "check-data", str(bad))
    assert code == 2
    assert err.startswith("error: $.algebroid.brackets.(1,1,2): ")


def test_bad_options_exit_2(capsys):
    assert run_cli(capsys, "restrict", "example2", "--set", "X")[0] == 2
    assert run_cli(capsys, "tableau", "example2", "--bounds", "3")[0] == 2
    assert run_cli(capsys, "check-data", "no-such-fixture")[0] == 2


def test_fixtures_listing(capsys):
    code, out, _ = run_cli(capsys, "fixtures")
    assert code == 0
    assert out.split() == list(FIXTURE_NAMES)


# -- explain output ---------------------------------------------------------------


def test_explain_structure_equations(capsys, monkeypatch):
    code, out, _ = run_cli(capsys, "check-data", "example2", verbosity="1", monkeypatch=monkeypatch)
    assert code == 0
    assert "domega1 = (-1/y) omega1^omega2 + (1/y) omega1^omega4" in out
    assert "domega2 = (-1/y) omega2^omega4 + (1) pi[t]^omega1" in out


def test_explain_cohomology_table(capsys, monkeypatch):
    code, out, _ = run_cli(capsys, "tableau", "example2", verbosity="1", monkeypatch=monkeypatch)
    assert code == 0
    assert "[H^{l,m}]" in out
    assert "PASS-within-bounds (bounded check: 1 ≤ m ≤ 3, 0 ≤ l ≤ 3)" in out
    assert "delta o delta = 0: True" in out


def test_explain_unsat_row(capsys, monkeypatch):
    code, out, _ = run_cli(capsys, "check-data", "liegroup-sl2_broken", verbosity="1", monkeypatch=monkeypatch)
    assert code == 1
    assert out.startswith("check-data liegroup-sl2_broken: UNSAT")
    assert "inconsistent row: (1)*[C2 i=2 (j,k,l)=(1,2,3)] reduces to 0 = nonzero" in out


def test_verbosity_levels(capsys, monkeypatch):
    quiet = run_cli(capsys, "check-data", "example2", verbosity="0", monkeypatch=monkeypatch)[1]
    assert quiet.strip() == "check-data example2: SAT"
    loud = run_cli(capsys, "check-data", "example2", verbosity="2", monkeypatch=monkeypatch)[1]
    normal = run_cli(capsys, "check-data", "example2", verbosity="1", monkeypatch=monkeypatch)[1]
    assert len(loud) > len(normal) > len(quiet)


def test_restrict_with_set(capsys, monkeypatch):
    code, out, _ = run_cli(capsys, "restrict", "example2", "--set", "X=0", "--set", "Y=1", verbosity="1", monkeypatch=monkeypatch)
    assert code == 0
    assert "(y)*dx" in out


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "cartankit.cli", "check-data", "liegroup-sl2"],
        capture_output=True,
        text=True,
        env={"CARTANKIT_VERBOSITY": "0", "PATH": ""},
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == "check-data liegroup-sl2: SAT"
