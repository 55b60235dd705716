import json
import subprocess
import sys
from pathlib import Path

import pytest

from kflow.cli import EXIT_ATTACK, EXIT_SECURE, EXIT_USAGE, main

ROOT = Path(__file__).resolve().parent.parent
GOLDEN = ROOT / "tests" / "golden"


def run_json(capsys, *argv):
    code = main(["analyze", *argv, "--jobs", "1", "--json", "-"])
    data = json.loads(capsys.readouterr().out)
    data.pop("ms")
    return code, data


@pytest.mark.parametrize(
    "golden, argv, expected",
    [
        ("ns_w2", ["--protocol", "ns", "--sessions", "2"], EXIT_ATTACK),
        ("nsl_w2", ["--protocol", "nsl", "--sessions", "2"], EXIT_SECURE),
        ("otway_rees_w1", ["--protocol", "otway_rees", "--sessions", "1"], EXIT_ATTACK),
    ],
)
def test_golden_reports(capsys, golden, argv, expected):
    code, data = run_json(capsys, *argv)
    assert code == expected
    assert data == json.loads((GOLDEN / f"{golden}.json").read_text())


def test_attack_writes_dot(tmp_path, capsys):
    dot = tmp_path / "attack.dot"
    assert main(["analyze", "--protocol", "ns", "--sessions", "2", "--jobs", "1", "--dot", str(dot)]) == EXIT_ATTACK
    text = dot.read_text()
    assert text.startswith('digraph "ns" {')
    assert '"enc{key=O, plain={A, nonce{seed=eps#2, id=A}}}"' in text
    assert "[label=\"decryptor\"]" in text
    out = capsys.readouterr().out
    assert "ns: Attack" in out


def test_kf_file_protocol(capsys):
    code = main(["analyze", "--protocol", str(ROOT / "specs" / "nsl.kf"), "--jobs", "1"])
    assert code == EXIT_SECURE
    assert "Secure(1)" in capsys.readouterr().out


def test_parse_check():
    assert main(["parse", str(ROOT / "specs" / "ns.kf"), "--check"]) == EXIT_SECURE


def test_parse_prints_canonical_form(capsys):
    assert main(["parse", str(ROOT / "specs" / "cpuf_renewal.kf")]) == EXIT_SECURE
    assert capsys.readouterr().out == (ROOT / "specs" / "cpuf_renewal.kf").read_text()


def test_parse_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.kf"
    bad.write_text("protocol x { roles I; rule r: premises {} conclude Q; theorem t: exists . ; }")
    assert main(["parse", str(bad)]) == EXIT_USAGE
    assert "UnboundVariable" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["analyze"],
        ["analyze", "--protocol", "nope"],
        ["analyze", "--protocol", "ns", "--sessions", "0"],
        ["analyze", "--protocol", "missing.kf"],
        ["parse", "missing.kf"],
        ["frobnicate"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE


def test_universe_cap_is_reported(capsys):
    assert main(["analyze", "--protocol", "otway_rees", "--max-universe", "20", "--jobs", "1"]) == EXIT_USAGE
    assert "universe exceeded" in capsys.readouterr().err


def test_list_and_dump(capsys):
    assert main(["list"]) == EXIT_SECURE
    assert "otway_rees" in capsys.readouterr().out
    assert main(["dump-universe", "--protocol", "cpuf_renewal", "--honest", "1"]) == EXIT_SECURE
    out = capsys.readouterr().out
    assert "# binding Alice:" in out and "hash{pre#1}" in out


def test_seed_variable_is_ignored(capsys, monkeypatch):
    monkeypatch.setenv("KFLOW_SEED", "123")
    _, a = run_json(capsys, "--protocol", "ns", "--sessions", "2")
    monkeypatch.setenv("KFLOW_SEED", "456")
    _, b = run_json(capsys, "--protocol", "ns", "--sessions", "2")
    assert a == b


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "kflow", "analyze", "--protocol", "ns", "--jobs", "1"], capture_output=True, text=True)
    assert r.returncode == EXIT_SECURE
    assert "Secure(1)" in r.stdout
