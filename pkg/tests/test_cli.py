import json

import pytest

from twoweight.cli import SCHEMA_VERSION, main


def _run(tmp_path, *argv, name="out.json"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, json.loads(out.read_text())


def test_exponents_lebesgue(tmp_path):
    code, doc = _run(tmp_path, "exponents", "--measure", "lebesgue", "--n", "1", "--level", "8")
    assert code == 0 and doc["status"] == "PASS"
    assert doc["schema_version"] == SCHEMA_VERSION
    rep = doc["report"]
    assert rep["doubling"]["exponent"] == pytest.approx(1.0, abs=1e-6)
    assert rep["reverse"]["exponent"] == pytest.approx(1.0, abs=1e-6)


def test_sharpness_line(tmp_path):
    code, doc = _run(tmp_path, "sharpness", "--scenario", "line", "--levels", "6", "--level", "8")
    assert code == 0
    assert doc["report"]["a2"] ** 0.5 == pytest.approx(1.0, rel=0.1)


def test_deterministic(tmp_path):
    argv = ["poly", "--measure", "lebesgue", "--level", "8", "--finest", "3", "--seed", "4"]
    _, a = _run(tmp_path, *argv, name="a.json")
    _, b = _run(tmp_path, *argv, name="b.json")
    assert (tmp_path / "a.json").read_text() == (tmp_path / "b.json").read_text()
    assert a["config"]["seed"] == 4


def test_threads_do_not_change_output(tmp_path):
    argv = ["a2", "--measure", "lebesgue", "--level", "8", "--finest", "4"]
    _run(tmp_path, *argv, "--threads", "1", name="a.json")
    _run(tmp_path, *argv, "--threads", "4", name="b.json")
    a = json.loads((tmp_path / "a.json").read_text())["report"]
    b = json.loads((tmp_path / "b.json").read_text())["report"]
    assert a == b


@pytest.mark.parametrize("argv", [
    ["pairing", "--measure", "lebesgue", "--level", "8", "--theta", "1"],
    ["maximal", "--measure", "cantor-product", "--level", "10", "--levels", "6"],
    ["hdyadic", "--depth", "6"],
    ["testing", "--measure", "lebesgue", "--level", "6", "--finest", "3"],
    ["verify-all", "--only", "5"],
])
def test_subcommands_pass(tmp_path, argv):
    code, doc = _run(tmp_path, *argv)
    assert code == 0, doc["failed"]
    assert doc["command"] == argv[0]


def test_bellman_writes_pair_and_hdyadic_reads_it(tmp_path):
    code, doc = _run(tmp_path, "bellman", "--size", "64", "--max-sweeps", "60", "--gamma", "2", name="b.json")
    assert (tmp_path / "b.pair.json").exists()
    assert "certificate" in doc["report"]
    code, doc = _run(tmp_path, "hdyadic", "--pair-file", str(tmp_path / "b.pair.json"), name="h.json")
    assert code == 0


def test_failed_check_exits_nonzero(tmp_path):
    code, doc = _run(tmp_path, "bellman", "--size", "32", "--max-sweeps", "2", "--gamma", "50", "--depth", "4")
    assert code == 1
    assert doc["status"] == "FAIL" and doc["failed"]


def test_measure_error_exit(tmp_path, capsys):
    assert main(["exponents", "--measure", "nonsense", "--out", str(tmp_path / "x.json")]) == 2


def test_bad_flag_exits_with_usage():
    with pytest.raises(SystemExit) as exc:
        main(["a2", "--no-such-flag"])
    assert exc.value.code == 2


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("TWOWEIGHT_OUT", str(tmp_path))
    assert main(["hdyadic", "--depth", "4"]) == 0
    assert json.loads((tmp_path / "hdyadic.json").read_text())["report"]["checks"]["pairing_identity"]
