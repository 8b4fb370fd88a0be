import csv
import io

import pytest

from dirac_hardy.cli import (EXIT_FAIL, EXIT_OK, EXIT_USAGE, UsageError, fmt, main, parse_config,
                             read_config_file, run)


def _rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def _comments(text):
    return [line for line in text.splitlines() if line.startswith("#")]


def test_parse_example():
    cfg = parse_config(["spectrum", "--nu", "0.5", "--k", "-1", "--n-states", "3"])
    assert cfg.command == "spectrum"
    assert cfg.params["nu"] == 0.5 and cfg.params["k"] == -1 and cfg.params["n-states"] == 3


@pytest.mark.parametrize("argv", [
    ["spectrum", "--nu", "1.2", "--k", "-1"],
    ["spectrum", "--nu", "0.5"],
    ["spectrum", "--nu", "0.5", "--k", "0"],
    ["spectrum", "--nu", "0.5", "--k", "-1", "--kmax", "2"],
    ["hardy-sharpness", "--a", "1.0"],
    ["bs-scan", "--nu", "0.5", "--a-lo", "0.9", "--a-hi", "0.8"],
    ["rigidity-check", "--nu", "0.5", "--sign", "2"],
    ["hardy-verify", "--trials", "x"],
])
def test_usage_errors(argv):
    with pytest.raises(UsageError):
        parse_config(argv)
    assert main(argv) == EXIT_USAGE


def test_argparse_errors_exit_2():
    assert main(["no-such-command"]) == EXIT_USAGE
    assert main(["spectrum", "--bogus", "1"]) == EXIT_USAGE


def test_config_file_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# defaults\nnu = 0.3\nn_states = 2\n[spectrum]\nk = -1  # ground channel\n"
                    "[bs-scan]\npoints = 7\n", encoding="utf-8")
    cfg = parse_config(["spectrum", "--config", str(path), "--nu", "0.5"])
    assert cfg.params["nu"] == 0.5 and cfg.sources["nu"] == "flag"
    assert cfg.params["n-states"] == 2 and cfg.sources["n-states"] == "file"
    assert cfg.params["k"] == -1
    assert cfg.params["potential"] == "coulomb" and cfg.sources["potential"] == "default"


def test_config_unknown_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("nu = 0.5\nk = -1\ncolour = red\n", encoding="utf-8")
    with pytest.raises(UsageError, match="colour"):
        parse_config(["spectrum", "--config", str(path)])
    assert main(["spectrum", "--config", str(path)]) == EXIT_USAGE


def test_config_missing_file(tmp_path):
    with pytest.raises(UsageError):
        read_config_file(str(tmp_path / "absent.cfg"))


def test_fmt():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "pass" and fmt(False) == "fail"
    assert fmt(3) == "3"
    assert fmt("x") == "x"


def test_spectrum_example():
    status, text = run(parse_config(["spectrum", "--nu", "0.5", "--k", "-1", "--n-states", "1"]))
    assert status == EXIT_OK
    rows = _rows(text)
    assert len(rows) == 1
    assert abs(float(rows[0]["a"]) - 0.86602540378) <= 1e-6
    assert "# config: nu = 0.5" in _comments(text)
    assert "\r" not in text


def test_hardy_sharpness_example():
    status, text = run(parse_config(["hardy-sharpness", "--a", "0.8"]))
    assert status == EXIT_OK
    assert abs(float(_rows(text)[0]["ratio"]) - 0.36) <= 1e-5


def test_hardy_sharpness_zero():
    status, text = run(parse_config(["hardy-sharpness", "--a", "0"]))
    assert status == EXIT_OK and len(_rows(text)) == 5


def test_rigidity_exit_codes():
    assert run(parse_config(["rigidity-check", "--nu", "0.6", "--w", "zero"]))[0] == EXIT_OK
    assert run(parse_config(["rigidity-check", "--nu", "0.6", "--w", "violating"]))[0] == EXIT_FAIL
    assert run(parse_config(["rigidity-check", "--nu", "0.5", "--w", "screened"]))[0] == EXIT_FAIL


def test_fundsol_fail_on_tight_tolerance():
    assert run(parse_config(["fundsol-check", "--points", "5", "--tol", "1e-14"]))[0] == EXIT_FAIL
    assert run(parse_config(["fundsol-check", "--points", "5"]))[0] == EXIT_OK


def test_bs_scan_empty():
    status, text = run(parse_config(["bs-scan", "--nu", "0.5", "--points", "0"]))
    assert status == EXIT_OK and _rows(text) == []


def test_out_file(tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert main(["hardy-verify", "--trials", "3", "--out", str(out)]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert len(_rows(out.read_text(encoding="utf-8"))) == 3


def test_bad_thread_env(monkeypatch):
    monkeypatch.setenv("DIRAC_HARDY_THREADS", "-2")
    assert main(["hardy-sharpness"]) == EXIT_USAGE


def test_repeatable():
    argv = ["hardy-verify", "--trials", "4", "--seed", "9"]
    assert run(parse_config(argv))[1] == run(parse_config(argv))[1]
