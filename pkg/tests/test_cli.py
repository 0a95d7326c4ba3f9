import json
import os

import numpy as np
import pytest

from yamabe_blowup import cli
from yamabe_blowup.config import ExperimentConfig, apply_pairs, dump_pairs, load_config, read_pairs, thread_cap
from yamabe_blowup.errors import DomainError, NumericError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_config_dump_round_trips(tmp_path):
    cfg = apply_pairs(ExperimentConfig(), {"dim": "6", "tmax": "50", "radii": "0.1,0.2", "tol.residual": "1e-7"})
    path = tmp_path / "cfg.txt"
    path.write_text(dump_pairs(cfg))
    assert load_config(str(path)) == cfg


def test_config_file_comments_and_unknown_keys(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("# comment\ndim = 7   # trailing\n\nh=2.5\n")
    assert read_pairs(str(path)) == {"dim": "7", "h": "2.5"}
    with pytest.raises(DomainError, match="unknown configuration key"):
        apply_pairs(ExperimentConfig(), {"dimension": "5"})
    with pytest.raises(DomainError):
        apply_pairs(ExperimentConfig(), {"dim": "five"})


def test_exponent_violations_are_named():
    bad = apply_pairs(ExperimentConfig(), {"a": "0.1"}).violations()
    assert bad and all(isinstance(b, str) for b in bad)
    assert "dim must be at least 5" in ExperimentConfig(dim=4).violations()


def test_help_and_unknown_subcommand(capsys):
    assert run(capsys, "--help")[0] == 0
    code, _, err = run(capsys, "frobnicate")
    assert code == 64 and "usage" in err.lower()
    assert run(capsys)[0] == 64


def test_domain_errors_exit_2(capsys):
    code, _, err = run(capsys, "constants", "--dim", "4")
    assert code == 2 and "dim" in err
    assert run(capsys, "approx-error", "--model", "sphere", "--quick")[0] == 2
    assert run(capsys, "odes", "--set", "nonsense")[0] == 2


def test_numeric_failure_exit_3(capsys, monkeypatch):
    def boom(cfg):
        raise NumericError("did not converge", iterations=7)

    monkeypatch.setitem(cli.HANDLERS, "constants", boom)
    code, _, err = run(capsys, "constants")
    assert code == 3 and "iterations" in err


def test_constants_report_is_deterministic(capsys, tmp_path):
    target = tmp_path / "c.json"
    code, out, _ = run(capsys, "constants", "--dim", "5", "--json", str(target))
    assert code == 0
    rep = json.loads(out)
    assert rep["command"] == "constants" and rep["pass"] is True
    assert rep["data"]["c1"]["value"] == pytest.approx(738.81523166739624, rel=1e-10)
    first = target.read_bytes()
    run(capsys, "constants", "--dim", "5", "--json", str(target))
    assert target.read_bytes() == first
    assert [p.name for p in tmp_path.iterdir()] == ["c.json"]  # no temp files left behind


def test_flags_beat_set_beat_file(capsys, tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("dim = 7\nh = 3\n")
    code, out, _ = run(capsys, "constants", "--config", str(path), "--set", "dim=6", "--dump-config")
    assert code == 0 and "dim = 6" in out and "h = 3.0" in out
    _, out, _ = run(capsys, "constants", "--config", str(path), "--set", "dim=6", "--dim", "5", "--dump-config")
    assert "dim = 5" in out


def test_subcommand_defaults(capsys):
    _, out, _ = run(capsys, "simulate", "--dump-config")
    assert "t0 = 6.0" in out and "tmax = 1000.0" in out


def test_odes_csv_output(capsys, tmp_path):
    out_csv = tmp_path / "odes.csv"
    code, out, _ = run(capsys, "odes", "--quick", "--out", str(out_csv))
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "t,mu,lambda," + ",".join(f"xi_{i}" for i in range(1, 6))
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert np.all(np.diff(rows[:, 0]) > 0) and np.all(rows[:, 1] > 0)
    assert json.loads(out)["pass"] is True


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "x.txt"
    cli.atomic_write(str(p), "one")
    cli.atomic_write(str(p), "two")
    assert p.read_text() == "two"
    cli.atomic_write(str(tmp_path / "new" / "x.txt"), "z")  # parent folders are created
    assert (tmp_path / "new" / "x.txt").read_text() == "z"
    (tmp_path / "blocker").write_text("")
    with pytest.raises(OSError):
        cli.atomic_write(str(tmp_path / "blocker" / "x.txt"), "z")


@pytest.mark.parametrize("value,ok", [("", True), ("3", True), ("0", False), ("many", False)])
def test_thread_cap(monkeypatch, value, ok):
    monkeypatch.setenv("YBL_THREADS", value)
    if ok:
        assert thread_cap() >= 1
    else:
        with pytest.raises(DomainError):
            thread_cap()


def test_all_rejects_bad_thread_count(capsys, monkeypatch):
    monkeypatch.setenv("YBL_THREADS", "0")
    assert run(capsys, "all", "--quick")[0] == 2
