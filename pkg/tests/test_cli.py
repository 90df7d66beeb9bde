import csv
import subprocess
import sys

import numpy as np
import pytest

from extremesim.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_DATA, EXIT_OK, build_config, main
from extremesim.errors import ConfigError
from extremesim.evaluation import TRACE_HEADER


def _toy_files(tmp_path):
    train = tmp_path / "train.txt"
    train.write_text("1 1 1\n2 2 1\n3 1 1\n3 4 1\n4 3 1\n")
    test = tmp_path / "test.txt"
    test.write_text("1 2 1\n4 4 1\n")
    cfg = tmp_path / "toy.cfg"
    cfg.write_text(
        "# small toy\n"
        f"dataset.train = {train}\n"
        f"dataset.test = {test}\n"
        "model.hidden = 3\n"
        "model.k = 2\n"
        "omega_log2 = -1\n"
        "lambda_log2 = -3\n"
        "method = GD\n"
        "max_passes = 10\n"
        f"trace.path = {tmp_path / 'trace.csv'}\n"
    )
    return cfg


def _trace(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == TRACE_HEADER
    return rows[1:]


def test_defaults_and_preset():
    cfg = build_config()
    assert cfg["model.k"] == 128 and cfg["model.hidden"] == (256, 256)
    assert cfg["loss"] == "logistic" and cfg["cg.xi"] == 0.1 and cfg["cg.max_iters"] == 30
    assert cfg["ls.eta"] == 1e-4 and cfg["sg.rho"] == 0.01 and cfg["sg.alpha"] == 0.1
    cfg = build_config(overrides=["preset=ml1m"])
    assert (cfg["omega_log2"], cfg["lambda_log2"]) == (-4.0, 2.0)
    cfg = build_config(overrides=["preset=ml1m", "omega_log2=-6"])
    assert cfg["omega_log2"] == -6.0


def test_unknown_and_bad_keys():
    with pytest.raises(ConfigError):
        build_config(overrides=["model.kk=3"])
    with pytest.raises(ConfigError):
        build_config(overrides=["model.k=three"])
    with pytest.raises(ConfigError):
        build_config(overrides=["method=Adam"])


def test_train_gd_toy_nonincreasing(tmp_path, capsys):
    cfg = _toy_files(tmp_path)
    assert main(["train", "-c", str(cfg)]) == EXIT_OK
    rows = _trace(tmp_path / "trace.csv")
    assert len(rows) == 10
    objs = [float(r[3]) for r in rows]
    assert all(b <= a for a, b in zip(objs, objs[1:]))
    assert all(r[8] != "" for r in rows)
    assert "GD iter 10" in capsys.readouterr().out


def test_identical_runs_identical_traces(tmp_path):
    cfg = _toy_files(tmp_path)
    for name in ("a.csv", "b.csv"):
        assert main(["train", "-q", "-c", str(cfg), "--set", "method=Newton", "--set", f"trace.path={tmp_path / name}"]) == 0
    a, b = _trace(tmp_path / "a.csv"), _trace(tmp_path / "b.csv")
    # everything but the wall-clock column is bit-identical
    strip = lambda rows: [r[:2] + r[3:] for r in rows]  # noqa: E731
    assert strip(a) == strip(b)


def test_train_sg_and_checkpoint_eval(tmp_path, capsys):
    cfg = _toy_files(tmp_path)
    ck = tmp_path / "ck.npz"
    assert main(["train", "-q", "-c", str(cfg), "--set", "method=SOGram-diag", "--set", "max_passes=2",
                 "--set", "sg.rho=0.5", "--set", f"checkpoint.path={ck}"]) == 0
    assert len(_trace(tmp_path / "trace.csv")) == 2
    capsys.readouterr()
    assert main(["eval", "-c", str(cfg), "--set", f"checkpoint.path={ck}"]) == 0
    out = capsys.readouterr().out
    assert "objective" in out and "map_at_5" in out


def test_missing_dataset_is_config_error(tmp_path):
    assert main(["train", "--set", "max_passes=1"]) == EXIT_CONFIG
    assert main(["train", "--set", f"dataset.train={tmp_path / 'nope.txt'}"]) == EXIT_CONFIG


def test_malformed_dataset_is_data_error(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 1 1\n1 1\n")
    assert main(["train", "--set", f"dataset.train={bad}"]) == EXIT_DATA


def test_gradcheck_pass_and_negative_control(capsys):
    assert main(["gradcheck"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("gradient/left", "gradient/right", "gradient/joint", "duality/left", "duality/right", "duality/joint"):
        assert name in out
    assert main(["gradcheck", "--corrupt-gradient", "1e-3"]) == EXIT_CHECK


def test_oracle_compare(capsys):
    assert main(["oracle-compare", "--set", "check.instances=4"]) == EXIT_OK
    assert main(["oracle-compare", "--set", "omega_log2=-inf"]) == EXIT_OK
    assert main(["oracle-compare", "--set", "check.m=200", "--set", "check.n=100"]) == EXIT_CONFIG


def test_make_synthetic(tmp_path):
    out = tmp_path / "syn"
    assert main(["make-synthetic", "--out", str(out), "--m", "30", "--n", "20", "--nnz", "100", "--seed", "2"]) == 0
    assert (out / "train.txt").exists() and (out / "test.txt").exists()


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "extremesim.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "oracle-compare" in res.stdout
