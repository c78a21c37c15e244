import os

import pytest

from main import main

CONFIG = """
[experiment]
seed = 1
forgotten = 0
output_dir = unused

[dataset]
class_count = 3
per_class = 20
dim = 4
separation = 6.0

[model]
hidden_dim = 0
feature_dim = 4

[training]
epochs = 10
eta = 0.1
batch_size = 16

[method.bias_shift]
beta = auto

[method.shallow_fine_tune]
epochs = 1

[sweep]
beta_start = -2
beta_stop = 2
beta_steps = 5
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "cli.ini"
    path.write_text(CONFIG, encoding="utf-8")
    return str(path)


@pytest.fixture
def finished_run(config_path, tmp_path):
    out = str(tmp_path / "out")
    assert main(["run", config_path, "--output-dir", out]) == 0
    return out


def test_run_writes_reports(capsys, finished_run):
    assert os.path.isfile(os.path.join(finished_run, "report.csv"))
    printed = capsys.readouterr().out
    assert "SUMMARY" in printed
    assert "BiasShift" in printed


def test_audit_command(finished_run, capsys):
    checkpoint = os.path.join(finished_run, "checkpoints", "bias_shift.ckpt")
    assert main(["audit", checkpoint, "--forgotten", "0"]) == 0
    printed = capsys.readouterr().out
    assert "Leakage attack guess: [0] (exact match)" in printed
    assert "Verdict" in printed


def test_dump_bias_command(finished_run, capsys, tmp_path):
    checkpoint = os.path.join(finished_run, "checkpoints", "original.ckpt")
    capsys.readouterr()
    assert main(["dump-bias", checkpoint]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "class,bias,in_V"
    assert len(lines) == 1 + 3

    target = str(tmp_path / "bias.csv")
    assert main(["dump-bias", checkpoint, "--forgotten", "0", "--output", target]) == 0
    with open(target, encoding="utf-8") as f:
        assert f.readline().strip() == "class,bias,in_V"


def test_sweep_beta_command(config_path, tmp_path):
    out = str(tmp_path / "sweep")
    assert main(["sweep-beta", config_path, "--output-dir", out]) == 0
    assert os.path.isfile(os.path.join(out, "beta_sweep.csv"))


def test_errors_exit_with_status_one(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.ini")]) == 1
    assert "ConfigError" in capsys.readouterr().out
    assert main(["audit", str(tmp_path / "absent.ckpt"), "--forgotten", "1"]) == 1
    assert "absent.ckpt" in capsys.readouterr().out


def test_bad_forgotten_list_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["audit", str(tmp_path / "x.ckpt"), "--forgotten", "a,b"])
    assert excinfo.value.code == 2
