import subprocess
import sys
from pathlib import Path

import pytest

from lassomlp.cli import EXIT_CONFIG, EXIT_DATA, EXIT_FAILED, EXIT_OK, main
from lassomlp.data import DATA_DIR_ENV
from lassomlp.experiments import CSV_HEADER

FIXTURE = str(Path(__file__).parent / "data" / "mnist5k")
SMALL_SYNTH = ["--set", "train_sizes=30", "--set", "epochs=10", "--set", "kick_epochs=3",
               "--set", "n_features=8", "--seeds", "0,1"]
SMALL_GEN = ["--set", "train_sizes=6", "--set", "pairs=1-7", "--set", "noise_features=5",
             "--set", "epochs=3", "--set", "min_steps=0", "--set", "kick_epochs=1",
             "--set", "n_trees=2", "--seeds", "0"]


def test_gradcheck_exit_codes(capsys):
    assert main(["gradcheck"]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out
    assert main(["gradcheck", "--corrupt"]) == EXIT_FAILED
    out = capsys.readouterr().out
    assert "FAIL" in out and "layer1.weights" in out


def test_synthetic_to_file_is_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "sub" / "b.csv"
    assert main(["synthetic-auc", *SMALL_SYNTH, "--no-timing", "--out", str(a)]) == EXIT_OK
    assert main(["synthetic-auc", *SMALL_SYNTH, "--no-timing", "--out", str(b)]) == EXIT_OK
    data = a.read_bytes()
    assert data == b.read_bytes()
    assert data.startswith((",".join(CSV_HEADER) + "\n").encode())
    assert b"\r\n" not in data and data.count(b"\n") == 5


def test_stdout_and_config_file(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("experiment = synthetic-auc\ntrain_sizes = 20\nepochs = 4\nkick_epochs = 1\n"
                    "n_features = 5\nseeds = 3\n")
    assert main(["synthetic-auc", "--config", str(conf), "--no-timing"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and lines[1].startswith("synthetic-auc,3,20,,lassomlp,auc,")


@pytest.mark.parametrize("argv", [
    ["synthetic-auc", "--set", "bogus=1"],
    ["synthetic-auc", "--set", "epochs"],
    ["synthetic-auc", "--seeds", "a,b"],
    ["synthetic-auc", "--config", "/nonexistent/file.conf"],
    ["mnist-gen", "--set", "pairs="],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    for argv in ([], ["train"], ["synthetic-auc", "--frobnicate"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == EXIT_CONFIG


def test_missing_data_exit_3(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv(DATA_DIR_ENV, raising=False)
    out = tmp_path / "x.csv"
    assert main(["mnist-fs", "--out", str(out)]) == EXIT_DATA
    assert DATA_DIR_ENV in capsys.readouterr().err
    assert not out.exists()
    assert main(["mnist-gen", "--data-dir", str(tmp_path)]) == EXIT_DATA


def test_corrupt_data_exit_3(tmp_path, capsys):
    (tmp_path / "train-images-idx3-ubyte").write_bytes(b"\x00\x00\x08\x01\x00\x00\x00\x01\x05")
    (tmp_path / "train-labels-idx1-ubyte").write_bytes(b"\x00\x00\x08\x01\x00\x00\x00\x01\x05")
    assert main(["mnist-fs", "--data-dir", str(tmp_path)]) == EXIT_DATA
    assert "bad magic" in capsys.readouterr().err


def test_mnist_gen_with_env_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(DATA_DIR_ENV, FIXTURE)
    out = tmp_path / "gen.csv"
    assert main(["mnist-gen", *SMALL_GEN, "--no-timing", "--out", str(out)]) == EXIT_OK
    text = out.read_text()
    assert "mnist-generalization-1v7,all,6,,lassomlp,accuracy_mean," in text


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lassomlp.cli", "gradcheck", "--set", "instances=2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip().endswith("PASS (tolerance 1e-04)")
