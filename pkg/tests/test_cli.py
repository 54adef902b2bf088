import json
import subprocess
import sys

import pytest

from codial.cli import main


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli") / "data"
    assert main(["gen-data", "--out", str(d), "--per-class", "8"]) == 0
    return d


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as e:
        main(["pretrain", "--no-such-flag"])
    assert e.value.code == 2


def test_missing_config_exits_1(tmp_path, capsys):
    assert main(["pretrain", "--config", str(tmp_path / "none.json")]) == 1
    assert "config file not found" in capsys.readouterr().err


def test_pretrain_probe_retrieve(data_dir, tmp_path, capsys):
    run = tmp_path / "run"
    assert main(["pretrain", "--dataset", str(data_dir / "train.cdld"), "--out", str(run), "--epochs", "1"]) == 0
    out = capsys.readouterr().out
    cfg = json.loads(out[: out.index("\n}\n") + 2])
    assert cfg["epochs"] == 1 and cfg["out_dir"] == str(run)
    assert (run / "checkpoint.cdl").exists() and len((run / "metrics.jsonl").read_text().splitlines()) == 1

    report = tmp_path / "probe.json"
    assert main(["probe", "--checkpoint", str(run / "checkpoint.cdl"), "--data", str(data_dir), "--stage", "1",
                 "--epochs", "20", "--out", str(report)]) == 0
    assert set(json.loads(report.read_text())) == {"stage", "pooled_dim", "train_acc", "test_acc", "epochs_run", "seed"}

    capsys.readouterr()
    assert main(["retrieve", "--checkpoint", str(run / "checkpoint.cdl"), "--dataset", str(data_dir / "test.cdld"),
                 "--query", "0", "--k", "2"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 3
    assert main(["retrieve", "--checkpoint", str(run / "checkpoint.cdl"), "--dataset", str(data_dir / "test.cdld"),
                 "--query", "999"]) == 1


def test_config_with_unknown_key_exits_1(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"epochs": 1, "colour": "blue"}))
    assert main(["pretrain", "--config", str(tmp_path / "c.json")]) == 1


def test_mi_oracle(capsys):
    assert main(["mi-oracle", "--rho", "0.5", "--steps", "200"]) == 0
    assert "0.1438" in capsys.readouterr().out


def test_ablate_smoke(data_dir, tmp_path, capsys):
    out = tmp_path / "abl"
    assert main(["ablate", "--data", str(data_dir), "--out", str(out), "--epochs", "1", "--seeds", "0",
                 "--ks", "1", "10", "--probe-epochs", "10"]) == 0
    table = capsys.readouterr().out
    assert "lambda (1,1)" in table and "pairs k=1" in table
    res = json.loads((out / "ablation.json").read_text())
    assert set(res["lambda"]) == {"random", "(1,0)", "(0,1)", "(1,1)"} and set(res["pairs"]) == {"1", "10"}


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "codial", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "mi-oracle" in r.stdout
