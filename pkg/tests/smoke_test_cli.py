"""dirlinlab 명령줄 smoke test"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pandas as pd

from app import main


def _run(tmp_path, *argv):
    return main(list(argv) + ["--out", str(tmp_path)])


def test_constants_command(tmp_path, capsys):
    assert _run(tmp_path, "constants") == 0
    assert "PASS" in capsys.readouterr().out
    assert os.path.exists(tmp_path / "constants.csv")
    assert os.path.exists(tmp_path / "dirlinlab.log")
    print("  [PASS] constants")


def test_usage_errors(tmp_path):
    assert main(["no-such-command"]) == 1
    assert main(["fit"]) == 1
    assert _run(tmp_path, "simulate", "--n", "10") == 1          # --model 누락
    assert _run(tmp_path, "constants", "--M", "0") == 1
    assert _run(tmp_path, "simulate", "--model", "CL99") == 1
    print("  [PASS] usage errors → 1")


def test_data_errors(tmp_path):
    assert _run(tmp_path, "fit", str(tmp_path / "missing.csv"), "--model", "CL1") == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("theta,z\n0.1,x\n", encoding="utf-8")
    assert _run(tmp_path, "fit", str(bad), "--model", "CL1") == 3
    print("  [PASS] data errors → 3")


def test_simulate_then_fit(tmp_path, capsys):
    path = str(tmp_path / "cl1.csv")
    assert _run(tmp_path, "simulate", "--model", "CL1", "--n", "30", "--output", path) == 0
    df = pd.read_csv(path)
    assert list(df.columns) == ["theta", "z"] and len(df) == 30
    capsys.readouterr()
    assert _run(tmp_path, "fit", path, "--model", "CL1") == 0
    assert "family=CL1" in capsys.readouterr().out

    torus = str(tmp_path / "cc.csv")
    assert _run(tmp_path, "simulate", "--model", "CC12", "--n", "25", "--delta", "0.2", "--output", torus) == 0
    assert list(pd.read_csv(torus).columns) == ["theta", "psi"]
    print("  [PASS] simulate + fit")


def test_tests_and_kde(tmp_path):
    path = str(tmp_path / "cl1.csv")
    _run(tmp_path, "simulate", "--model", "CL1", "--n", "30", "--output", path)
    small = ["--bandwidths", "0.5,0.5", "--grid-circle", "16", "--grid-line", "16", "--threads", "1"]
    assert _run(tmp_path, "test-indep", path, "--B", "5", *small) == 0
    assert os.path.exists(tmp_path / "cl1_test-indep.txt")
    assert _run(tmp_path, "test-gof", path, "--model", "CL1", "--simple", "--B", "3", "--xlsx", *small) == 0
    assert os.path.exists(tmp_path / "cl1_test-gof.txt")
    assert os.path.exists(tmp_path / "cl1_test-gof.xlsx")
    assert _run(tmp_path, "kde", path, *small) == 0
    assert os.path.exists(tmp_path / "cl1_kde.csv")
    print("  [PASS] test-indep, test-gof, kde")


def test_size_power_command(tmp_path):
    argv = ["mc-size-power", "--model", "CL1", "--n", "20", "--delta", "0", "--M", "2", "--B", "2",
            "--bandwidths", "0.5,0.5", "--grid-circle", "16", "--grid-line", "16", "--threads", "1", "--xlsx"]
    assert _run(tmp_path, *argv) == 0
    assert os.path.exists(tmp_path / "size_power.csv")
    assert os.path.exists(tmp_path / "size_power.xlsx")
    print("  [PASS] mc-size-power")


def test_kde_on_sphere_line(tmp_path):
    """구면×직선 kde 출력은 방향 좌표 x1, x2, x3 열을 쓴다"""
    rng = np.random.default_rng(3)
    x = rng.normal(size=(12, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    path = str(tmp_path / "sl.csv")
    pd.DataFrame({"x1": x[:, 0], "x2": x[:, 1], "x3": x[:, 2], "z": rng.normal(size=12)}).to_csv(path, index=False)
    assert _run(tmp_path, "kde", path, "--bandwidths", "0.5,0.5", "--grid-line", "8", "--threads", "1") == 0
    frame = pd.read_csv(tmp_path / "sl_kde.csv")
    assert list(frame.columns) == ["x1", "x2", "x3", "second", "density"]
    assert np.allclose(np.linalg.norm(frame[["x1", "x2", "x3"]].to_numpy(), axis=1), 1.0)
    assert (frame["density"] >= 0).all()
    print("  [PASS] sphere-line kde")
