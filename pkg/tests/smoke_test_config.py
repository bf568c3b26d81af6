"""실험 설정 로딩 smoke test"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pytest

from models.errors import UsageError
from models.experiment import ExperimentConfig, parse_config_values
from services.config import load_config, read_config_file, write_resolved_config


def test_defaults():
    config = ExperimentConfig()
    assert config.M == 200 and config.B == 200
    assert config.bandwidth_rule == "LCV" and config.bw_grid_size == 0
    assert (config.grid_circle, config.grid_line, config.grid_torus) == (128, 96, 96)
    assert config.alpha_list == [0.10, 0.05, 0.01]
    assert config.master_seed == 20131
    print("  [PASS] defaults")


def test_precedence(tmp_path, monkeypatch):
    """기본값 < 파일 < 환경 변수 < CLI"""
    path = tmp_path / "exp.cfg"
    path.write_text("M=10\nB=15\nmodels=CL1,CC2\nn_list=50,100\n", encoding="utf-8")
    for name in list(os.environ):
        if name.startswith("DIRLINLAB_"):
            monkeypatch.delenv(name)

    from_file = load_config(str(path))
    assert (from_file.M, from_file.B) == (10, 15)
    assert from_file.models == ["CL1", "CC2"] and from_file.n_list == [50, 100]

    monkeypatch.setenv("DIRLINLAB_M", "20")
    assert load_config(str(path)).M == 20
    assert load_config(str(path), use_env=False).M == 10
    assert load_config(str(path), overrides={"M": 30}).M == 30
    assert load_config(str(path), overrides={"M": "40", "B": None}).B == 15
    print("  [PASS] precedence")


def test_bad_values():
    with pytest.raises(UsageError, match="unknown configuration key"):
        parse_config_values({"colour": "red"})
    with pytest.raises(UsageError, match="M: invalid value"):
        parse_config_values({"M": "many"})
    with pytest.raises(UsageError):
        load_config(overrides={"models": "CL1,CL99"}, use_env=False)
    with pytest.raises(UsageError):
        load_config(overrides={"nonsense": 1}, use_env=False)
    with pytest.raises(UsageError):
        read_config_file("/nonexistent/exp.cfg")
    print("  [PASS] bad keys and values")


def test_validation():
    with pytest.raises(UsageError):
        ExperimentConfig(M=0)
    with pytest.raises(UsageError):
        ExperimentConfig(delta_list=[1.5])
    with pytest.raises(UsageError):
        ExperimentConfig(alpha_list=[0.0])
    with pytest.raises(UsageError):
        ExperimentConfig(bandwidth_rule="fixed")
    with pytest.raises(UsageError):
        ExperimentConfig(n_list=[2])
    with pytest.raises(UsageError):
        ExperimentConfig(grid_circle=4)
    with pytest.raises(UsageError):
        ExperimentConfig(clt_statistic="gof")
    assert ExperimentConfig(bandwidth_rule="fixed", bandwidths=(0.3, 0.4)).bandwidths == (0.3, 0.4)
    print("  [PASS] validation")


def test_resolved_config_round_trip(tmp_path):
    config = ExperimentConfig(models=["CL7", "CC12"], delta_list=[0.0, 0.15], bandwidth_rule="fixed",
                              bandwidths=(0.25, 0.5), reselect_bandwidths=True)
    path = write_resolved_config(config, str(tmp_path / "out" / "config.txt"))
    again = ExperimentConfig.from_kv_map(read_config_file(path))
    assert again == config
    print("  [PASS] resolved config round trip")
