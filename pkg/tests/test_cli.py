# -*- coding: utf-8 -*-
"""命令与命令行入口测试"""

import csv
import logging

import numpy as np
import pytest

from engine.cli import EXIT_CONFIG_ERROR, EXIT_OK, main
from engine.config_parser import ConfigError, ExperimentConfig, config_from_header
from engine.experiment import cmd_compare, cmd_fixed_point, cmd_predict, cmd_simulate


def data_rows(text: str):
    """去掉 `#` 头部后的 CSV 行（含列名）"""
    return list(csv.reader(line for line in text.splitlines() if not line.startswith("#")))


def small_config(**kwargs) -> ExperimentConfig:
    values = dict(N=100, T=10, window_start=5, runs=2, workers=1)
    values.update(kwargs)
    return ExperimentConfig(**values)


@pytest.fixture
def restore_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)


# ==================== predict ====================

def test_predict_defaults():
    text = cmd_predict(ExperimentConfig())
    rows = data_rows(text)
    assert rows[0] == ["t", "x_pred"]
    assert len(rows) == 52
    assert rows[1] == ["0", "0.15"]
    assert text.startswith("# N=1000\n")


def test_predict_death_regime_decays():
    rows = data_rows(cmd_predict(ExperimentConfig(phi=(1.0,))))
    assert float(rows[6][1]) < 1e-6


def test_predict_output_round_trips_through_header():
    config = ExperimentConfig(phi=(2.5, 5.0), gamma=(0.0, 0.5), T=20, v_min=-0.5)
    text = cmd_predict(config)
    assert config_from_header(text) == config
    assert cmd_predict(config_from_header(text)) == text


def test_predict_grid_columns():
    config = ExperimentConfig(phi=(2.5, 5.0), gamma=(0.0,), T=5)
    rows = data_rows(cmd_predict(config))
    assert rows[0] == ["phi", "gamma", "t", "x_pred"]
    assert len(rows) == 1 + 2 * 6
    assert [row[0] for row in rows[1:]] == ["2.5"] * 6 + ["5.0"] * 6


# ==================== simulate ====================

def test_simulate_without_stimulation_is_silent():
    rows = data_rows(cmd_simulate(small_config(x0=0.0, runs=1)))
    assert rows[0] == ["t", "mean_activity", "std_activity"]
    assert len(rows) == 12
    assert all(row[1:] == ["0.0", "0.0"] for row in rows[1:])


def test_simulate_is_byte_identical():
    config = small_config(gamma=(0.5,), seed=11)
    assert cmd_simulate(config) == cmd_simulate(config)


def test_simulate_writes_raster(tmp_path):
    path = tmp_path / "raster.txt"
    cmd_simulate(small_config(runs=1), raster_path=str(path))
    lines = path.read_text(encoding="utf-8").split("\n")[:-1]
    assert len(lines) == 100
    for line in lines:
        times = [int(t) for t in line.split()]
        assert times == sorted(times)
        assert all(0 <= t <= 10 for t in times)


def test_simulate_raster_requires_single_cell(tmp_path):
    with pytest.raises(ConfigError):
        cmd_simulate(small_config(phi=(2.5, 5.0)), raster_path=str(tmp_path / "raster.txt"))


# ==================== compare ====================

def test_compare_marks_failure_band():
    rows = data_rows(cmd_compare(small_config(phi=(1.7,), T=25, window_start=20)))
    assert rows[0] == ["t", "x_pred", "x_sim_mean", "x_sim_std", "comment"]
    assert len(rows) == 1 + 26 + 1
    assert all(row[4] == "failure-band" for row in rows[1:-1])
    footer = rows[-1]
    assert footer[0] == "asymptote"
    assert footer[4].startswith("abs_error=")
    assert "failure-band" in footer[4]


def test_compare_reports_isi_fit():
    rows = data_rows(cmd_compare(small_config(phi=(5.0,), T=20, window_start=10)))
    footer = rows[-1]
    assert footer[0] == "asymptote"
    assert "isi_param=" in footer[4] and "isi_tv=" in footer[4]
    assert rows[1][1] == "0.15"


# ==================== fixed-point ====================

def test_fixed_point_report_contains_threshold():
    text = cmd_fixed_point(ExperimentConfig(phi=(5.0,)))
    assert "2.079" in text
    assert "稳定" in text
    assert "ISI ~ Geometric" in text


def test_fixed_point_zero_coupling_is_death():
    text = cmd_fixed_point(ExperimentConfig(phi=(0.0,)))
    assert "只存在死亡不动点" in text
    assert "f* = 0.000000" in text


def test_fixed_point_with_leak_reports_asymptote():
    text = cmd_fixed_point(ExperimentConfig(phi=(5.0,), gamma=(0.5,)))
    assert "渐近值 x*" in text


def test_fixed_point_failure_band_note():
    assert "失效区间" in cmd_fixed_point(ExperimentConfig(phi=(1.8,)))


# ==================== 入口 ====================

def test_main_writes_output_file(tmp_path, capsys, restore_logging):
    path = tmp_path / "out" / "predict.csv"
    assert main(["predict", "--T", "5", "--phi", "3", "-o", str(path)]) == EXIT_OK
    assert capsys.readouterr().out == ""
    rows = data_rows(path.read_text(encoding="utf-8"))
    assert len(rows) == 7


def test_main_prints_csv_to_stdout(capsys, restore_logging):
    assert main(["predict", "--set", "T=3", "--x0", "0.2"]) == EXIT_OK
    rows = data_rows(capsys.readouterr().out)
    assert rows[1] == ["0", "0.2"]


@pytest.mark.parametrize("argv", [
    ["predict", "--gamma", "1.5"],
    ["predict", "--set", "unknown=1"],
    ["simulate", "--runs", "0"],
    ["predict", "--config", "no/such/config.json"],
])
def test_main_config_errors(argv, capsys, restore_logging):
    assert main(argv) == EXIT_CONFIG_ERROR
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    assert err[0].startswith("错误:")


def test_main_negative_floor_flag(capsys, restore_logging):
    assert main(["predict", "--T", "3", "--v-min=-inf"]) == EXIT_OK
    assert "# v_min=-inf" in capsys.readouterr().out


def test_main_unknown_command():
    with pytest.raises(SystemExit):
        main(["explode"])


def test_main_writes_log_file(tmp_path, capsys, restore_logging):
    log_dir = tmp_path / "logs"
    assert main(["fixed-point", "--log-dir", str(log_dir)]) == EXIT_OK
    assert "死亡阈值" in capsys.readouterr().out
    logs = list(log_dir.glob("experiment_*.log"))
    assert len(logs) == 1
    assert "版本" in logs[0].read_text(encoding="utf-8")


@pytest.mark.slow
def test_simulated_steady_state_matches_prediction():
    config = ExperimentConfig(phi=(5.0,), runs=20, workers=1)
    predicted = np.array([float(row[1]) for row in data_rows(cmd_predict(config))[1:]])
    simulated = np.array([float(row[1]) for row in data_rows(cmd_simulate(config))[1:]])
    assert abs(predicted[20:].mean() - simulated[20:].mean()) <= 0.02


def test_simulate_writes_counts(tmp_path):
    path = tmp_path / "counts.csv"
    cmd_simulate(small_config(runs=1), counts_path=str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,X_t"
    assert len(lines) == 12
    assert all(0 <= int(line.split(",")[1]) <= 100 for line in lines[1:])


def test_main_simulate_counts_option(tmp_path, capsys, restore_logging):
    path = tmp_path / "counts.csv"
    argv = ["simulate", "--N", "50", "--T", "4", "--window-start", "2", "--runs", "1", "--workers", "1",
            "--counts", str(path)]
    assert main(argv) == EXIT_OK
    assert len(data_rows(capsys.readouterr().out)) == 6
    assert path.read_text(encoding="utf-8").startswith("t,X_t\n")


def test_help_documents_sparsity_convention(capsys):
    with pytest.raises(SystemExit):
        main(["predict", "--help"])
    out = capsys.readouterr().out
    assert "--sparsity-p" in out
    assert "每个权重为0的概率" in out
