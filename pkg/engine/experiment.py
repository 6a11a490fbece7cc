# -*- coding: utf-8 -*-
"""
实验命令
Experiment commands: predict / simulate / compare / fixed-point

每个命令返回完整的输出文本。CSV 以 `# key=value` 配置头部开始，
相同配置重复运行得到逐字节相同的输出。
"""

import csv
import io
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from analysis.ensemble import ensemble, in_failure_band, sweep
from data.defaults import FAILURE_BAND
from engine.config_parser import ConfigError, ExperimentConfig
from simulation.network_simulator import run_simulation, write_counts, write_raster
from theory.meanfield import (
    DeathRegimeError,
    asymptote,
    death_threshold,
    fixed_points_simple,
    predict_isi,
    run_meanfield,
)
from theory.models import MeanFieldParams

logger = logging.getLogger(__name__)

FAILURE_BAND_FLAG = "failure-band"


def resolve_workers(config: ExperimentConfig) -> int:
    """workers = 0 时使用全部 CPU"""
    return config.workers or os.cpu_count() or 1


def _number(value: float) -> str:
    return repr(float(value))


def _render_csv(config: ExperimentConfig, columns: Sequence[str], rows: List[Sequence]) -> str:
    buffer = io.StringIO()
    for line in config.header_lines():
        buffer.write(line + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buffer.getvalue()


def _cell_prefix(config: ExperimentConfig, phi: float, gamma: float) -> list:
    """网格配置时每行前加 phi, gamma 列"""
    return [_number(phi), _number(gamma)] if config.is_grid else []


def _cell_columns(config: ExperimentConfig, columns: Sequence[str]) -> List[str]:
    return (["phi", "gamma"] if config.is_grid else []) + list(columns)


def mean_field_params(config: ExperimentConfig, phi: float, gamma: float) -> MeanFieldParams:
    return MeanFieldParams.from_sim_config(config.sim_config(phi, gamma))


# ==================== 命令 ====================

def cmd_predict(config: ExperimentConfig) -> str:
    """平均场预测：t, x_pred"""
    rows = []
    for phi, gamma in config.cells():
        trace = run_meanfield(mean_field_params(config, phi, gamma))
        prefix = _cell_prefix(config, phi, gamma)
        rows.extend(prefix + [t, _number(x)] for t, x in enumerate(trace.x))
        logger.info(f"预测 phi={phi} gamma={gamma}: x_T={trace.x[-1]:.6g}")
    return _render_csv(config, _cell_columns(config, ["t", "x_pred"]), rows)


def cmd_simulate(config: ExperimentConfig, raster_path: Optional[str] = None,
                 counts_path: Optional[str] = None) -> str:
    """
    网络集合模拟：t, mean_activity, std_activity

    raster_path / counts_path 给出时额外写出第 0 个网络的发放时刻 / 每步发放数（仅限单个单元）。
    """
    if (raster_path or counts_path) and config.is_grid:
        raise ConfigError("单个网络的输出只支持单个 (phi, gamma) 单元")
    workers = resolve_workers(config)
    rows = []
    for phi, gamma in config.cells():
        sim_config = config.sim_config(phi, gamma)
        stats = ensemble(sim_config, config.runs, window_start=config.window_start, workers=workers)
        prefix = _cell_prefix(config, phi, gamma)
        rows.extend(
            prefix + [t, _number(mean), _number(std)]
            for t, (mean, std) in enumerate(zip(stats.mean_activity, stats.std_activity)))
    if raster_path or counts_path:
        trace = run_simulation(config.sim_config(), 0)
        if raster_path:
            logger.info(f"发放时刻已写入: {write_raster(trace, raster_path)}")
        if counts_path:
            logger.info(f"发放数已写入: {write_counts(trace, counts_path)}")
    return _render_csv(config, _cell_columns(config, ["t", "mean_activity", "std_activity"]), rows)


def cmd_compare(config: ExperimentConfig) -> str:
    """
    理论与模拟对比：t, x_pred, x_sim_mean, x_sim_std, comment

    每个单元最后一行 t = asymptote 为渐近值对比；
    失效区间内的单元在 comment 列标记 failure-band。
    """
    report = sweep(config.phi, config.gamma, config.sim_config(), config.runs,
                   window_start=config.window_start, workers=resolve_workers(config))
    fits = {(fit.phi, fit.gamma): fit for fit in report.isi_fits}

    rows = []
    for row in report.asymptote_rows:
        prefix = _cell_prefix(config, row.phi, row.gamma)
        flag = FAILURE_BAND_FLAG if row.in_failure_band else ""
        for transient in report.transients(row.phi, row.gamma):
            rows.append(prefix + [
                transient.t, _number(transient.x_pred), _number(transient.x_sim_mean),
                _number(transient.x_sim_std), flag])
        notes = [f"abs_error={row.abs_error:.6g}"]
        fit = fits.get((row.phi, row.gamma))
        if fit:
            notes.append(f"isi_param={fit.geometric_param:.6g}")
            notes.append(f"isi_tv={fit.distance:.6g}")
        if flag:
            notes.append(flag)
        rows.append(prefix + [
            "asymptote", _number(row.predicted), _number(row.simulated_mean),
            _number(row.simulated_std), ";".join(notes)])

    columns = _cell_columns(config, ["t", "x_pred", "x_sim_mean", "x_sim_std", "comment"])
    return _render_csv(config, columns, rows)


def cmd_fixed_point(config: ExperimentConfig) -> str:
    """不动点、稳定性、死亡阈值与预测频率的文本报告"""
    threshold = death_threshold(config.theta)
    lines = [
        "不动点分析",
        "=" * 60,
        f"theta = {config.theta}",
        f"死亡阈值 phi_c = {threshold:.6f}",
    ]
    for phi, gamma in config.cells():
        model = config.weight_model(phi)
        lines.append("-" * 60)
        lines.append(f"phi = {phi}  gamma = {gamma}  mu = {config.mu}  sparsity_p = {config.sparsity_p}")
        if gamma == 0 and config.mu == 0:
            report = fixed_points_simple(model)
            for fp in report.fixed_points:
                lines.append(f"  x* = {fp.x:.12f}  {'稳定' if fp.stable else '不稳定'}")
        else:
            report = asymptote(mean_field_params(config, phi, gamma))
            lines.append(f"  渐近值 x* = {report.asymptote:.12f}")
        if report.death_only:
            lines.append("  只存在死亡不动点 (neural death)")
        else:
            try:
                isi = predict_isi(report, model)
                lines.append(f"  ISI ~ Geometric({isi.geometric_param:.6f})")
            except DeathRegimeError:
                lines.append("  没有非零稳定不动点")
        if in_failure_band(phi):
            lines.append(f"  注意: phi 位于失效区间 {FAILURE_BAND}")
        lines.append(f"  预测网络频率 f* = {report.predicted_network_frequency:.6f}")
    return "\n".join(lines) + "\n"


# ==================== 输出 ====================

def emit(text: str, config: ExperimentConfig) -> Optional[Path]:
    """写入 output_path，未设置时写到标准输出"""
    if config.output_path is None:
        sys.stdout.write(text)
        return None
    path = Path(config.output_path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.info(f"结果已写入: {path}")
    return path
