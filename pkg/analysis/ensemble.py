# -*- coding: utf-8 -*-
"""
网络集合统计与理论对比
Ensemble aggregation and empirical vs. predicted comparison

多个网络的活动均值/标准差、稳态 ISI 分布、网络平均频率，
以及参数扫描（渐近值、暂态、ISI 几何分布拟合）。
并行时按网络编号顺序归约，结果与调度无关。
"""

import logging
import math
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from typing import Dict, List, Sequence, Tuple

import numpy as np

from data.defaults import ASYMPTOTE_WINDOW, FAILURE_BAND, RANDOM_SUM_DRAWS, STEADY_STATE_START
from simulation.network_simulator import SimConfig, first_step_counts, run_simulation
from theory.charge_probability import charge_probability, p_phi
from theory.meanfield import (
    DeathRegimeError,
    asymptote,
    geometric_isi_pmf,
    predict_isi,
    run_meanfield,
)
from theory.models import MeanFieldParams, WeightModel

logger = logging.getLogger(__name__)


# ==================== 集合统计 ====================

@dataclass
class EnsembleStats:
    """多个网络的聚合结果"""
    runs: int
    N: int
    mean_activity: np.ndarray          # mean(X_t / N)，t = 0..T
    std_activity: np.ndarray           # 网络间标准差（ddof = 0）
    isi_histogram: Dict[int, int]      # ISI 长度 -> 次数
    mean_frequency: float              # 窗口内每个神经元的平均发放频率
    window_start: int
    network_asymptotes: np.ndarray     # 每个网络最后 ASYMPTOTE_WINDOW 步的平均活动

    def standard_error(self) -> np.ndarray:
        """均值的标准误"""
        if self.runs < 2:
            return np.zeros_like(self.std_activity)
        return self.std_activity * math.sqrt(self.runs / (self.runs - 1)) / math.sqrt(self.runs)

    def asymptote(self, last: int = ASYMPTOTE_WINDOW) -> float:
        """最后 last 步的平均活动"""
        return float(self.mean_activity[-last:].mean())

    @property
    def isi_count(self) -> int:
        return sum(self.isi_histogram.values())


def _pooled_isis(spikes: np.ndarray, window_start: int) -> np.ndarray:
    """窗口内同一神经元相邻两次发放的间隔"""
    neurons, times = np.nonzero(spikes[window_start:].T)
    same_neuron = neurons[1:] == neurons[:-1]
    return np.diff(times)[same_neuron]


def _simulate_network(task: Tuple[SimConfig, int, int]) -> Tuple[np.ndarray, np.ndarray]:
    """单个网络：返回 (X_t, ISI 计数)"""
    config, network_index, window_start = task
    trace = run_simulation(config, network_index)
    isis = _pooled_isis(trace.spikes, window_start)
    return trace.spike_counts, np.bincount(isis)


def ensemble(config: SimConfig, runs: int, window_start: int = STEADY_STATE_START,
             workers: int = 1) -> EnsembleStats:
    """
    模拟网络 0..runs-1 并聚合

    Args:
        config: 单个网络的配置
        runs: 网络个数
        window_start: 稳态窗口起点，窗口为 [window_start, T]
        workers: 进程数，<= 1 时顺序执行
    """
    if runs < 1:
        raise ValueError(f"runs 必须 >= 1，收到 {runs}")
    if not 0 <= window_start <= config.T:
        raise ValueError(f"window_start 必须在 [0, {config.T}] 内，收到 {window_start}")

    tasks = [(config, index, window_start) for index in range(runs)]
    if workers > 1 and runs > 1:
        with Pool(processes=min(workers, runs)) as pool:
            results = pool.map(_simulate_network, tasks)
    else:
        results = [_simulate_network(task) for task in tasks]

    activity = np.vstack([counts for counts, _ in results]) / config.N
    isi_counts = np.zeros(max(len(counts) for _, counts in results), dtype=np.int64)
    for _, counts in results:
        isi_counts[:len(counts)] += counts
    mean_activity = activity.mean(axis=0)

    stats = EnsembleStats(
        runs=runs,
        N=config.N,
        mean_activity=mean_activity,
        std_activity=activity.std(axis=0),
        isi_histogram={int(isi): int(count) for isi, count in enumerate(isi_counts) if count and isi >= 1},
        mean_frequency=float(mean_activity[window_start:].mean()),
        window_start=window_start,
        network_asymptotes=activity[:, -ASYMPTOTE_WINDOW:].mean(axis=1),
    )
    logger.info(
        f"集合完成: phi={config.model.phi} gamma={config.gamma} runs={runs} "
        f"渐近值={stats.asymptote():.4f} 平均频率={stats.mean_frequency:.4f} ISI 数={stats.isi_count}")
    return stats


# ==================== ISI 几何分布拟合 ====================

def isi_geometric_fit(stats: EnsembleStats, predicted_param: float) -> float:
    """
    经验 ISI 分布与 Geometric(predicted_param) 的全变差距离

    几何分布在 [1, 最大观测 ISI] 上重新归一化后比较。
    """
    if not stats.isi_histogram:
        raise DeathRegimeError("ISI 直方图为空（网络已死亡）")
    if not 0.0 < predicted_param <= 1.0:
        raise ValueError(f"几何分布参数必须在 (0, 1] 内，收到 {predicted_param}")
    max_isi = max(stats.isi_histogram)
    empirical = np.zeros(max_isi)
    for isi, count in stats.isi_histogram.items():
        empirical[isi - 1] = count
    empirical /= empirical.sum()
    predicted = geometric_isi_pmf(predicted_param, max_isi)
    predicted /= predicted.sum()
    return float(0.5 * np.abs(empirical - predicted).sum())


# ==================== 参数扫描 ====================

def in_failure_band(phi: float) -> bool:
    """phi 位于平均场预测失效的区间内"""
    low, high = FAILURE_BAND
    return low < phi < high


@dataclass
class AsymptoteRow:
    phi: float
    gamma: float
    predicted: float
    simulated_mean: float
    simulated_std: float

    @property
    def abs_error(self) -> float:
        return abs(self.predicted - self.simulated_mean)

    @property
    def in_failure_band(self) -> bool:
        return in_failure_band(self.phi)


@dataclass
class TransientRow:
    phi: float
    gamma: float
    t: int
    x_pred: float
    x_sim_mean: float
    x_sim_std: float
    x_sim_se: float


@dataclass
class IsiFit:
    phi: float
    gamma: float
    geometric_param: float
    distance: float


@dataclass
class ComparisonReport:
    """理论与模拟的对比结果"""
    asymptote_rows: List[AsymptoteRow] = field(default_factory=list)
    transient_rows: List[TransientRow] = field(default_factory=list)
    isi_fits: List[IsiFit] = field(default_factory=list)
    runs: int = 0

    def transients(self, phi: float, gamma: float) -> List[TransientRow]:
        return [row for row in self.transient_rows if row.phi == phi and row.gamma == gamma]

    def max_abs_error(self, exclude_failure_band: bool = True) -> float:
        errors = [row.abs_error for row in self.asymptote_rows
                  if not (exclude_failure_band and row.in_failure_band)]
        return max(errors) if errors else 0.0


def sweep(phi_grid: Sequence[float], gamma_list: Sequence[float], base_config: SimConfig, runs: int,
          window_start: int = STEADY_STATE_START, workers: int = 1) -> ComparisonReport:
    """
    对每个 (phi, gamma) 同时计算平均场预测与模拟集合

    失效区间 (1.5, 2.0) 内的单元照常计算，仅记录警告。
    """
    if not phi_grid or not gamma_list:
        raise ValueError("phi 与 gamma 网格不能为空")

    report = ComparisonReport(runs=runs)
    for gamma in gamma_list:
        for phi in phi_grid:
            model = replace(base_config.model, phi=phi)
            config = replace(base_config, model=model, gamma=gamma)
            if in_failure_band(phi):
                logger.warning(f"phi={phi} 位于失效区间 {FAILURE_BAND}，平均场预测不可靠")

            params = MeanFieldParams.from_sim_config(config)
            trace = run_meanfield(params)
            predicted = asymptote(params, trace)
            stats = ensemble(config, runs, window_start=window_start, workers=workers)

            simulated_mean = stats.asymptote()
            report.asymptote_rows.append(AsymptoteRow(
                phi=phi,
                gamma=gamma,
                predicted=predicted.asymptote,
                simulated_mean=simulated_mean,
                simulated_std=float(stats.network_asymptotes.std()),
            ))
            standard_error = stats.standard_error()
            for t, x_pred in enumerate(trace.x):
                report.transient_rows.append(TransientRow(
                    phi=phi, gamma=gamma, t=t, x_pred=x_pred,
                    x_sim_mean=float(stats.mean_activity[t]),
                    x_sim_std=float(stats.std_activity[t]),
                    x_sim_se=float(standard_error[t]),
                ))

            if not predicted.death_only and stats.isi_histogram:
                isi = predict_isi(predicted, model)
                report.isi_fits.append(IsiFit(
                    phi=phi, gamma=gamma, geometric_param=isi.geometric_param,
                    distance=isi_geometric_fit(stats, isi.geometric_param),
                ))
            logger.info(
                f"phi={phi} gamma={gamma}: 预测={predicted.asymptote:.4f} "
                f"模拟={simulated_mean:.4f} 误差={abs(predicted.asymptote - simulated_mean):.4f}")
    return report


# ==================== 近似检验 ====================

@dataclass
class RandomSumRow:
    """E[f(X)] 与 f(E[X]) 的差异，X ~ Binomial(N, x0)"""
    N: int
    mc_mean: float
    plug_in: float
    standard_error: float

    @property
    def error(self) -> float:
        return abs(self.mc_mean - self.plug_in)


def randomsum_approx_check(N_list: Sequence[int], x0: float, model: WeightModel,
                           draws: int = RANDOM_SUM_DRAWS, seed: int = 0) -> List[RandomSumRow]:
    """
    以 f(E[X]) 代替 E[f(X)] 的误差随 N 的变化

    f(k) = gaussian_tail(theta / (sigma sqrt(k)))，sigma = phi / sqrt(N)，
    即 p_phi(k / N)；f(0) = 0。
    """
    if list(N_list) != sorted(N_list):
        raise ValueError(f"N_list 必须递增，收到 {N_list}")
    if not 0.0 <= x0 <= 1.0:
        raise ValueError(f"x0 必须在 [0, 1] 内，收到 {x0}")

    rows = []
    for index, n in enumerate(N_list):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(index,))))
        samples = np.asarray(p_phi(rng.binomial(n, x0, size=draws) / n, model))
        rows.append(RandomSumRow(
            N=n,
            mc_mean=float(samples.mean()),
            plug_in=float(p_phi(x0, model)),
            standard_error=float(samples.std(ddof=1) / math.sqrt(draws)),
        ))
        logger.debug(f"N={n} 误差={rows[-1].error:.3e} 标准误={rows[-1].standard_error:.3e}")
    return rows


@dataclass
class WaldCheck:
    """t = 1 发放数的蒙特卡洛矩与 Wald 恒等式预测"""
    trials: int
    mc_mean: float
    mc_var: float
    predicted_mean: float
    predicted_var: float
    mean_se: float
    var_se: float

    def within(self, sigmas: float = 3.0) -> bool:
        return (abs(self.mc_mean - self.predicted_mean) <= sigmas * self.mean_se
                and abs(self.mc_var - self.predicted_var) <= sigmas * self.var_se)


def wald_check(config: SimConfig, trials: int) -> WaldCheck:
    """
    刺激 round(x0 N) 个神经元后 X_1 的均值与方差

    预测值：N P(0,1) 与 N P(0,1)(1 - P(0,1))，P(0,1) = p(stimulated / N)。
    """
    if trials < 2:
        raise ValueError(f"trials 必须 >= 2，收到 {trials}")
    stimulated = int(round(config.x0 * config.N))
    counts = first_step_counts(config, stimulated, trials).astype(float)
    prob = float(charge_probability(stimulated / config.N, config.model))

    mc_var = float(counts.var(ddof=1))
    fourth = float(np.mean((counts - counts.mean()) ** 4))
    check = WaldCheck(
        trials=trials,
        mc_mean=float(counts.mean()),
        mc_var=mc_var,
        predicted_mean=config.N * prob,
        predicted_var=config.N * prob * (1.0 - prob),
        mean_se=math.sqrt(mc_var / trials),
        var_se=math.sqrt(max(fourth - mc_var ** 2, 0.0) / trials),
    )
    logger.info(
        f"Wald 检验: 均值 {check.mc_mean:.3f} / {check.predicted_mean:.3f}，"
        f"方差 {check.mc_var:.3f} / {check.predicted_var:.3f}")
    return check
