# -*- coding: utf-8 -*-
"""
离散漏电积分发放网络模拟器
Monte Carlo simulator for random recurrent leaky integrate-and-fire networks

V_i(t+1) = gamma * V_i(t) + sum_{j fired at t} W_ij，发放后的神经元下一步按电位 0 计算漏电；
电位不低于 v_min；V >= theta 时发放。t = 0 时每个神经元以概率 x0 被刺激发放。

随机数：以 (seed, network_index, stream) 为键的 Philox 计数器生成器，
权重与初始刺激使用相互独立的流。
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from theory.models import WeightModel

# ==================== 随机数流 ====================

WEIGHT_STREAM = 0
STIMULUS_STREAM = 1


# ==================== 数据结构 ====================

@dataclass(frozen=True)
class SimConfig:
    """单个网络的仿真配置"""
    N: int = 1000
    model: WeightModel = field(default_factory=WeightModel)
    gamma: float = 0.0
    x0: float = 0.15
    v_min: float = 0.0
    T: int = 50
    seed: int = 20240601
    self_connections: bool = True
    annealed: bool = False    # 每步重新抽取权重矩阵

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N 必须 >= 1，当前为 {self.N}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma 必须在 [0, 1] 内，当前为 {self.gamma}")
        if not 0.0 <= self.x0 <= 1.0:
            raise ValueError(f"x0 必须在 [0, 1] 内，当前为 {self.x0}")
        if self.v_min > 0 or math.isnan(self.v_min):
            raise ValueError(f"v_min 必须 <= 0，当前为 {self.v_min}")
        if self.T < 1:
            raise ValueError(f"T 必须 >= 1，当前为 {self.T}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed 必须是 64 位非负整数，当前为 {self.seed}")


@dataclass
class NetworkRealization:
    """一次实现的权重矩阵，第 i 行为神经元 i 的输入"""
    weights: np.ndarray


@dataclass
class SimTrace:
    """单个网络的仿真记录"""
    spike_counts: np.ndarray           # X_t, t = 0..T
    spikes: np.ndarray                 # (T+1, N) 布尔发放矩阵
    final_potentials: np.ndarray

    @property
    def raster(self) -> List[List[int]]:
        """每个神经元的发放时刻列表"""
        return [np.flatnonzero(column).tolist() for column in self.spikes.T]

    @property
    def activity(self) -> np.ndarray:
        """X_t / N"""
        return self.spike_counts / self.spikes.shape[1]


# ==================== 网络生成 ====================

def stream_rng(config: SimConfig, network_index: int, stream: int) -> np.random.Generator:
    """(seed, network_index, stream) 确定的独立随机数流"""
    sequence = np.random.SeedSequence(entropy=config.seed, spawn_key=(network_index, stream))
    return np.random.Generator(np.random.Philox(sequence))


def sample_weights(rng: np.random.Generator, shape: Tuple[int, int], model: WeightModel,
                   n_neurons: int) -> np.ndarray:
    """以概率 sparsity_p 置零，否则 Normal(mu/N, phi/sqrt(N))"""
    weights = rng.normal(model.weight_mean(n_neurons), model.weight_std(n_neurons), size=shape)
    if model.sparsity_p > 0:
        weights[rng.random(shape) < model.sparsity_p] = 0.0
    return weights


def realize_network(config: SimConfig, network_index: int,
                    rng: Optional[np.random.Generator] = None) -> NetworkRealization:
    """
    生成一个网络的权重矩阵

    未传入 rng 时使用 (seed, network_index) 的权重流，结果可复现。
    """
    if rng is None:
        rng = stream_rng(config, network_index, WEIGHT_STREAM)
    weights = sample_weights(rng, (config.N, config.N), config.model, config.N)
    if not config.self_connections:
        np.fill_diagonal(weights, 0.0)
    return NetworkRealization(weights=weights)


# ==================== 动力学 ====================

def step_network(potentials: np.ndarray, fired_last_step: np.ndarray,
                 realization: NetworkRealization, config: SimConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    推进一步

    上一步发放的神经元漏电项按 0 计算；电荷只累加发放列。
    """
    leak = config.gamma * np.where(fired_last_step, 0.0, potentials)
    active = np.flatnonzero(fired_last_step)
    if active.size:
        charge = realization.weights[:, active].sum(axis=1)
    else:
        charge = np.zeros_like(potentials)
    updated = np.maximum(leak + charge, config.v_min)
    return updated, updated >= config.model.theta


def run_simulation(config: SimConfig, network_index: int) -> SimTrace:
    """从全零电位开始，按概率 x0 刺激后运行 T 步"""
    weight_rng = stream_rng(config, network_index, WEIGHT_STREAM)
    stimulus_rng = stream_rng(config, network_index, STIMULUS_STREAM)

    realization = realize_network(config, network_index, rng=weight_rng)
    potentials = np.zeros(config.N)
    fired = stimulus_rng.random(config.N) < config.x0

    spikes = np.zeros((config.T + 1, config.N), dtype=bool)
    spikes[0] = fired
    for t in range(1, config.T + 1):
        if config.annealed and t > 1:
            realization = realize_network(config, network_index, rng=weight_rng)
        potentials, fired = step_network(potentials, fired, realization, config)
        spikes[t] = fired

    return SimTrace(
        spike_counts=spikes.sum(axis=1).astype(np.int64),
        spikes=spikes,
        final_potentials=potentials,
    )


def first_step_counts(config: SimConfig, stimulated: int, trials: int) -> np.ndarray:
    """
    t = 1 时的发放数 X_1

    每次试验使用新网络（第 trial 个网络的权重流），恰好刺激 stimulated 个神经元，
    只抽取被刺激的列。
    """
    if not 0 <= stimulated <= config.N:
        raise ValueError(f"stimulated 必须在 [0, {config.N}] 内，收到 {stimulated}")
    counts = np.empty(trials, dtype=np.int64)
    for trial in range(trials):
        rng = stream_rng(config, trial, WEIGHT_STREAM)
        columns = sample_weights(rng, (config.N, stimulated), config.model, config.N)
        potentials = np.maximum(columns.sum(axis=1), config.v_min)
        counts[trial] = int(np.count_nonzero(potentials >= config.model.theta))
    return counts


# ==================== 输出 ====================

def write_counts(trace: SimTrace, path) -> Path:
    """发放数 CSV：t, X_t"""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["t", "X_t"])
        for t, count in enumerate(trace.spike_counts):
            writer.writerow([t, int(count)])
    return path


def write_raster(trace: SimTrace, path) -> Path:
    """发放时刻：每行一个神经元，空格分隔"""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        for times in trace.raster:
            f.write(" ".join(str(t) for t in times) + "\n")
    return path
