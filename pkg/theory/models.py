# -*- coding: utf-8 -*-
"""
平均场数据模型
Data Models for the Mean-Field Predictor
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np


# ==================== 权重分布 ====================

@dataclass(frozen=True)
class WeightModel:
    """
    突触权重分布

    N 个神经元的网络中，每个权重以概率 sparsity_p 为 0，
    否则服从 Normal(mu/N, phi/sqrt(N))。
    """
    phi: float = 5.0          # 耦合因子 phi = sigma * sqrt(N)
    mu: float = 0.0           # 缩放后的均值（权重均值为 mu/N）
    sparsity_p: float = 0.0   # 权重恰好为 0 的概率
    theta: float = 1.0        # 发放阈值

    def __post_init__(self):
        if not self.phi >= 0:
            raise ValueError(f"phi 必须 >= 0，当前为 {self.phi}")
        if not self.theta > 0:
            raise ValueError(f"theta 必须 > 0，当前为 {self.theta}")
        if not 0.0 <= self.sparsity_p <= 1.0:
            raise ValueError(f"sparsity_p 必须在 [0, 1] 内，当前为 {self.sparsity_p}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu 必须是有限值，当前为 {self.mu}")

    def weight_mean(self, n_neurons: int) -> float:
        """非零权重的均值"""
        return self.mu / n_neurons

    def weight_std(self, n_neurons: int) -> float:
        """非零权重的标准差"""
        return self.phi / math.sqrt(n_neurons)

    @property
    def charge_scale(self) -> float:
        """稀疏连接下实际参与充电的比例 (1 - p)"""
        return 1.0 - self.sparsity_p

    def to_dict(self) -> dict:
        return {
            "phi": self.phi,
            "mu": self.mu,
            "sparsity_p": self.sparsity_p,
            "theta": self.theta,
        }


# ==================== 平均场参数 ====================

class VminMode(str, Enum):
    """电位下限的处理方式"""
    CLAMP_AT_ZERO = "clamp-at-zero"   # v_min = 0，衰减率减半
    UNCLAMPED = "unclamped"           # 不设下限，原始递推
    CLAMP_AT_VMIN = "clamp-at-vmin"   # 一般 v_min < 0，分裂高斯近似


@dataclass(frozen=True)
class MeanFieldParams:
    """平均场递推参数"""
    model: WeightModel = field(default_factory=WeightModel)
    gamma: float = 0.0
    x0: float = 0.15
    vmin_mode: VminMode = VminMode.CLAMP_AT_ZERO
    horizon: int = 50
    v_min: float = 0.0        # 仅 CLAMP_AT_VMIN 模式使用

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma 必须在 [0, 1] 内，当前为 {self.gamma}")
        if not 0.0 <= self.x0 <= 1.0:
            raise ValueError(f"x0 必须在 [0, 1] 内，当前为 {self.x0}")
        if self.horizon < 1:
            raise ValueError(f"时间范围 T 必须 >= 1，当前为 {self.horizon}")
        if self.v_min > 0:
            raise ValueError(f"v_min 必须 <= 0，当前为 {self.v_min}")
        object.__setattr__(self, "vmin_mode", VminMode(self.vmin_mode))

    @property
    def gamma_eff(self) -> float:
        """每步的有效衰减率"""
        if self.vmin_mode is VminMode.UNCLAMPED:
            return self.gamma
        return self.gamma / 2.0

    @property
    def uses_split_gaussian(self) -> bool:
        """是否需要按一般 v_min 的分裂高斯公式计算"""
        return self.vmin_mode is VminMode.CLAMP_AT_VMIN and self.v_min < 0

    @classmethod
    def from_sim_config(cls, config) -> "MeanFieldParams":
        """
        从仿真配置构造对应的平均场参数

        v_min = 0 对应减半衰减，v_min = -inf 对应不设下限，
        其余负值使用一般 v_min 公式。
        """
        if config.v_min == 0:
            mode = VminMode.CLAMP_AT_ZERO
        elif math.isinf(config.v_min):
            mode = VminMode.UNCLAMPED
        else:
            mode = VminMode.CLAMP_AT_VMIN
        return cls(
            model=config.model,
            gamma=config.gamma,
            x0=config.x0,
            vmin_mode=mode,
            horizon=config.T,
            v_min=config.v_min if mode is VminMode.CLAMP_AT_VMIN else 0.0,
        )


# ==================== 递推轨迹 ====================

@dataclass
class BranchTable:
    """
    存活分支表（每个 k 一个分支）

    k: 上次复位时刻
    weight: x_hat_k（k = 0 时为 1）
    charge: 累积电荷 u_t^k（一般 v_min 模式下为等效电荷）
    shift: 一般 v_min 模式下的均值偏移
    log_survival: log prod (1 - p(u_{m-1}^k))
    """
    k: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    weight: np.ndarray = field(default_factory=lambda: np.empty(0))
    charge: np.ndarray = field(default_factory=lambda: np.empty(0))
    shift: np.ndarray = field(default_factory=lambda: np.empty(0))
    log_survival: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return len(self.k)

    def append(self, k: int, weight: float, charge: float):
        self.k = np.append(self.k, k)
        self.weight = np.append(self.weight, weight)
        self.charge = np.append(self.charge, charge)
        self.shift = np.append(self.shift, 0.0)
        self.log_survival = np.append(self.log_survival, 0.0)

    def keep(self, mask: np.ndarray):
        self.k = self.k[mask]
        self.weight = self.weight[mask]
        self.charge = self.charge[mask]
        self.shift = self.shift[mask]
        self.log_survival = self.log_survival[mask]


@dataclass
class MeanFieldTrace:
    """
    平均场轨迹

    x[t] 为期望发放比例；survival[t] 为 {k: (u_{t-1}^k, P(k, t))}。
    被截断的分支不再出现在表中（P 视为 0）。
    """
    params: MeanFieldParams
    x: List[float] = field(default_factory=list)
    survival: List[Dict[int, Tuple[float, float]]] = field(default_factory=list)
    converged_at: Optional[int] = None
    branches: BranchTable = field(default_factory=BranchTable, repr=False)

    @property
    def t(self) -> int:
        """当前最新时刻"""
        return len(self.x) - 1

    def probability(self, k: int, t: int) -> float:
        """P(k, t)，t <= k 或已截断时为 0"""
        if t >= len(self.survival):
            raise IndexError(f"时刻 {t} 尚未计算")
        entry = self.survival[t].get(k)
        return entry[1] if entry else 0.0


@dataclass
class MomentTrace:
    """E(X_t) 与 Var(X_t)（单位：神经元个数）"""
    expectation: List[float]
    variance: List[float]
    N: int


@dataclass(frozen=True)
class FixedPoint:
    """不动点"""
    x: float
    stable: bool


@dataclass
class FixedPointReport:
    """不动点 / 渐近值报告"""
    fixed_points: List[FixedPoint] = field(default_factory=list)
    death_only: bool = False
    asymptote: Optional[float] = None
    predicted_network_frequency: Optional[float] = None

    @property
    def stable_nonzero(self) -> Optional[float]:
        """最大的非零稳定不动点"""
        candidates = [fp.x for fp in self.fixed_points if fp.stable and fp.x > 0]
        return max(candidates) if candidates else None


@dataclass(frozen=True)
class IsiPrediction:
    """ISI 几何分布预测"""
    x_star: float
    geometric_param: float
    network_frequency: float
