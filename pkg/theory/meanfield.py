# -*- coding: utf-8 -*-
"""
平均场递推
Recursive Mean-Field Dynamics

期望发放比例 x_t、存活概率 P(k, t)、方差与概率母函数递推、
不动点、渐近值以及死亡阈值。

P(k, t+1) 以对数空间的乘积形式逐步维护，不做除法：
    P(k, t+1) = p(u_t^k) * prod_{m=k+1}^{t} (1 - p(u_{m-1}^k))
    u_t^k = sum_{i=k}^{t} gamma_eff^{t-i} x_i
每步 O(T)，总计 O(T^2)。
"""

import logging
import math
from typing import List, Optional

import numpy as np
from scipy import optimize, stats

from theory.charge_probability import (
    charge_tail,
    charge_probability,
    charge_probability_deriv,
    clamped_charge,
)
from theory.models import (
    FixedPoint,
    FixedPointReport,
    IsiPrediction,
    MeanFieldParams,
    MeanFieldTrace,
    MomentTrace,
    WeightModel,
)

logger = logging.getLogger(__name__)

# ==================== 数值常量 ====================

PROBABILITY_TOLERANCE = 1e-9
SURVIVAL_FLOOR = 1e-15
LOG_SURVIVAL_FLOOR = math.log(SURVIVAL_FLOOR)
CONVERGENCE_TOLERANCE = 1e-10
CONVERGENCE_WINDOW = 5
PGF_MAX_STEP = 20
FIXED_POINT_GRID = 10_000
ROOT_TOLERANCE = 1e-12
DEATH_SNAP = 1e-12


class NumericalBreakdownError(ArithmeticError):
    """概率超出 [0, 1] 或不是有限值"""


class DeathRegimeError(ValueError):
    """只存在神经死亡不动点"""


class RecursionCapError(ValueError):
    """概率母函数递推超过步数上限"""


def _check_probability(values: np.ndarray, what: str) -> np.ndarray:
    if (not np.all(np.isfinite(values)) or np.any(values < -PROBABILITY_TOLERANCE)
            or np.any(values > 1.0 + PROBABILITY_TOLERANCE)):
        raise NumericalBreakdownError(
            f"{what} 超出 [0, 1]: min={values.min():.3e}, max={values.max():.3e}")
    return np.clip(values, 0.0, 1.0)


# ==================== 一般递推 ====================

def start_trace(params: MeanFieldParams) -> MeanFieldTrace:
    """初始轨迹：x_0 = params.x0，尚无任何分支"""
    return MeanFieldTrace(params=params, x=[float(params.x0)], survival=[{}])


def step_general(trace: MeanFieldTrace, params: MeanFieldParams) -> MeanFieldTrace:
    """
    推进一步，追加 x_{t+1} = sum_k x_hat_k P(k, t+1)

    x_hat_0 = 1（t = 0 时所有神经元电位为 0），x_hat_k = x_k。
    生存乘积低于 1e-15 的分支被截断。
    """
    model = params.model
    t = trace.t
    x_t = trace.x[t]
    branches = trace.branches

    # 已有分支接收本步电荷
    if params.uses_split_gaussian:
        _, effective, shift = clamped_charge(params.gamma * branches.charge, x_t, params.v_min, model)
        branches.charge = np.asarray(effective, dtype=float)
        branches.shift = np.asarray(shift, dtype=float)
    else:
        branches.charge = params.gamma_eff * branches.charge + x_t

    # 新分支：在 t 时刻发放（或 t = 0 时全体）的神经元
    branches.append(t, 1.0 if t == 0 else x_t, x_t)

    if params.uses_split_gaussian:
        fire = charge_tail(model.charge_scale * branches.charge, model, branches.shift)
    else:
        fire = np.asarray(charge_probability(branches.charge, model), dtype=float)
    fire = _check_probability(fire, f"t={t + 1} 发放概率")

    prob = fire * np.exp(branches.log_survival)
    x_next = float(np.dot(branches.weight, prob))
    x_next = float(_check_probability(np.asarray([x_next]), f"x_{t + 1}")[0])

    trace.survival.append({
        int(k): (float(u), float(p)) for k, u, p in zip(branches.k, branches.charge, prob)
    })
    trace.x.append(x_next)

    with np.errstate(divide="ignore"):
        branches.log_survival = branches.log_survival + np.log1p(-fire)
    branches.keep(branches.log_survival >= LOG_SURVIVAL_FLOOR)

    logger.debug(f"t={t + 1} x={x_next:.12g} 活跃分支={len(branches)}")
    return trace


def _find_convergence(x: List[float]) -> Optional[int]:
    """第一个满足连续 5 步 |x_{t+1} - x_t| < 1e-10 的 t"""
    diffs = np.abs(np.diff(np.asarray(x, dtype=float)))
    small = diffs < CONVERGENCE_TOLERANCE
    for t in range(len(small) - CONVERGENCE_WINDOW + 1):
        if small[t:t + CONVERGENCE_WINDOW].all():
            return t
    return None


def run_meanfield(params: MeanFieldParams) -> MeanFieldTrace:
    """迭代至时间范围 T，并检测收敛"""
    trace = start_trace(params)
    for _ in range(params.horizon):
        step_general(trace, params)
    trace.converged_at = _find_convergence(trace.x)
    logger.debug(
        f"平均场完成: phi={params.model.phi} gamma={params.gamma} "
        f"mode={params.vmin_mode.value} x_T={trace.x[-1]:.6g} 收敛于 {trace.converged_at}")
    return trace


def step_simple(x: float, model: WeightModel) -> float:
    """gamma = 0 的简化递推 x_t = p(x_{t-1})"""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x 必须在 [0, 1] 内，收到 {x}")
    return float(charge_probability(x, model))


def window_frequency(x, start: int, stop: Optional[int] = None) -> float:
    """时间窗口 [start, stop] 上的平均活动，即网络平均频率"""
    values = np.asarray(x, dtype=float)
    stop = len(values) - 1 if stop is None else stop
    if not 0 <= start <= stop < len(values):
        raise ValueError(f"无效的时间窗口 [{start}, {stop}]，共 {len(values)} 个时刻")
    return float(values[start:stop + 1].mean())


# ==================== 矩与概率母函数 ====================

def moments(params: MeanFieldParams, N: int, trace: Optional[MeanFieldTrace] = None) -> MomentTrace:
    """
    E(X_t) = N x_t；Var(X_t) 由第二 Wald 恒等式递推

    Var(X_t) = sum_k [E(X_hat_k) P(k,t)(1 - P(k,t)) + Var(X_hat_k) P(k,t)^2]
    其中 E(X_hat_0) = N，Var(X_hat_0) = 0。
    t = 0 处的方差为随机刺激的二项方差 N x0 (1 - x0)。
    """
    if N < 1:
        raise ValueError(f"N 必须 >= 1，收到 {N}")
    if trace is None:
        trace = run_meanfield(params)
    expectation = [N * x for x in trace.x]
    variance = [N * params.x0 * (1.0 - params.x0)]
    for t in range(1, len(trace.x)):
        total = 0.0
        for k, (_, prob) in trace.survival[t].items():
            mean_hat = N if k == 0 else expectation[k]
            var_hat = 0.0 if k == 0 else variance[k]
            total += mean_hat * prob * (1.0 - prob) + var_hat * prob ** 2
        variance.append(max(total, 0.0))
    return MomentTrace(expectation=expectation, variance=variance, N=N)


def pgf_eval(t: int, s: float, params: MeanFieldParams, N: int,
             trace: Optional[MeanFieldTrace] = None) -> float:
    """
    概率母函数 G_{X_t}(s) 的递归求值

    G_{X_t}(s) = prod_k G_{X_hat_k}(P(k,t) s + 1 - P(k,t))，G_{X_hat_0}(s) = s^N。
    递归树随 t 指数增长，因此 t 上限为 20。
    """
    if t > PGF_MAX_STEP:
        raise RecursionCapError(f"t={t} 超过概率母函数递推上限 {PGF_MAX_STEP}")
    if t < 0:
        raise ValueError(f"t 必须 >= 0，收到 {t}")
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s 必须在 [0, 1] 内，收到 {s}")
    if trace is None or trace.t < t:
        trace = run_meanfield(MeanFieldParams(
            model=params.model, gamma=params.gamma, x0=params.x0,
            vmin_mode=params.vmin_mode, horizon=max(t, 1), v_min=params.v_min))

    def generating(step: int, arg: float) -> float:
        result = 1.0
        for k, (_, prob) in trace.survival[step].items():
            inner = 1.0 - prob * (1.0 - arg)
            result *= inner ** N if k == 0 else generating(k, inner)
        return result

    if t == 0:
        return (1.0 - params.x0 * (1.0 - s)) ** N
    return generating(t, s)


# ==================== 不动点分析 ====================

def death_threshold(theta: float) -> float:
    """phi 低于 (2e/3)^{3/4} pi^{1/4} theta 时只存在死亡不动点"""
    if not theta > 0:
        raise ValueError(f"theta 必须 > 0，收到 {theta}")
    return (2.0 * math.e / 3.0) ** 0.75 * math.pi ** 0.25 * theta


def fixed_points_simple(model: WeightModel) -> FixedPointReport:
    """
    gamma = 0 映射 x -> p(x) 的全部不动点

    在 (0, 1] 上 10^4 点网格寻找 h(x) = p(x) - x 的变号区间，
    brentq 细化到 |h| < 1e-12，以 p'(x*) < 1 判定稳定性。
    """
    if model.mu != 0:
        raise ValueError("不动点枚举只适用于 mu = 0，非零均值请使用 asymptote()")

    def h(x: float) -> float:
        return float(charge_probability(x, model)) - x

    grid = np.linspace(1.0 / FIXED_POINT_GRID, 1.0, FIXED_POINT_GRID)
    values = np.asarray(charge_probability(grid, model)) - grid

    roots = []
    for i in range(len(grid) - 1):
        if values[i] == 0.0:
            roots.append(float(grid[i]))
        elif values[i] * values[i + 1] < 0:
            roots.append(optimize.brentq(h, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if values[-1] == 0.0:
        roots.append(float(grid[-1]))

    fixed_points = [FixedPoint(x=0.0, stable=True)]
    for root in roots:
        if abs(h(root)) >= ROOT_TOLERANCE:
            logger.warning(f"不动点 {root:.12g} 残差 {h(root):.3e} 未达到 {ROOT_TOLERANCE}")
        fixed_points.append(FixedPoint(x=root, stable=bool(charge_probability_deriv(root, model) < 1.0)))

    report = FixedPointReport(fixed_points=fixed_points, death_only=not roots)
    stable = report.stable_nonzero
    report.predicted_network_frequency = float(charge_probability(stable, model)) if stable else 0.0
    logger.debug(f"phi={model.phi} 不动点: {[(fp.x, fp.stable) for fp in fixed_points]}")
    return report


def asymptote(params: MeanFieldParams, trace: Optional[MeanFieldTrace] = None) -> FixedPointReport:
    """前向迭代得到渐近值 x*（适用于 gamma > 0 或 mu != 0）"""
    if trace is None:
        trace = run_meanfield(params)
    x_star = trace.x[-1]
    if x_star < DEATH_SNAP:
        x_star = 0.0
    if trace.converged_at is None:
        logger.info(f"phi={params.model.phi} gamma={params.gamma} 在 T={params.horizon} 内未收敛")
    return FixedPointReport(
        fixed_points=[FixedPoint(x=x_star, stable=True)],
        death_only=x_star == 0.0,
        asymptote=x_star,
        predicted_network_frequency=float(charge_probability(x_star, params.model)),
    )


def predict_isi(report: FixedPointReport, model: WeightModel) -> IsiPrediction:
    """
    稳态 ISI 服从参数为 p(x*) 的几何分布，网络频率 f* = p(x*)

    gamma > 0 时应有 p(x*) <= x*，违反时仅记录警告。
    """
    x_star = report.asymptote if report.asymptote else report.stable_nonzero
    if not x_star:
        raise DeathRegimeError("只存在神经死亡不动点，ISI 无定义")
    param = float(charge_probability(x_star, model))
    if param > x_star + PROBABILITY_TOLERANCE:
        logger.warning(f"p(x*)={param:.6g} > x*={x_star:.6g}，启发式不等式不成立")
    return IsiPrediction(x_star=x_star, geometric_param=param, network_frequency=param)


def geometric_isi_pmf(param: float, max_isi: int) -> np.ndarray:
    """Geometric(param) 在 1..max_isi 上的概率"""
    if max_isi < 1:
        raise ValueError(f"max_isi 必须 >= 1，收到 {max_isi}")
    return stats.geom.pmf(np.arange(1, max_isi + 1), param)
