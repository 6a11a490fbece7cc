# -*- coding: utf-8 -*-
"""
电荷概率函数
Scalar probability functions built on the Gaussian tail

所有电荷参数都以群体比例为单位 (x = E(X)/N)，
因此 sigma * sqrt(个数) = phi * sqrt(比例)。这一换算只在本模块出现。
函数同时接受标量与 numpy 数组，标量输入返回 float。
"""

import math
from typing import Tuple, Union

import numpy as np
from scipy import special

from theory.models import WeightModel

ArrayLike = Union[float, np.ndarray]

SQRT2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)


def _output(value) -> ArrayLike:
    """0 维结果转换为 float"""
    if np.ndim(value) == 0:
        return float(value)
    return value


def _check_charge(y: ArrayLike, name: str = "y") -> np.ndarray:
    """电荷参数必须 >= 0"""
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0):
        raise ValueError(f"{name} 必须 >= 0，收到 {y}")
    return arr


# ==================== 高斯尾部 ====================

def gaussian_tail(z: ArrayLike) -> ArrayLike:
    """
    标准正态上尾概率 (1/sqrt(2pi)) * int_z^inf exp(-x^2/2) dx

    使用 erfc 计算，z 很大时下溢为 0，z 很小时为 1。
    """
    z = np.asarray(z, dtype=float)
    return _output(0.5 * special.erfc(z / SQRT2))


def charge_tail(y: np.ndarray, model: WeightModel, shift: ArrayLike = 0.0) -> np.ndarray:
    """
    电荷 y 对应的电位 Normal(shift + mu*y, phi^2*y) 超过阈值的概率

    y = 0 时概率为 0（theta > 0 且 shift <= 0）；
    phi = 0 时退化为阶跃函数 0 / 1/2 / 1。
    """
    mean = shift + model.mu * y
    if model.phi == 0:
        step = np.where(mean > model.theta, 1.0, np.where(mean == model.theta, 0.5, 0.0))
        return np.where(y > 0, step, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (model.theta - mean) / (np.sqrt(y) * model.phi)
    z = np.where(y > 0, z, np.inf)
    return 0.5 * special.erfc(z / SQRT2)


# ==================== 发放概率 ====================

def p_phi(y: ArrayLike, model: WeightModel) -> ArrayLike:
    """
    中心化权重下的发放概率 p_phi(y)

    等于 gaussian_tail(theta / (sqrt(y) * phi))，忽略 model.mu。
    y = 0 或 phi = 0 时为 0。
    """
    y = _check_charge(y)
    if model.phi == 0:
        return _output(np.zeros_like(y))
    with np.errstate(divide="ignore"):
        z = model.theta / (np.sqrt(y) * model.phi)
    return _output(0.5 * special.erfc(z / SQRT2))


def p_phi_mu(y: ArrayLike, model: WeightModel) -> ArrayLike:
    """非零均值下的发放概率 p_{phi,mu}(y)"""
    y = _check_charge(y)
    return _output(charge_tail(y, model))


def p_sparse(y: ArrayLike, model: WeightModel) -> ArrayLike:
    """稀疏连接下的发放概率：p_{phi,mu}((1 - p) * y)"""
    y = _check_charge(y)
    return _output(charge_tail(model.charge_scale * y, model))


def charge_probability(y: ArrayLike, model: WeightModel) -> ArrayLike:
    """
    按权重模型选择的发放概率

    p_sparse 在 sparsity_p = 0 时等于 p_phi_mu，mu = 0 时等于 p_phi，
    递推和不动点分析统一使用此函数。
    """
    return p_sparse(y, model)


# ==================== 导数与死亡阈值 ====================

def p_phi_deriv(y: ArrayLike, model: WeightModel) -> ArrayLike:
    """
    p_phi 的解析导数

    p'(y) = theta / (2 sqrt(2pi) phi y^{3/2}) * exp(-theta^2 / (2 y phi^2))
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError(f"y 必须 > 0，收到 {y}")
    if model.phi == 0:
        raise ValueError("phi = 0 时 p_phi 恒为 0，导数无意义")
    theta, phi = model.theta, model.phi
    value = theta / (2.0 * SQRT_2PI * phi * y ** 1.5) * np.exp(-theta ** 2 / (2.0 * y * phi ** 2))
    return _output(value)


def charge_probability_deriv(y: ArrayLike, model: WeightModel) -> ArrayLike:
    """charge_probability 的导数（仅中心化权重）：(1 - p) * p'_phi((1 - p) y)"""
    if model.mu != 0:
        raise ValueError("仅支持 mu = 0 的导数")
    scale = model.charge_scale
    return _output(scale * np.asarray(p_phi_deriv(scale * np.asarray(y, dtype=float), model)))


def deriv_peak(model: WeightModel) -> float:
    """
    p'_phi 在 (0, inf) 上取最大值的位置

    在 z = 1/y 变量下最大值位于 z = 3 / (2 tau^2)，tau = theta / (sqrt(2) phi)，
    即 y = theta^2 / (3 phi^2)。
    """
    if model.phi == 0:
        raise ValueError("phi = 0 时导数无意义")
    tau = model.theta / (SQRT2 * model.phi)
    return 1.0 / (3.0 / (2.0 * tau ** 2))


# ==================== 电位下限 ====================

def clamped_charge(prior_charge: ArrayLike, new_charge: ArrayLike, v_min: float,
                   model: WeightModel) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
    """
    分裂高斯近似

    Returns:
        (p_clamp, 等效电荷 (1-p)C + x, 均值偏移 p * v_min)
        p_clamp = P(Normal(0, phi^2 (1-s) C) < v_min)，v_min = 0 时为 1/2
    """
    if v_min > 0:
        raise ValueError(f"v_min 必须 <= 0，收到 {v_min}")
    prior = _check_charge(prior_charge, "C")
    new = _check_charge(new_charge, "x")
    if v_min == 0:
        p_clamp = np.full(np.broadcast(prior, new).shape, 0.5)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            z = -v_min / (model.phi * np.sqrt(model.charge_scale * prior))
        p_clamp = 0.5 * special.erfc(z / SQRT2)
    effective = (1.0 - p_clamp) * prior + new
    # p_clamp = 0 时不偏移（v_min = -inf 时 0 * v_min 无定义）
    with np.errstate(invalid="ignore"):
        shift = np.where(p_clamp > 0, p_clamp * v_min, 0.0)
    return _output(p_clamp), _output(effective), _output(shift)


def charge_prob_vmin(prior_charge: ArrayLike, new_charge: ArrayLike, v_min: float,
                     model: WeightModel) -> ArrayLike:
    """
    带电位下限的发放概率

    先前电荷 C 的电位低于 v_min 的概率为 p，结果电位近似服从
    Normal(p * v_min, ((1-p) C + x) sigma^2)。v_min = 0 时 p = 1/2，
    结果恰为 p_sparse(C/2 + x)。
    """
    if v_min > 0:
        raise ValueError(f"v_min 必须 <= 0，收到 {v_min}")
    if v_min == 0:
        prior = _check_charge(prior_charge, "C")
        new = _check_charge(new_charge, "x")
        return p_sparse(prior / 2.0 + new, model)
    _, effective, shift = clamped_charge(prior_charge, new_charge, v_min, model)
    effective = np.asarray(effective, dtype=float)
    return _output(charge_tail(model.charge_scale * effective, model, shift))
