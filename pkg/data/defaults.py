# -*- coding: utf-8 -*-
"""
实验默认常量
Experiment constants shared by the analysis layer, the CLI and the tests
"""

# ==================== 网络与时间 ====================

DEFAULT_N = 1000
DEFAULT_T = 50
DEFAULT_X0 = 0.15
DEFAULT_RUNS = 100
DEFAULT_SEED = 20240601

# 稳态窗口：ISI 统计从 t = 20 开始，渐近值取最后 20 步
STEADY_STATE_START = 20
ASYMPTOTE_WINDOW = 20

# ==================== 参数网格 ====================

# gamma = 0 渐近值扫描
ASYMPTOTE_PHI_GRID = (2.5, 3.0, 3.5, 4.0, 5.0)

# 平均场预测已知失效的 phi 区间（开区间）
FAILURE_BAND = (1.5, 2.0)

# ==================== 近似检验 ====================

RANDOM_SUM_DRAWS = 100_000
RANDOM_SUM_N_LIST = (10, 100, 1000)
