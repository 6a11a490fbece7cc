# -*- coding: utf-8 -*-
"""
版本信息
每次发布时更新
"""

VERSION = "20261018"
AUTHOR = "千石まよひ"
PROJECT_NAME = "随机 LIF 网络平均场预测器 (LIF Mean-Field)"
