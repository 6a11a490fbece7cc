# -*- coding: utf-8 -*-
"""
实验配置解析器
Experiment Config Parser

来源优先级（低到高）：默认值 -> 配置文件（.json 或 key=value 文本）-> 命令行参数。
每个输出文件的 `# key=value` 头部可以原样解析回同一配置。
"""

import json
import math
import re
from dataclasses import dataclass, fields
from itertools import product
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

from data.defaults import DEFAULT_N, DEFAULT_RUNS, DEFAULT_SEED, DEFAULT_T, DEFAULT_X0, STEADY_STATE_START
from simulation.network_simulator import SimConfig
from theory.models import WeightModel


# 全角标点到半角标点的映射表
FULLWIDTH_TO_HALFWIDTH = {
    '，': ',',  # 逗号
    '：': ':',  # 冒号
    '＝': '=',  # 等号
    '；': ';',  # 分号
    '＃': '#',  # 井号
    '－': '-',  # 减号
    '＋': '+',  # 加号
    '．': '.',  # 句点
    '　': ' ',  # 全角空格
}


def normalize_punctuation(text: str) -> str:
    """将全角标点符号转换为半角标点符号"""
    for fullwidth, halfwidth in FULLWIDTH_TO_HALFWIDTH.items():
        text = text.replace(fullwidth, halfwidth)
    return text


class ConfigError(ValueError):
    """配置无效"""


# 行模式定义
PATTERNS = {
    'blank': r'^\s*$',
    'comment': r'^\s*#',
    'assignment': r'^\s*([A-Za-z_][A-Za-z0-9_]*)\s*[=:]\s*(.*?)\s*$',
}

TRUE_WORDS = {'true', 'yes', 'on', '1'}
FALSE_WORDS = {'false', 'no', 'off', '0'}


def _parse_bool(text: str) -> bool:
    word = text.strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ValueError(f"无法识别的布尔值 '{text}'")


def _parse_float(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise ValueError("不允许 NaN")
    return value


def _parse_grid(text) -> Tuple[float, ...]:
    """逗号分隔的数值列表"""
    if isinstance(text, (list, tuple)):
        items = list(text)
    elif isinstance(text, (int, float)):
        items = [text]
    else:
        items = [item for item in re.split(r'[,;\s]+', str(text).strip()) if item]
    if not items:
        raise ValueError("列表不能为空")
    return tuple(_parse_float(str(item)) for item in items)


def _parse_optional_path(text) -> Optional[str]:
    if text is None:
        return None
    text = str(text).strip()
    return text if text and text.lower() != 'none' else None


@dataclass(frozen=True)
class ExperimentConfig:
    """一份扁平的实验配置"""
    N: int = DEFAULT_N
    theta: float = 1.0
    gamma: Tuple[float, ...] = (0.0,)
    phi: Tuple[float, ...] = (5.0,)
    mu: float = 0.0
    sparsity_p: float = 0.0
    x0: float = DEFAULT_X0
    v_min: float = 0.0
    T: int = DEFAULT_T
    runs: int = DEFAULT_RUNS
    seed: int = DEFAULT_SEED
    output_path: Optional[str] = None
    window_start: int = STEADY_STATE_START
    workers: int = 0          # 0 表示使用全部 CPU
    annealed: bool = False
    self_connections: bool = True

    def __post_init__(self):
        if not self.phi or not self.gamma:
            raise ConfigError("phi 与 gamma 不能为空")
        if self.runs < 1:
            raise ConfigError(f"runs 必须 >= 1，当前为 {self.runs}")
        if self.workers < 0:
            raise ConfigError(f"workers 必须 >= 0，当前为 {self.workers}")
        if not 0 <= self.window_start <= self.T:
            raise ConfigError(f"window_start 必须在 [0, T={self.T}] 内，当前为 {self.window_start}")
        # 与 SimConfig / WeightModel 使用同一套范围检查
        try:
            for phi, gamma in self.cells():
                self.sim_config(phi, gamma)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def cells(self) -> List[Tuple[float, float]]:
        """扫描单元 (phi, gamma)，gamma 为外层"""
        return [(phi, gamma) for gamma, phi in product(self.gamma, self.phi)]

    @property
    def is_grid(self) -> bool:
        return len(self.phi) * len(self.gamma) > 1

    def weight_model(self, phi: float) -> WeightModel:
        return WeightModel(phi=phi, mu=self.mu, sparsity_p=self.sparsity_p, theta=self.theta)

    def sim_config(self, phi: Optional[float] = None, gamma: Optional[float] = None) -> SimConfig:
        """某个单元的仿真配置，默认取第一个单元"""
        phi = self.phi[0] if phi is None else phi
        gamma = self.gamma[0] if gamma is None else gamma
        return SimConfig(
            N=self.N,
            model=self.weight_model(phi),
            gamma=gamma,
            x0=self.x0,
            v_min=self.v_min,
            T=self.T,
            seed=self.seed,
            self_connections=self.self_connections,
            annealed=self.annealed,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def header_lines(self) -> List[str]:
        """`# key=value` 形式的完整配置"""
        return [f"# {key}={format_value(value)}" for key, value in self.to_dict().items()]


# 每个键的解析函数
CONVERTERS = {
    'N': int,
    'theta': _parse_float,
    'gamma': _parse_grid,
    'phi': _parse_grid,
    'mu': _parse_float,
    'sparsity_p': _parse_float,
    'x0': _parse_float,
    'v_min': _parse_float,
    'T': int,
    'runs': int,
    'seed': int,
    'output_path': _parse_optional_path,
    'window_start': int,
    'workers': int,
    'annealed': _parse_bool,
    'self_connections': _parse_bool,
}


def format_value(value) -> str:
    """配置值的文本形式，可由 CONVERTERS 解析回原值"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(item)) for item in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def convert_values(raw: Dict[str, Any]) -> Dict[str, Any]:
    """按键转换原始值，拒绝未知键"""
    unknown = sorted(set(raw) - set(CONVERTERS))
    if unknown:
        raise ConfigError(f"未知配置项: {', '.join(unknown)}")
    converted = {}
    for key, value in raw.items():
        try:
            if isinstance(value, str) or CONVERTERS[key] in (_parse_grid, _parse_optional_path):
                converted[key] = CONVERTERS[key](value)
            elif CONVERTERS[key] is _parse_bool and isinstance(value, bool):
                converted[key] = value
            else:
                converted[key] = CONVERTERS[key](str(value))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"配置项 {key}={value!r} 无效: {e}") from e
    return converted


def parse_config_text(text: str, header: bool = False) -> Dict[str, Any]:
    """
    解析 key=value 文本

    Args:
        text: 配置文本，先做全角标点归一化
        header: True 时只解析 `# key=value` 注释行（输出文件头部），其余行忽略

    Returns:
        已转换的配置项
    """
    raw = {}
    for number, line in enumerate(normalize_punctuation(text).splitlines(), start=1):
        if re.match(PATTERNS['blank'], line):
            continue
        is_comment = re.match(PATTERNS['comment'], line) is not None
        if header != is_comment:
            continue
        if header:
            line = line.split('#', 1)[1]
        match = re.match(PATTERNS['assignment'], line)
        if not match:
            if header:
                continue
            raise ConfigError(f"第 {number} 行无法解析: {line.strip()}")
        raw[match.group(1)] = match.group(2)
    return convert_values(raw)


def _flatten_sections(document: Dict[str, Any]) -> Dict[str, Any]:
    """JSON 配置可以按节分组，嵌套字典展开为同一层"""
    flat = {}
    for key, value in document.items():
        if isinstance(value, dict):
            flat.update(_flatten_sections(value))
        else:
            flat[key] = value
    return flat


def read_config_file(path) -> Dict[str, Any]:
    """读取配置文件（.json 或 key=value 文本）"""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except FileNotFoundError:
        raise ConfigError(f"配置文件 {path} 不存在") from None
    if path.suffix.lower() == '.json':
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"配置文件 {path} 不是有效的 JSON: {e}") from e
        if not isinstance(document, dict):
            raise ConfigError(f"配置文件 {path} 顶层必须是对象")
        return convert_values(_flatten_sections(document))
    return parse_config_text(text)


def load_config(path=None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """默认值 <- 配置文件 <- overrides"""
    values = read_config_file(path) if path else {}
    if overrides:
        values.update(convert_values(overrides))
    return ExperimentConfig(**values)


def parse_assignments(items: Iterable[str]) -> Dict[str, str]:
    """命令行的 key=value 列表"""
    result = {}
    for item in items:
        match = re.match(PATTERNS['assignment'], normalize_punctuation(item))
        if not match:
            raise ConfigError(f"无法解析参数 '{item}'，应为 key=value")
        result[match.group(1)] = match.group(2)
    return result


def config_from_header(text: str) -> ExperimentConfig:
    """从输出文件的 `#` 头部恢复配置"""
    return ExperimentConfig(**parse_config_text(text, header=True))
