# -*- coding: utf-8 -*-
"""
命令行入口
Command-line entry point

    python start_experiment.py predict --phi 2.5,3,5 --gamma 0
    python start_experiment.py simulate --config config.json --runs 20 --raster raster.txt
    python start_experiment.py compare --set phi=5 --set gamma=1 -o compare.csv
    python start_experiment.py fixed-point --phi 2,2.5

负数参数请使用 `--v-min=-inf` 的写法。
退出码：0 成功，2 配置错误，1 其他错误。
"""

import argparse
import logging
import platform
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from engine.config_parser import CONVERTERS, ConfigError, ExperimentConfig, load_config, parse_assignments
from engine.experiment import cmd_compare, cmd_fixed_point, cmd_predict, cmd_simulate, emit
from version import AUTHOR, PROJECT_NAME, VERSION

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def setup_logging(log_dir=None, verbose: bool = False) -> Optional[Path]:
    """配置日志系统：控制台输出到 stderr + 可选文件记录"""
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)
    root.handlers.clear()

    formatter = logging.Formatter(
        fmt='[%(asctime)s] [%(levelname)s] %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    # 标准输出留给 CSV
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    console_handler.setFormatter(formatter)
    root.addHandler(console_handler)

    if log_dir is None:
        return None

    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_file = log_dir / f"experiment_{timestamp}.log"

    file_handler = logging.FileHandler(log_file, encoding='utf-8')
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)
    root.addHandler(file_handler)
    return log_file


# 单项参数的帮助文本
CONFIG_HELP = {
    "N": "神经元个数",
    "theta": "发放阈值",
    "gamma": "漏电保留率 [0, 1]，可为逗号分隔的列表",
    "phi": "权重离散度，权重标准差为 phi/sqrt(N)，可为逗号分隔的列表",
    "mu": "权重均值尺度，权重均值为 mu/N",
    "sparsity_p": "稀疏度：每个权重为0的概率（0 表示全连接）",
    "x0": "t = 0 时被刺激的神经元比例",
    "v_min": "电位下限 (<= 0)，-inf 表示不设下限，请写成 --v-min=-inf",
    "T": "时间步数",
    "runs": "集合中的网络个数",
    "seed": "随机种子 (64 位非负整数)",
    "window_start": "稳态窗口起点",
    "workers": "进程数，0 表示全部 CPU",
    "annealed": "true 时每步重新抽取权重",
    "self_connections": "false 时去掉自连接",
}


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="配置文件（.json 或 key=value 文本）")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="覆盖单个配置项，可重复")
    common.add_argument("-o", "--output", dest="output_path", help="输出文件，默认标准输出")
    common.add_argument("--log-dir", help="日志目录")
    common.add_argument("-v", "--verbose", action="store_true", help="输出 DEBUG 日志")
    for key in CONVERTERS:
        if key == "output_path":
            continue
        common.add_argument(_flag(key), dest=key, metavar=key.upper(), default=None, help=CONFIG_HELP[key])

    parser = argparse.ArgumentParser(
        prog="start_experiment.py",
        description=f"{PROJECT_NAME} - 随机 LIF 网络的平均场预测与模拟",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("predict", parents=[common], help="平均场预测 x_t")
    simulate = subparsers.add_parser("simulate", parents=[common], help="网络集合模拟")
    simulate.add_argument("--raster", help="写出第 0 个网络的发放时刻")
    simulate.add_argument("--counts", help="写出第 0 个网络每步的发放数 (t, X_t)")
    subparsers.add_parser("compare", parents=[common], help="预测与模拟对比")
    subparsers.add_parser("fixed-point", parents=[common], help="不动点与死亡阈值")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """配置文件 <- --set <- 单项参数"""
    overrides = parse_assignments(args.set)
    for key in CONVERTERS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, overrides)


def log_run_header(config: ExperimentConfig, command: str, log_file: Optional[Path]):
    logger.info("=" * 60)
    logger.info(f"{PROJECT_NAME}")
    logger.info(f"版本: {VERSION}  作者: {AUTHOR}")
    logger.info("=" * 60)
    logger.info("[系统信息]")
    logger.info(f"  操作系统: {platform.system()} {platform.release()}")
    logger.info(f"  Python: {platform.python_version()}")
    logger.info(f"  numpy: {np.__version__}  scipy: {scipy.__version__}")
    logger.info("-" * 60)
    logger.info("[运行配置]")
    logger.info(f"  命令: {command}")
    if log_file:
        logger.info(f"  日志文件: {log_file}")
    for line in config.header_lines():
        logger.info(f"  {line[2:]}")
    logger.info("=" * 60)


def run_command(command: str, config: ExperimentConfig, args: argparse.Namespace) -> str:
    if command == "predict":
        return cmd_predict(config)
    if command == "simulate":
        return cmd_simulate(config, raster_path=args.raster, counts_path=args.counts)
    if command == "compare":
        return cmd_compare(config)
    return cmd_fixed_point(config)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """主函数，返回退出码"""
    args = build_parser().parse_args(argv)
    log_file = setup_logging(args.log_dir, args.verbose)

    try:
        config = resolve_config(args)
        log_run_header(config, args.command, log_file)
        emit(run_command(args.command, config, args), config)
    except (ConfigError, ValueError) as e:
        message = " ".join(str(e).split())
        sys.stderr.write(f"错误: {message}\n")
        return EXIT_CONFIG_ERROR
    except KeyboardInterrupt:
        logger.info("收到停止信号")
        return EXIT_FAILURE
    except Exception:
        logger.exception("运行失败")
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
