#!/usr/bin/env python3
"""
Command Line Interface - 命令行入口

功能：
1. exact：求解精确解并导出
2. train：训练配置中的智能体，写出学习曲线与检查点
3. eval：评估全部已配置策略（智能体读取 train 生成的检查点）
4. optimize-baselines：基准策略网格优化
5. agreement：智能体与精确贪婪策略的动作一致率
6. run：按配置执行完整实验

用法：python -m src.harness.cli <subcommand> --config PATH [--seed N] [--out DIR] [--episodes N]
"""

import argparse
import os
import sys

from dotenv import load_dotenv
from loguru import logger

from .experiment import ExperimentConfig, run_experiment

# 加载环境变量
load_dotenv()

SUBCOMMAND_STAGES = {
    "exact": {"exact"},
    "train": {"train"},
    "eval": {"eval"},
    "optimize-baselines": {"baselines"},
    "agreement": {"agreement"},
    "run": None,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="多构件劣化系统寿命周期维修规划（深度强化学习）")
    parser.add_argument("subcommand", choices=sorted(SUBCOMMAND_STAGES), help="要执行的子命令")
    parser.add_argument("--config", type=str, required=True, help="实验配置 JSON 文件路径")
    parser.add_argument("--seed", type=int, default=None, help="覆盖主种子")
    parser.add_argument("--out", type=str, default=None, help="覆盖输出目录")
    parser.add_argument("--episodes", type=int, default=None, help="覆盖训练回合数")
    return parser


def main(argv=None) -> int:
    """主函数"""
    args = build_parser().parse_args(argv)

    # 配置日志
    logger.add(
        f"logs/{args.subcommand}_{{time}}.log",
        rotation="1 day",
        retention="7 days",
        level=os.getenv("LOG_LEVEL", "DEBUG"),
    )

    try:
        config = ExperimentConfig.from_file(args.config, seed=args.seed, output_dir=args.out,
                                            episodes=args.episodes)
        out = run_experiment(config, SUBCOMMAND_STAGES[args.subcommand])
        print(f"\n{args.subcommand} completed: {out}")
        return 0
    except Exception as e:
        logger.exception(f"{args.subcommand} 失败: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
