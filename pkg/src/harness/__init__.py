"""
Harness Module - 实验编排与命令行
负责实验配置、阶段编排、CSV 导出与命令行入口
"""

from .experiment import ExperimentConfig, derive_seed, run_experiment, training_config
from .export import format_float, write_csv

__all__ = [
    "ExperimentConfig",
    "derive_seed",
    "run_experiment",
    "training_config",
    "format_float",
    "write_csv",
]
