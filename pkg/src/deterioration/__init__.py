"""
Deterioration Module - 伽马过程劣化模型
负责截面损失标定、增量抽样与离散转移矩阵估计
"""

from .gamma_process import (
    DiscretizedDeterioration,
    GammaProcessModel,
    analytic_fresh_row,
    build_deterioration,
    calibrate,
    chain_moments,
    estimate_transition_matrices,
    sample_increment,
)

__all__ = [
    "DiscretizedDeterioration",
    "GammaProcessModel",
    "analytic_fresh_row",
    "build_deterioration",
    "calibrate",
    "chain_moments",
    "estimate_transition_matrices",
    "sample_increment",
]
