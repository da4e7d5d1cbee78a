"""
Baselines Module - 基准维修策略
负责 CBM / TCBM 状态映射策略、定期检测策略及其网格优化
"""

from .grid_search import (
    GridEntry,
    GridResult,
    format_params,
    grid_optimize,
    optimize_periodic_baselines,
    optimize_state_map_baselines,
)
from .threshold_policy import PeriodicLossPolicy, StateMapPolicy, cbm_i, cbm_ii, tcbm_i, tcbm_ii

__all__ = [
    "GridEntry",
    "GridResult",
    "format_params",
    "grid_optimize",
    "optimize_periodic_baselines",
    "optimize_state_map_baselines",
    "PeriodicLossPolicy",
    "StateMapPolicy",
    "cbm_i",
    "cbm_ii",
    "tcbm_i",
    "tcbm_ii",
]
