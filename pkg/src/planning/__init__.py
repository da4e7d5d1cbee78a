"""
Planning Module - 精确动态规划
负责联合 MDP 枚举、有限期值迭代与精确策略评估
"""

from .value_iteration import (
    ExactPolicy,
    ExactSolution,
    FlatMDP,
    StateSpaceTooLargeError,
    enumerate_joint,
    evaluate_policy_exact,
    export_solution,
    value_iteration_finite,
)

__all__ = [
    "ExactPolicy",
    "ExactSolution",
    "FlatMDP",
    "StateSpaceTooLargeError",
    "enumerate_joint",
    "evaluate_policy_exact",
    "export_solution",
    "value_iteration_finite",
]
