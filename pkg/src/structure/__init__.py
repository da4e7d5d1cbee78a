"""
Structure Module - 结构代理模型
负责线弹性桁架求解与位移比惩罚
"""

from .truss import (
    LoadModel,
    StructuralCollapseError,
    TrussGeometry,
    TrussSurrogate,
    compute_reference_yield_displacement,
    displacement_ratio_penalty,
    solve_displacement,
)

__all__ = [
    "LoadModel",
    "StructuralCollapseError",
    "TrussGeometry",
    "TrussSurrogate",
    "compute_reference_yield_displacement",
    "displacement_ratio_penalty",
    "solve_displacement",
]
