"""
Evaluation Module - 策略评估
负责蒙特卡洛评估、置信区间、动作一致率与轨迹记录
"""

from .evaluator import (
    EvaluationReport,
    action_agreement,
    collect_traces,
    confidence_half_width,
    episode_seed,
    evaluate_policy,
    rollout,
)

__all__ = [
    "EvaluationReport",
    "action_agreement",
    "collect_traces",
    "confidence_half_width",
    "episode_seed",
    "evaluate_policy",
    "rollout",
]
