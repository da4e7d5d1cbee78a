"""
Agents Module - 深度强化学习智能体
负责经验回放、DDQN、DCMAC 与训练循环
"""

from .dcmac import DcmacAgent, dcmac_actor_update, dcmac_advantage, dcmac_critic_update, importance_weight
from .ddqn import DdqnAgent, ddqn_target, ddqn_update, select_action_ddqn
from .replay import Batch, ExplorationSchedule, ReplayBuffer, TransitionRecord
from .trainer import CurvePoint, ShapingConfig, ShapingPenalty, TrainingConfig, TrainingDivergenceError, train

__all__ = [
    "DcmacAgent",
    "dcmac_actor_update",
    "dcmac_advantage",
    "dcmac_critic_update",
    "importance_weight",
    "DdqnAgent",
    "ddqn_target",
    "ddqn_update",
    "select_action_ddqn",
    "Batch",
    "ExplorationSchedule",
    "ReplayBuffer",
    "TransitionRecord",
    "CurvePoint",
    "ShapingConfig",
    "ShapingPenalty",
    "TrainingConfig",
    "TrainingDivergenceError",
    "train",
]
