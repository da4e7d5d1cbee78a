"""
Environment Module - 劣化系统环境
负责构件模型、系统模型、贝叶斯信念更新与回合仿真
"""

from .component import ActionEffect, ComponentModel, ObservationModel, effective_transition_matrix
from .config_loader import load_system
from .simulator import DecisionContext, MaintenanceEnv, Policy, TraceRow, episode_streams
from .system import (
    NO_OBSERVATION,
    BeliefState,
    ControlUnit,
    InconsistentObservationError,
    StepOutcome,
    SystemModel,
    SystemState,
    belief_update,
    encode_input,
    mode_penalty,
    observe,
    step,
)

__all__ = [
    "ActionEffect",
    "ComponentModel",
    "ObservationModel",
    "effective_transition_matrix",
    "load_system",
    "DecisionContext",
    "MaintenanceEnv",
    "Policy",
    "TraceRow",
    "episode_streams",
    "NO_OBSERVATION",
    "BeliefState",
    "ControlUnit",
    "InconsistentObservationError",
    "StepOutcome",
    "SystemModel",
    "SystemState",
    "belief_update",
    "encode_input",
    "mode_penalty",
    "observe",
    "step",
]
