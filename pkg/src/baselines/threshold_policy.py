#!/usr/bin/env python3
"""
Threshold Policies - 参数化基准维修策略

功能：
1. StateMapPolicy：损伤状态 → 动作映射（CBM），可附加劣化速率阈值 τ* 的覆盖规则（TCBM）
2. PeriodicLossPolicy：定期检测 + 信念平均截面损失阈值（大修 / 更换）+ 速率阈值（小修）
3. 各策略族的构造函数与默认参数网格

动作编号：0 不作为、1 小修、2 大修、3 更换；检测单元 0 不检测、1 检测。
部分可观测时，状态映射策略使用最近一次观测到的损伤状态，定期检测策略使用信念平均截面损失。
"""

import itertools
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..environment.simulator import DecisionContext, Policy
from ..environment.system import SystemModel

DO_NOTHING = 0
MINOR_REPAIR = 1
MAJOR_REPAIR = 2
REPLACE = 3

DEFAULT_RATE_GRID: Tuple[Optional[int], ...] = tuple(range(1, 11)) + (None,)
DEFAULT_PERIODS = (2, 5, 10, 15)


def _unit_actions(system: SystemModel, component_actions: np.ndarray, inspect: bool = False) -> np.ndarray:
    """逐构件动作 → 控制单元动作向量（多构件单元取其首个构件的动作）"""
    actions = np.zeros(system.num_units, dtype=int)
    for u, unit in enumerate(system.control_units):
        if unit.is_inspection:
            actions[u] = int(inspect)
        else:
            actions[u] = component_actions[unit.components[0]]
    return actions


class StateMapPolicy(Policy):
    """
    状态映射策略（CBM / TCBM）

    Attributes:
        state_actions: 每个损伤状态对应的动作
        rate_threshold: 速率阈值 τ*（None 表示不启用）
        override_action: τ ≥ τ* 时的覆盖动作
        override_states: 覆盖规则适用的损伤状态
    """

    def __init__(self, system: SystemModel, state_actions: Sequence[int], rate_threshold: Optional[int] = None,
                 override_action: int = MAJOR_REPAIR, override_states: Sequence[int] = (), name: str = "cbm"):
        if len(state_actions) != system.num_damage_states:
            raise ValueError(f"state map needs {system.num_damage_states} entries, got {len(state_actions)}")
        num_actions = system.components[0].num_actions
        if any(not 0 <= a < num_actions for a in state_actions):
            raise ValueError(f"state map actions must lie in 0..{num_actions - 1}, got {tuple(state_actions)}")
        if rate_threshold is not None and rate_threshold < 0:
            raise ValueError(f"rate threshold must be non-negative, got {rate_threshold}")
        self.system = system
        self.state_actions = np.asarray(state_actions, dtype=int)
        self.rate_threshold = rate_threshold
        self.override_action = int(override_action)
        self.override_states = np.asarray(tuple(override_states), dtype=int)
        self.name = name

    def decide(self, observed_states: np.ndarray, rates: np.ndarray, t: int) -> np.ndarray:
        observed_states = np.asarray(observed_states, dtype=int)
        comp = self.state_actions[observed_states]
        if self.rate_threshold is not None and self.override_states.size:
            hit = (np.asarray(rates) >= self.rate_threshold) & np.isin(observed_states, self.override_states)
            comp = np.where(hit, self.override_action, comp)
        return _unit_actions(self.system, comp)

    def act(self, context: DecisionContext) -> np.ndarray:
        return self.decide(context.observed_states, context.rates, context.time)


class PeriodicLossPolicy(Policy):
    """
    定期检测 + 截面损失阈值策略

    t ≥ 1 且 t mod period = 0 时检测；每个构件按信念平均截面损失选择：
    ≥ replace_threshold 更换，≥ major_threshold 大修，τ ≥ rate_threshold 小修，否则不作为。
    """

    def __init__(self, system: SystemModel, period: int, major_threshold: float = float("inf"),
                 replace_threshold: float = float("inf"), rate_threshold: Optional[int] = None,
                 name: str = "periodic"):
        if period < 1:
            raise ValueError(f"inspection period must be positive, got {period}")
        if min(major_threshold, replace_threshold) < 0:
            raise ValueError("loss thresholds must be non-negative")
        if "loss_percent" not in system.metadata:
            raise ValueError(f"system {system.name} carries no section-loss table")
        self.system = system
        self.period = int(period)
        self.major_threshold = float(major_threshold)
        self.replace_threshold = float(replace_threshold)
        self.rate_threshold = rate_threshold
        self.loss_percent = np.asarray(system.metadata["loss_percent"], dtype=float)
        self.name = name

    def inspects_at(self, t: int) -> bool:
        return t >= 1 and t % self.period == 0

    def mean_loss(self, belief: np.ndarray) -> np.ndarray:
        return np.asarray(belief) @ self.loss_percent

    def decide(self, belief: np.ndarray, rates: np.ndarray, t: int) -> np.ndarray:
        loss = self.mean_loss(belief)
        comp = np.full(loss.shape[0], DO_NOTHING, dtype=int)
        if self.rate_threshold is not None:
            comp[np.asarray(rates) >= self.rate_threshold] = MINOR_REPAIR
        comp[loss >= self.major_threshold] = MAJOR_REPAIR
        comp[loss >= self.replace_threshold] = REPLACE
        return _unit_actions(self.system, comp, inspect=self.inspects_at(t))

    def act(self, context: DecisionContext) -> np.ndarray:
        return self.decide(context.belief, context.rates, context.time)


def replacement_map(num_states: int, replace_state: int) -> Tuple[int, ...]:
    """状态 ≥ replace_state 更换，其余不作为；replace_state = num_states 时始终不作为"""
    return tuple(REPLACE if x >= replace_state else DO_NOTHING for x in range(num_states))


def all_state_maps(num_states: int, num_actions: int) -> List[Tuple[int, ...]]:
    """状态 0 固定为不作为，其余状态遍历全部动作"""
    return [(DO_NOTHING,) + rest for rest in itertools.product(range(num_actions), repeat=num_states - 1)]


def cbm_i(system: SystemModel, replace_state: int) -> StateMapPolicy:
    return StateMapPolicy(system, replacement_map(system.num_damage_states, replace_state), name="CBM-I")


def cbm_ii(system: SystemModel, state_map: Sequence[int]) -> StateMapPolicy:
    return StateMapPolicy(system, state_map, name="CBM-II")


def tcbm_i(system: SystemModel, state_map: Sequence[int], rate_threshold: Optional[int]) -> StateMapPolicy:
    """CBM-I 映射 + 轻微损伤状态下 τ ≥ τ* 大修"""
    return StateMapPolicy(system, state_map, rate_threshold, MAJOR_REPAIR, (1,), name="TCBM-I")


def tcbm_ii(system: SystemModel, state_map: Sequence[int], rate_threshold: Optional[int]) -> StateMapPolicy:
    """CBM-II 映射 + 轻微与严重损伤状态下 τ ≥ τ* 大修"""
    return StateMapPolicy(system, state_map, rate_threshold, MAJOR_REPAIR, (1, 2), name="TCBM-II")


def periodic_family_name(index: int) -> str:
    numerals = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII")
    return f"CBM-{numerals[index]}" if index < len(numerals) else f"CBM-{index + 1}"


def loss_grid(bin_width: float, upper: float) -> Tuple[float, ...]:
    """截面损失阈值网格：bin_width 的整数倍，直到 upper"""
    steps = int(np.floor(upper / bin_width + 1e-9))
    return tuple(round(k * bin_width, 10) for k in range(1, steps + 1))


def default_periodic_grid(system: SystemModel, upper: float = 20.0) -> Dict[str, Sequence]:
    deterioration = system.metadata.get("deterioration")
    width = deterioration.bin_width if deterioration is not None else 2.5
    grid = loss_grid(width, upper)
    return {"major_threshold": grid, "replace_threshold": grid, "rate_threshold": DEFAULT_RATE_GRID}
