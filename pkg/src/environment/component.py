#!/usr/bin/env python3
"""
Component Model - 构件劣化模型

功能：
1. 定义单个构件的损伤状态转移矩阵族 P[τ]（按劣化速率 τ 索引）
2. 定义维修动作效果（状态改善、速率调整、更换、成功概率）
3. 计算考虑维修效果后的有效转移矩阵
4. 构造带状观测矩阵（给定检测精度 p）

约定：损伤状态与动作均从 0 开始编号（状态 0 = 无损伤，最后一个状态 = 失效）。
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

# 行随机性容差
ROW_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ActionEffect:
    """
    维修动作效果

    Attributes:
        name: 动作名称
        state_shift: 成功时损伤状态改善的级数（0 表示不改变）
        rate_shift: 劣化速率调整量（负数表示"返老还童"）
        reset: 是否更换（状态与速率回到初始值）
        success_prob: 状态效果成功的概率
    """

    name: str
    state_shift: int = 0
    rate_shift: int = 0
    reset: bool = False
    success_prob: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.success_prob <= 1.0:
            raise ValueError(f"success_prob must lie in [0, 1], got {self.success_prob}")
        if self.state_shift < 0:
            raise ValueError(f"state_shift must be non-negative, got {self.state_shift}")

    @property
    def is_identity(self) -> bool:
        """是否为"不作为"型动作（不改变状态和速率）"""
        return not self.reset and self.state_shift == 0 and self.rate_shift == 0


@dataclass(frozen=True)
class ObservationModel:
    """
    观测模型：给定精度 p 的带状观测矩阵

    Attributes:
        precision: 观测到真实状态的概率 p
        matrix: |X|×|X| 行随机矩阵，matrix[i, j] = p(o = j | x = i)
    """

    precision: float
    matrix: np.ndarray

    @classmethod
    def banded(cls, num_states: int, precision: float) -> "ObservationModel":
        """
        构造带状观测矩阵：内部状态两侧各 (1-p)/2，边界状态唯一邻居 1-p

        Args:
            num_states: 损伤状态数 |X|
            precision: 检测精度 p

        Returns:
            ObservationModel 对象
        """
        if not 0.0 <= precision <= 1.0:
            raise ValueError(f"precision must lie in [0, 1], got {precision}")
        if num_states < 1:
            raise ValueError(f"num_states must be positive, got {num_states}")

        matrix = np.zeros((num_states, num_states))
        if num_states == 1:
            matrix[0, 0] = 1.0
            return cls(precision=precision, matrix=matrix)

        miss = 1.0 - precision
        for i in range(num_states):
            matrix[i, i] = precision
            if i == 0:
                matrix[i, 1] = miss
            elif i == num_states - 1:
                matrix[i, i - 1] = miss
            else:
                matrix[i, i - 1] = miss / 2.0
                matrix[i, i + 1] = miss / 2.0
        return cls(precision=precision, matrix=matrix)

    @property
    def is_perfect(self) -> bool:
        return self.precision >= 1.0


@dataclass
class ComponentModel:
    """
    构件模型

    Attributes:
        name: 构件名称
        base_transitions: 形状为 (R, |X|, |X|) 的转移矩阵族，R = max_rate + 1
        action_effects: 各维修动作的效果
        direct_loss: 各损伤状态的直接损失
        maintenance_cost: 各动作的维修费用
    """

    name: str
    base_transitions: np.ndarray
    action_effects: List[ActionEffect]
    direct_loss: np.ndarray
    maintenance_cost: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.base_transitions = np.asarray(self.base_transitions, dtype=float)
        if self.base_transitions.ndim == 2:
            self.base_transitions = self.base_transitions[np.newaxis, :, :]
        self.direct_loss = np.asarray(self.direct_loss, dtype=float)
        self.maintenance_cost = np.asarray(self.maintenance_cost, dtype=float)
        self.validate()

    @property
    def num_damage_states(self) -> int:
        return self.base_transitions.shape[1]

    @property
    def max_rate(self) -> int:
        return self.base_transitions.shape[0] - 1

    @property
    def num_actions(self) -> int:
        return len(self.action_effects)

    @property
    def is_stationary(self) -> bool:
        """只有一个转移矩阵时为平稳构件，劣化速率不参与输入编码"""
        return self.max_rate == 0

    def validate(self):
        """
        校验转移矩阵与费用表的形状及概率性质

        Raises:
            ValueError: 任一不变量被违反
        """
        P = self.base_transitions
        if P.ndim != 3 or P.shape[1] != P.shape[2]:
            raise ValueError(f"{self.name}: transitions must have shape (R, X, X), got {P.shape}")
        if np.any(P < 0):
            raise ValueError(f"{self.name}: negative transition probabilities")
        row_error = np.abs(P.sum(axis=2) - 1.0).max()
        if row_error > ROW_SUM_TOLERANCE:
            raise ValueError(f"{self.name}: transition rows do not sum to 1 (max error {row_error:.3e})")
        if np.any(np.tril(P, k=-1) > 0):
            raise ValueError(f"{self.name}: transition matrices must be upper-triangular (no healing)")
        if np.any(np.abs(P[:, -1, -1] - 1.0) > ROW_SUM_TOLERANCE):
            raise ValueError(f"{self.name}: failure state must be absorbing under do-nothing")
        if self.direct_loss.shape != (self.num_damage_states,):
            raise ValueError(
                f"{self.name}: direct_loss needs {self.num_damage_states} entries, got {self.direct_loss.shape}"
            )
        if self.maintenance_cost.shape != (self.num_actions,):
            raise ValueError(
                f"{self.name}: maintenance_cost needs {self.num_actions} entries, got {self.maintenance_cost.shape}"
            )

    def check_action(self, action: int) -> ActionEffect:
        if not 0 <= int(action) < self.num_actions:
            raise ValueError(f"{self.name}: invalid action index {action} (have {self.num_actions} actions)")
        return self.action_effects[int(action)]

    def clamp_rate(self, tau: int) -> int:
        """将劣化速率限制在转移表范围内（超出时取最后一个可用速率）"""
        if tau < 0:
            raise ValueError(f"{self.name}: deterioration rate must be non-negative, got {tau}")
        return min(int(tau), self.max_rate)

    def post_action_rate(self, action: int, tau: int) -> int:
        """动作生效后、转移发生前所用的劣化速率"""
        effect = self.check_action(action)
        if effect.reset:
            return 0
        return self.clamp_rate(max(0, int(tau) + effect.rate_shift))

    def next_rate(self, action: int, tau: int) -> int:
        """
        下一时间步的劣化速率（确定性）

        更换 → 0；有速率调整 → max(0, τ + shift)；否则 τ + 1。
        """
        effect = self.check_action(action)
        if effect.reset:
            return 0
        if effect.rate_shift != 0:
            return self.clamp_rate(max(0, int(tau) + effect.rate_shift))
        return self.clamp_rate(int(tau) + 1)

    def shifted_state(self, action: int, state: int) -> int:
        """动作成功后的损伤状态"""
        effect = self.check_action(action)
        if effect.reset:
            return 0
        return max(0, int(state) - effect.state_shift)

    def post_action_distribution(self, action: int, state: int) -> List[tuple]:
        """
        动作生效后（转移前）的状态分布

        Returns:
            [(概率, 动作后状态, 是否成功), ...]
        """
        effect = self.check_action(action)
        if effect.is_identity or effect.success_prob >= 1.0:
            return [(1.0, self.shifted_state(action, state), True)]
        if effect.success_prob <= 0.0:
            return [(1.0, int(state), False)]
        return [
            (effect.success_prob, self.shifted_state(action, state), True),
            (1.0 - effect.success_prob, int(state), False),
        ]


def effective_transition_matrix(model: ComponentModel, action: int, tau: int) -> np.ndarray:
    """
    计算维修动作与环境劣化共同作用下的有效转移矩阵

    先施加维修效果（状态平移/更换），再按动作后速率进行一步转移；
    对概率性动作取混合：success·(效果矩阵) + (1 − success)·P[τ]。

    Args:
        model: 构件模型
        action: 动作索引
        tau: 当前劣化速率（超出表范围时取最后一个速率）

    Returns:
        |X|×|X| 行随机矩阵
    """
    effect = model.check_action(action)
    tau_now = model.clamp_rate(tau)
    P_now = model.base_transitions[tau_now]

    if effect.is_identity:
        return P_now.copy()

    num_states = model.num_damage_states
    P_post = model.base_transitions[model.post_action_rate(action, tau)]

    shift = np.zeros((num_states, num_states))
    for i in range(num_states):
        shift[i, model.shifted_state(action, i)] = 1.0
    effected = shift @ P_post

    p = effect.success_prob
    if p >= 1.0:
        return effected
    return p * effected + (1.0 - p) * P_now


def interpolated_transitions(initial: Sequence[Sequence[float]],
                             final: Optional[Sequence[Sequence[float]]],
                             max_rate: int) -> np.ndarray:
    """
    由初始与最终矩阵线性插值生成非平稳转移矩阵族

    Args:
        initial: τ = 0 时的转移矩阵
        final: τ = max_rate 时的转移矩阵（None 表示平稳）
        max_rate: 最大劣化速率

    Returns:
        形状为 (max_rate + 1, |X|, |X|) 的数组
    """
    P0 = np.asarray(initial, dtype=float)
    if final is None or max_rate == 0:
        return P0[np.newaxis, :, :].copy()

    P1 = np.asarray(final, dtype=float)
    if P0.shape != P1.shape:
        raise ValueError(f"initial and final matrices differ in shape: {P0.shape} vs {P1.shape}")

    weights = np.arange(max_rate + 1, dtype=float) / max_rate
    family = (1.0 - weights)[:, None, None] * P0 + weights[:, None, None] * P1
    # 插值后重新归一化，消除浮点误差
    family /= family.sum(axis=2, keepdims=True)
    logger.debug(f"已插值 {max_rate + 1} 个 {P0.shape[0]} 阶转移矩阵")
    return family
