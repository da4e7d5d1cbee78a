#!/usr/bin/env python3
"""
Maintenance Environment - 维修决策仿真环境

功能：
1. 封装 SystemModel，按回合推进（reset / step）
2. 每回合由一个种子派生三条独立随机流：状态转移、观测、结构荷载
3. 完全可观测（MDP）时向策略提供真实状态，部分可观测（POMDP）时提供信念
4. 记录策略实现轨迹（逐构件：时间、状态/信念、动作、观测、费用）

在精度 p = 1.0 的 POMDP 与 MDP 中使用同一种子和策略时，状态轨迹与费用逐位一致。
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger

from .system import (
    NO_OBSERVATION,
    BeliefState,
    StepOutcome,
    SystemModel,
    SystemState,
    belief_update,
    encode_input,
    observe,
    one_hot_belief,
    step,
)


@dataclass
class DecisionContext:
    """
    策略在某一决策步可见的信息

    Attributes:
        time: 决策步 t
        rates: 各构件劣化速率（已知）
        belief: 各构件信念（MDP 下为独热向量）
        observed_states: 最近一次观测到的损伤状态（未检测过的构件保持上次观测）
        features: 神经网络输入编码
        state: 真实状态（仅完全可观测时提供）
    """

    time: int
    rates: np.ndarray
    belief: np.ndarray
    observed_states: np.ndarray
    features: np.ndarray
    state: Optional[SystemState] = None


class Policy(ABC):
    """确定性策略接口：给定决策上下文返回控制单元动作向量"""

    name: str = "policy"

    @abstractmethod
    def act(self, context: DecisionContext) -> np.ndarray:
        ...


@dataclass
class TraceRow:
    """策略实现轨迹的一行（单个构件、单个时间步）"""

    episode: int
    time: int
    component: int
    rate: int
    true_state: int
    expected_state: float
    observation: Optional[int]
    action: int
    inspected: int
    step_cost: float


def episode_streams(seed: Union[int, Sequence[int], np.random.SeedSequence]) -> Dict[str, np.random.Generator]:
    """由一个种子派生转移、观测、荷载三条独立随机流"""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    transition, observation, load = seq.spawn(3)
    return {
        "transition": np.random.default_rng(transition),
        "observation": np.random.default_rng(observation),
        "load": np.random.default_rng(load),
    }


class MaintenanceEnv:
    """维修决策环境"""

    def __init__(self, system: SystemModel, observable: Optional[bool] = None):
        """
        Args:
            system: 系统模型
            observable: 是否完全可观测；缺省时由观测精度与检测设置决定
        """
        self.system = system
        self.observable = (not system.partially_observable) if observable is None else bool(observable)
        self.state: Optional[SystemState] = None
        self.belief: Optional[BeliefState] = None
        self.observed_states: Optional[np.ndarray] = None
        self._streams: Dict[str, np.random.Generator] = {}
        self.last_observation: Optional[np.ndarray] = None

    @property
    def horizon(self) -> int:
        return self.system.horizon

    @property
    def discount(self) -> float:
        return self.system.discount

    def reset(self, seed) -> DecisionContext:
        """开始新回合：所有构件完好、速率为 0、t = 0"""
        self._streams = episode_streams(seed)
        self.state = self.system.initial_state()
        self.belief = self.system.initial_belief()
        self.observed_states = self.state.damage.copy()
        self.last_observation = None
        return self.context()

    def context(self) -> DecisionContext:
        if self.state is None:
            raise RuntimeError("Environment not reset")
        belief = one_hot_belief(self.system, self.state) if self.observable else self.belief
        return DecisionContext(
            time=self.state.time,
            rates=self.state.rates.copy(),
            belief=belief.beliefs.copy(),
            observed_states=self.observed_states.copy(),
            features=encode_input(belief, self.system),
            state=self.state.copy() if self.observable else None,
        )

    def step(self, actions: Sequence[int]):
        """
        执行一步

        Returns:
            (StepOutcome, 下一决策上下文, 是否回合结束)
        """
        if self.state is None:
            raise RuntimeError("Environment not reset")
        if self.state.time >= self.horizon:
            raise RuntimeError("Episode already finished; call reset()")

        outcome: StepOutcome = step(self.system, self.state, actions,
                                    self._streams["transition"], self._streams["load"])
        observation = observe(self.system, outcome.next_state, actions, self._streams["observation"])
        self.belief = belief_update(self.belief, actions, observation, self.system)
        seen = observation != NO_OBSERVATION
        self.observed_states = np.where(seen, observation, self.observed_states)
        self.last_observation = observation
        self.state = outcome.next_state
        done = self.state.time >= self.horizon
        if done:
            logger.debug(f"{self.system.name}: 回合结束于 t={self.state.time}")
        return outcome, self.context(), done

    def trace_rows(self, episode: int, context: DecisionContext, pre_state: SystemState,
                   actions: np.ndarray, outcome: StepOutcome) -> List[TraceRow]:
        """
        当前步的逐构件轨迹行（需在 step 之后调用）

        Args:
            episode: 回合编号
            context: 决策时的上下文
            pre_state: 决策时的真实状态
            actions: 控制单元动作
            outcome: 本步结果
        """
        comp_actions = self.system.component_actions(actions)
        inspected = int(self.system.inspects(actions))
        expected = context.belief @ np.arange(self.system.num_damage_states, dtype=float)
        rows = []
        for l in range(self.system.num_components):
            obs = int(self.last_observation[l]) if self.last_observation is not None else NO_OBSERVATION
            rows.append(TraceRow(
                episode=episode,
                time=context.time,
                component=l,
                rate=int(context.rates[l]),
                true_state=int(pre_state.damage[l]),
                expected_state=float(expected[l]),
                observation=None if obs == NO_OBSERVATION else obs,
                action=int(comp_actions[l]),
                inspected=inspected,
                step_cost=outcome.total_cost,
            ))
        return rows
