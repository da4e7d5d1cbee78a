#!/usr/bin/env python3
"""
Replay Buffer - 经验回放与探索调度

功能：
1. TransitionRecord：一条经验（输入编码、动作向量、行为概率、费用、下一输入编码、终止标志）
2. ReplayBuffer：定容环形存储，均匀有放回抽样
3. ExplorationSchedule：ε 从初始值线性退火到最终值
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from loguru import logger

DEFAULT_CAPACITY = 300_000


@dataclass
class TransitionRecord:
    """
    单条经验

    Attributes:
        features: t 时刻输入编码
        actions: 控制单元动作向量
        behavior_probs: 行为策略对所选动作的概率（DCMAC 逐单元，DDQN 为联合动作）
        cost: 训练用费用
        next_features: t+1 时刻输入编码
        terminal: t + 1 == T 时为真
    """

    features: np.ndarray
    actions: np.ndarray
    behavior_probs: np.ndarray
    cost: float
    next_features: np.ndarray
    terminal: bool

    def __post_init__(self):
        mu = np.asarray(self.behavior_probs, dtype=float)
        if np.any(mu <= 0.0) or np.any(mu > 1.0 + 1e-12):
            raise ValueError(f"behavior probabilities must lie in (0, 1], got {mu}")


@dataclass
class Batch:
    """抽样批次（按列存储）"""

    features: np.ndarray
    actions: np.ndarray
    behavior_probs: np.ndarray
    costs: np.ndarray
    next_features: np.ndarray
    terminal: np.ndarray
    indices: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.costs.shape[0]

    @classmethod
    def from_records(cls, records) -> "Batch":
        return cls(
            features=np.stack([r.features for r in records]),
            actions=np.stack([np.asarray(r.actions, dtype=int) for r in records]),
            behavior_probs=np.stack([np.atleast_1d(np.asarray(r.behavior_probs, dtype=float)) for r in records]),
            costs=np.array([r.cost for r in records], dtype=float),
            next_features=np.stack([r.next_features for r in records]),
            terminal=np.array([r.terminal for r in records], dtype=bool),
        )


class ReplayBuffer:
    """定容环形经验池"""

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self._size = 0
        self._cursor = 0
        self._storage = None

    def __len__(self) -> int:
        return self._size

    def _allocate(self, record: TransitionRecord):
        d = record.features.shape[0]
        n = np.atleast_1d(record.actions).shape[0]
        m = np.atleast_1d(record.behavior_probs).shape[0]
        self._storage = {
            "features": np.zeros((self.capacity, d)),
            "actions": np.zeros((self.capacity, n), dtype=int),
            "behavior_probs": np.ones((self.capacity, m)),
            "costs": np.zeros(self.capacity),
            "next_features": np.zeros((self.capacity, d)),
            "terminal": np.zeros(self.capacity, dtype=bool),
        }
        logger.debug(f"经验池已分配: 容量 {self.capacity}，输入维度 {d}，控制单元 {n}")

    def add(self, record: TransitionRecord):
        """写入一条经验，满时覆盖最旧的记录"""
        if self._storage is None:
            self._allocate(record)
        i = self._cursor
        s = self._storage
        s["features"][i] = record.features
        s["actions"][i] = record.actions
        s["behavior_probs"][i] = record.behavior_probs
        s["costs"][i] = record.cost
        s["next_features"][i] = record.next_features
        s["terminal"][i] = record.terminal
        self._cursor = (self._cursor + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """均匀有放回抽样"""
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self._size, size=batch_size)
        s = self._storage
        return Batch(
            features=s["features"][idx],
            actions=s["actions"][idx],
            behavior_probs=s["behavior_probs"][idx],
            costs=s["costs"][idx],
            next_features=s["next_features"][idx],
            terminal=s["terminal"][idx],
            indices=idx,
        )


@dataclass(frozen=True)
class ExplorationSchedule:
    """
    ε 线性退火

    Attributes:
        initial: 初始 ε
        final: 最终 ε
        anneal_episodes: 退火回合数
    """

    initial: float = 1.0
    final: float = 0.01
    anneal_episodes: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.final <= self.initial <= 1.0:
            raise ValueError(f"need 0 <= final <= initial <= 1, got {self.final}, {self.initial}")

    def value(self, episode: int) -> float:
        if self.anneal_episodes <= 0:
            return self.final
        frac = min(max(episode, 0) / self.anneal_episodes, 1.0)
        return max(self.final, self.initial - (self.initial - self.final) * frac)
