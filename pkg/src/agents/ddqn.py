#!/usr/bin/env python3
"""
DDQN Agent - 双重深度 Q 网络

功能：
1. 在线网络输出全部联合动作的费用 Q 值（联合动作数 K = Π k_j）
2. ε-贪婪选择动作（贪婪分支取最小费用，平局取最小索引）
3. 双重 Q 目标：y = c + γ·Q⁻(s', argmin_a' Q(s', a'))，终止时 y = c
4. 均方误差更新在线网络，每 13 次更新同步目标网络
"""

from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np
from loguru import logger

from ..environment.simulator import DecisionContext, Policy
from ..neural.network import DenseNet, HeadSpec, load_checkpoint, save_checkpoint
from ..neural.optimizer import Adam
from .replay import Batch

TARGET_UPDATE_PERIOD = 13


class DdqnAgent(Policy):
    """DDQN 智能体（费用最小化）"""

    name = "ddqn"
    behavior_width = 1

    def __init__(self, input_size: int, unit_sizes: Sequence[int], hidden_sizes: Sequence[int] = (40, 40),
                 gamma: float = 0.99, lr: float = 1e-3, target_period: int = TARGET_UPDATE_PERIOD,
                 rng: np.random.Generator = None, init_scale: float = 1.0):
        """
        Args:
            input_size: 输入编码长度
            unit_sizes: 各控制单元动作数
            hidden_sizes: 隐藏层宽度
            gamma: 折现因子
            lr: 学习率
            target_period: 目标网络同步周期（更新步数）
            rng: 权重初始化随机数生成器
            init_scale: 初始化缩放
        """
        self.unit_sizes = [int(k) for k in unit_sizes]
        self.num_actions = int(np.prod(self.unit_sizes))
        self.gamma = float(gamma)
        self.target_period = int(target_period)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.online = DenseNet(input_size, hidden_sizes, HeadSpec("vector", (self.num_actions,)), rng, init_scale)
        self.target = self.online.copy()
        self.optimizer = Adam(self.online.params, lr=lr)
        self.update_steps = 0

    def joint_to_units(self, index: int) -> np.ndarray:
        return np.array(np.unravel_index(int(index), self.unit_sizes), dtype=int)

    def units_to_joint(self, actions: Sequence[int]) -> int:
        return int(np.ravel_multi_index([int(a) for a in actions], self.unit_sizes))

    def q_values(self, features: np.ndarray) -> np.ndarray:
        return self.online.predict(features)

    def greedy_index(self, features: np.ndarray) -> int:
        return int(np.argmin(self.q_values(features)[0]))

    def act(self, context: DecisionContext) -> np.ndarray:
        return self.joint_to_units(self.greedy_index(context.features))

    def behave(self, features: np.ndarray, epsilon: float, rng: np.random.Generator,
               explore_probs=None) -> Tuple[np.ndarray, np.ndarray]:
        """
        行为策略：返回 (单元动作向量, 联合动作的行为概率)
        """
        index = select_action_ddqn(self, features, epsilon, rng)
        greedy = self.greedy_index(features)
        mu = epsilon / self.num_actions + (1.0 - epsilon) * float(index == greedy)
        return self.joint_to_units(index), np.array([mu])

    def update(self, batch: Batch) -> Dict[str, float]:
        return {"q_loss": ddqn_update(self, batch)}

    def sync_target(self):
        self.target.load_params(self.online.params)

    def set_learning_rates(self, rates: Dict[str, float]):
        if "q" in rates:
            self.optimizer.lr = rates["q"]

    def save(self, directory: str, rng: np.random.Generator = None) -> Path:
        directory = Path(directory)
        save_checkpoint(directory / "online.npz", self.online, self.optimizer, rng,
                        extra={"update_steps": self.update_steps, "unit_sizes": self.unit_sizes})
        save_checkpoint(directory / "target.npz", self.target)
        return directory

    @classmethod
    def load(cls, directory: str, gamma: float = 0.99) -> "DdqnAgent":
        directory = Path(directory)
        online, state, _, extra = load_checkpoint(directory / "online.npz")
        target, _, _, _ = load_checkpoint(directory / "target.npz")
        agent = cls(online.layer_sizes[0], extra["unit_sizes"], online.layer_sizes[1:-1], gamma=gamma)
        agent.online.load_params(online.params)
        agent.target.load_params(target.params)
        if state is not None:
            agent.optimizer.state = state
            agent.optimizer.params = agent.online.params
        agent.update_steps = int(extra.get("update_steps", 0))
        logger.info(f"✓ 已加载 DDQN 智能体: {directory}")
        return agent


def select_action_ddqn(agent: DdqnAgent, features: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """
    ε-贪婪选择联合动作索引

    以概率 ε 均匀随机，否则取预测费用最小的动作（平局取最小索引）。
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    explore = rng.random() < epsilon
    if explore:
        return int(rng.integers(agent.num_actions))
    return agent.greedy_index(features)


def ddqn_target(batch: Batch, online: DenseNet, target: DenseNet, gamma: float) -> np.ndarray:
    """
    双重 Q 目标

    在线网络选择下一动作（最小费用），目标网络评估该动作。
    """
    next_online = online.predict(batch.next_features)
    best = np.argmin(next_online, axis=1)
    next_target = target.predict(batch.next_features)[np.arange(len(batch)), best]
    return batch.costs + gamma * np.where(batch.terminal, 0.0, next_target)


def ddqn_loss_and_grad(agent: DdqnAgent, batch: Batch, y: np.ndarray):
    """
    损失 mean (Q(s,a) − y)² 及其对输出层的梯度

    Returns:
        (损失, logits 梯度, 前向缓存)
    """
    q, cache = agent.online.forward(batch.features)
    rows = np.arange(len(batch))
    joint = np.array([agent.units_to_joint(a) for a in batch.actions])
    diff = q[rows, joint] - y
    loss = float(np.mean(diff ** 2))
    grad = np.zeros_like(q)
    grad[rows, joint] = 2.0 * diff / len(batch)
    return loss, grad, cache


def ddqn_update(agent: DdqnAgent, batch: Batch) -> float:
    """
    一次 DDQN 更新

    Returns:
        更新前的均方误差
    """
    if len(batch) == 0:
        raise ValueError("batch must not be empty")
    y = ddqn_target(batch, agent.online, agent.target, agent.gamma)
    loss, grad, cache = ddqn_loss_and_grad(agent, batch, y)
    agent.optimizer.step(agent.online.backward(cache, grad))
    agent.update_steps += 1
    if agent.update_steps % agent.target_period == 0:
        agent.sync_target()
        logger.debug(f"目标网络已同步（第 {agent.update_steps} 次更新）")
    return loss
