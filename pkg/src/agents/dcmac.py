#!/usr/bin/env python3
"""
DCMAC Agent - 深度集中式多智能体 Actor-Critic

功能：
1. Actor：共享隐藏层 + 每个控制单元一个 softmax 分头，联合策略为各分头概率之积
2. Critic：标量状态价值（费用意义下的期望折现费用）
3. 行为策略：逐单元 ε 混合，μ_j = ε·q_j(a_j) + (1−ε)·π_j(a_j)，q_j 为探索分布
4. 截断重要性权重 w = min(c, Π_j π_j(a_j)/μ_j(a_j))，c = 2
5. 一步时序差分优势 A = c + γ·V(b') − V(b)（终止时 A = c − V(b)）
6. Actor 最小化 (1/N)Σ w·A·Σ_j log π_j；Critic 以 w 加权的半梯度 TD(0) 更新
"""

from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ..environment.simulator import DecisionContext, Policy
from ..neural.network import PROB_FLOOR, DenseNet, HeadSpec, load_checkpoint, save_checkpoint
from ..neural.optimizer import Adam
from .replay import Batch

IMPORTANCE_CAP = 2.0


class DcmacAgent(Policy):
    """DCMAC 智能体（费用最小化）"""

    name = "dcmac"

    def __init__(self, input_size: int, unit_sizes: Sequence[int],
                 actor_hidden: Sequence[int] = (40, 40), critic_hidden: Sequence[int] = (40, 40),
                 gamma: float = 0.99, actor_lr: float = 1e-4, critic_lr: float = 1e-3,
                 importance_cap: float = IMPORTANCE_CAP, rng: Optional[np.random.Generator] = None,
                 init_scale: float = 1.0):
        """
        Args:
            input_size: 输入编码长度
            unit_sizes: 各控制单元动作数
            actor_hidden: Actor 隐藏层宽度
            critic_hidden: Critic 隐藏层宽度
            gamma: 折现因子
            actor_lr: Actor 学习率
            critic_lr: Critic 学习率
            importance_cap: 重要性权重截断值 c
            rng: 权重初始化随机数生成器
            init_scale: 初始化缩放
        """
        self.unit_sizes = [int(k) for k in unit_sizes]
        self.gamma = float(gamma)
        self.importance_cap = float(importance_cap)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.actor = DenseNet(input_size, actor_hidden, HeadSpec("softmax", tuple(self.unit_sizes)), rng, init_scale)
        self.critic = DenseNet(input_size, critic_hidden, HeadSpec("scalar"), rng, init_scale)
        self.actor_optimizer = Adam(self.actor.params, lr=actor_lr)
        self.critic_optimizer = Adam(self.critic.params, lr=critic_lr)
        self.last_weights: Optional[np.ndarray] = None

    @property
    def behavior_width(self) -> int:
        return len(self.unit_sizes)

    def policy(self, features: np.ndarray):
        """各分头动作概率"""
        return self.actor.predict(features)

    def act(self, context: DecisionContext) -> np.ndarray:
        probs = self.policy(context.features)
        return np.array([int(np.argmax(p[0])) for p in probs], dtype=int)

    def behave(self, features: np.ndarray, epsilon: float, rng: np.random.Generator,
               explore_probs: Optional[Sequence[np.ndarray]] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        逐单元 ε 混合行为策略

        Args:
            features: 输入编码
            epsilon: 探索率
            rng: 随机数生成器
            explore_probs: 各单元探索分布（缺省为均匀）

        Returns:
            (动作向量, 各单元行为概率 μ_j)
        """
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
        probs = self.policy(features)
        actions = np.empty(len(self.unit_sizes), dtype=int)
        mu = np.empty(len(self.unit_sizes))
        for j, (k, p) in enumerate(zip(self.unit_sizes, probs)):
            pi = p[0]
            q = np.full(k, 1.0 / k) if explore_probs is None else np.asarray(explore_probs[j], dtype=float)
            explore = rng.random() < epsilon
            source = q if explore else pi
            a = int(min(np.searchsorted(np.cumsum(source), rng.random(), side="right"), k - 1))
            actions[j] = a
            mu[j] = epsilon * q[a] + (1.0 - epsilon) * pi[a]
        return actions, np.maximum(mu, PROB_FLOOR)

    def update(self, batch: Batch) -> Dict[str, float]:
        """同一批次先计算优势与权重，再分别更新 Actor 与 Critic"""
        advantages = dcmac_advantage(batch, self.critic, self.gamma)
        weights = importance_weight(batch, self.actor, self.importance_cap)
        self.last_weights = weights
        grad_norm = dcmac_actor_update(self, batch, advantages, weights)
        critic_loss = dcmac_critic_update(self, batch, advantages, weights)
        return {
            "actor_grad_norm": grad_norm,
            "critic_loss": critic_loss,
            "mean_weight": float(weights.mean()),
        }

    def set_learning_rates(self, rates: Dict[str, float]):
        if "actor" in rates:
            self.actor_optimizer.lr = rates["actor"]
        if "critic" in rates:
            self.critic_optimizer.lr = rates["critic"]

    def save(self, directory: str, rng: np.random.Generator = None) -> Path:
        directory = Path(directory)
        save_checkpoint(directory / "actor.npz", self.actor, self.actor_optimizer, rng,
                        extra={"unit_sizes": self.unit_sizes, "importance_cap": self.importance_cap})
        save_checkpoint(directory / "critic.npz", self.critic, self.critic_optimizer)
        return directory

    @classmethod
    def load(cls, directory: str, gamma: float = 0.99) -> "DcmacAgent":
        directory = Path(directory)
        actor, actor_state, _, extra = load_checkpoint(directory / "actor.npz")
        critic, critic_state, _, _ = load_checkpoint(directory / "critic.npz")
        agent = cls(actor.layer_sizes[0], extra["unit_sizes"], actor.layer_sizes[1:-1], critic.layer_sizes[1:-1],
                    gamma=gamma, importance_cap=extra.get("importance_cap", IMPORTANCE_CAP))
        agent.actor.load_params(actor.params)
        agent.critic.load_params(critic.params)
        if actor_state is not None:
            agent.actor_optimizer.state = actor_state
        if critic_state is not None:
            agent.critic_optimizer.state = critic_state
        logger.info(f"✓ 已加载 DCMAC 智能体: {directory}")
        return agent


def dcmac_advantage(batch: Batch, critic: DenseNet, gamma: float) -> np.ndarray:
    """
    一步时序差分优势 A = c + γ·V(b') − V(b)；终止记录 A = c − V(b)
    """
    v = critic.predict(batch.features)
    v_next = critic.predict(batch.next_features)
    return batch.costs + gamma * np.where(batch.terminal, 0.0, v_next) - v


def joint_log_prob(actor: DenseNet, features: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """联合动作对数概率 = 各分头对数概率之和"""
    probs = actor.predict(features)
    return actor.log_probs(probs, actions).sum(axis=1)


def importance_weight(batch: Batch, actor: DenseNet, cap: float = IMPORTANCE_CAP) -> np.ndarray:
    """
    截断重要性权重 w = min(c, Π_j π_j(a_j) / μ_j(a_j))
    """
    if np.any(batch.behavior_probs <= 0):
        raise ValueError("stored behavior probabilities must be positive")
    log_pi = joint_log_prob(actor, batch.features, batch.actions)
    log_mu = np.log(batch.behavior_probs).sum(axis=1)
    return np.minimum(cap, np.exp(log_pi - log_mu))


def actor_loss_and_grad(agent: DcmacAgent, batch: Batch, advantages: np.ndarray, weights: np.ndarray):
    """
    Actor 损失 (1/N)Σ_i w_i·A_i·Σ_j log π_j(a_ij) 及 logits 梯度

    Returns:
        (损失, logits 梯度, 前向缓存)
    """
    probs, cache = agent.actor.forward(batch.features)
    coeff = weights * advantages / len(batch)
    loss = float(np.sum(coeff * agent.actor.log_probs(probs, batch.actions).sum(axis=1)))
    grad = agent.actor.policy_gradient_logits(probs, batch.actions, coeff)
    return loss, grad, cache


def dcmac_actor_update(agent: DcmacAgent, batch: Batch, advantages: Optional[np.ndarray] = None,
                       weights: Optional[np.ndarray] = None) -> float:
    """
    Actor 一步 Adam 更新（仅 Actor 参数）

    Returns:
        参数梯度的二范数
    """
    if len(batch) == 0:
        raise ValueError("batch must not be empty")
    if advantages is None:
        advantages = dcmac_advantage(batch, agent.critic, agent.gamma)
    if weights is None:
        weights = importance_weight(batch, agent.actor, agent.importance_cap)
    _, grad, cache = actor_loss_and_grad(agent, batch, advantages, weights)
    grads = agent.actor.backward(cache, grad)
    agent.actor_optimizer.step(grads)
    return float(np.sqrt(sum(float((g ** 2).sum()) for g in grads)))


def critic_loss_and_grad(agent: DcmacAgent, batch: Batch, advantages: np.ndarray, weights: np.ndarray):
    """
    Critic 替代损失 (1/N)Σ ½·w·(y − V)²，y = c + γ·V(b') 视为常数

    对 V 的梯度为 −w·A/N。
    """
    v, cache = agent.critic.forward(batch.features)
    n = len(batch)
    loss = float(np.sum(0.5 * weights * advantages ** 2) / n)
    grad = -(weights * advantages) / n
    return loss, grad, cache


def dcmac_critic_update(agent: DcmacAgent, batch: Batch, advantages: Optional[np.ndarray] = None,
                        weights: Optional[np.ndarray] = None) -> float:
    """
    Critic 一步 Adam 更新（仅 Critic 参数）

    Returns:
        更新前的加权替代损失
    """
    if len(batch) == 0:
        raise ValueError("batch must not be empty")
    if advantages is None:
        advantages = dcmac_advantage(batch, agent.critic, agent.gamma)
    if weights is None:
        weights = importance_weight(batch, agent.actor, agent.importance_cap)
    loss, grad, cache = critic_loss_and_grad(agent, batch, advantages, weights)
    agent.critic_optimizer.step(agent.critic.backward(cache, grad))
    return loss
