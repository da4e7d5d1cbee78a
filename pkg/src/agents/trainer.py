#!/usr/bin/env python3
"""
Trainer - DDQN / DCMAC 训练循环

功能：
1. 逐回合执行：行为策略选动作 → 环境推进（含信念更新）→ 写入经验池 → 抽样批次 → 更新网络
2. ε 线性退火、两阶段学习率
3. 训练费用缩放（cost / cost_scale），报告费用不缩放
4. 早期训练塑形（可选）：优先“不作为”的探索分布，以及对指定（动作, 速率）组合的小额惩罚
5. 周期性贪婪评估形成学习曲线，周期性保存检查点
6. 损失出现非有限值时中止训练
"""

import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from ..environment.simulator import MaintenanceEnv
from ..evaluation.evaluator import evaluate_policy
from ..neural.optimizer import TwoStageLearningRate
from .replay import DEFAULT_CAPACITY, ExplorationSchedule, ReplayBuffer, TransitionRecord


class TrainingDivergenceError(RuntimeError):
    """训练损失出现非有限值"""


@dataclass(frozen=True)
class ShapingPenalty:
    """对速率不超过 max_rate 的构件执行 action 时追加的训练惩罚"""

    action: int
    max_rate: int
    penalty: float


@dataclass
class ShapingConfig:
    """
    早期训练塑形

    Attributes:
        episodes: 塑形持续的回合数（0 表示关闭）
        nothing_prob: 探索分布中“不作为”（动作 0）的概率
        penalties: 训练惩罚规则
    """

    episodes: int = 0
    nothing_prob: float = 0.5
    penalties: List[ShapingPenalty] = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.nothing_prob <= 1.0:
            raise ValueError(f"nothing_prob must lie in [0, 1], got {self.nothing_prob}")

    def active(self, episode: int) -> bool:
        return episode < self.episodes

    def explore_probs(self, unit_sizes: Sequence[int]) -> List[np.ndarray]:
        probs = []
        for k in unit_sizes:
            if k == 1:
                probs.append(np.ones(1))
                continue
            q = np.full(k, (1.0 - self.nothing_prob) / (k - 1))
            q[0] = self.nothing_prob
            probs.append(q)
        return probs

    def penalty(self, component_actions: np.ndarray, rates: np.ndarray) -> float:
        total = 0.0
        for rule in self.penalties:
            hit = (component_actions == rule.action) & (rates <= rule.max_rate)
            total += rule.penalty * int(hit.sum())
        return total


@dataclass
class TrainingConfig:
    """训练超参数"""

    episodes: int = 1000
    batch_size: int = 32
    learning_starts: int = 32
    replay_capacity: int = DEFAULT_CAPACITY
    exploration: ExplorationSchedule = field(default_factory=ExplorationSchedule)
    learning_rates: Dict[str, TwoStageLearningRate] = field(default_factory=dict)
    eval_every: int = 100
    eval_episodes: int = 100
    eval_seed: int = 10_000
    checkpoint_every: int = 0
    checkpoint_dir: Optional[str] = None
    cost_scale: float = 1.0
    shaping: ShapingConfig = field(default_factory=ShapingConfig)

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError(f"episodes must be non-negative, got {self.episodes}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if self.cost_scale <= 0:
            raise ValueError(f"cost_scale must be positive, got {self.cost_scale}")


@dataclass
class CurvePoint:
    """学习曲线上的一个评估点"""

    episode: int
    mean: float
    ci: float
    epsilon: float
    wall_clock: Optional[float] = None


def record_wall_clock() -> bool:
    return os.getenv("RECORD_WALL_CLOCK", "false").strip().lower() in ("1", "true", "yes")


def _check_finite(stats: Dict[str, float], episode: int, update_step: int):
    bad = {k: v for k, v in stats.items() if not np.isfinite(v)}
    if bad:
        raise TrainingDivergenceError(f"non-finite loss at episode {episode}, update {update_step}: {bad}")


def train(agent, env: MaintenanceEnv, config: TrainingConfig, seed: int) -> List[CurvePoint]:
    """
    训练智能体

    Args:
        agent: DdqnAgent 或 DcmacAgent
        env: 训练环境
        config: 训练配置
        seed: 主种子

    Returns:
        学习曲线
    """
    unit_sizes = env.system.unit_action_counts
    if list(agent.unit_sizes) != list(unit_sizes):
        raise ValueError(f"agent action heads {agent.unit_sizes} do not match control units {unit_sizes}")

    behavior_seq, replay_seq = np.random.SeedSequence(seed).spawn(2)
    behavior_rng = np.random.default_rng(behavior_seq)
    replay_rng = np.random.default_rng(replay_seq)
    buffer = ReplayBuffer(config.replay_capacity)
    curve: List[CurvePoint] = []
    update_step = 0
    started = time.perf_counter()
    with_clock = record_wall_clock()

    logger.info(f"开始训练 {agent.name}: {config.episodes} 回合, 系统 {env.system.name}")
    for episode in range(config.episodes):
        epsilon = config.exploration.value(episode)
        agent.set_learning_rates({k: s.value(episode) for k, s in config.learning_rates.items()})
        shaping = config.shaping.active(episode)
        explore_probs = config.shaping.explore_probs(unit_sizes) if shaping else None

        context = env.reset(np.random.SeedSequence([seed, episode]))
        done = False
        while not done:
            actions, mu = agent.behave(context.features, epsilon, behavior_rng, explore_probs)
            outcome, next_context, done = env.step(actions)
            cost = outcome.total_cost
            if shaping:
                cost += config.shaping.penalty(env.system.component_actions(actions), context.rates)
            buffer.add(TransitionRecord(
                features=context.features,
                actions=actions,
                behavior_probs=mu,
                cost=cost / config.cost_scale,
                next_features=next_context.features,
                terminal=done,
            ))
            if len(buffer) >= max(config.learning_starts, 1):
                stats = agent.update(buffer.sample(config.batch_size, replay_rng))
                update_step += 1
                _check_finite(stats, episode, update_step)
            context = next_context

        if config.eval_every > 0 and (episode + 1) % config.eval_every == 0:
            report = evaluate_policy(agent, env, config.eval_episodes, config.eval_seed)
            point = CurvePoint(
                episode=episode + 1,
                mean=report.mean,
                ci=report.ci,
                epsilon=epsilon,
                wall_clock=time.perf_counter() - started if with_clock else None,
            )
            curve.append(point)
            logger.info(f"第 {point.episode} 回合: 费用 {point.mean:.4f} ± {point.ci:.4f}，ε={epsilon:.3f}")

        if config.checkpoint_every > 0 and config.checkpoint_dir and (episode + 1) % config.checkpoint_every == 0:
            path = Path(config.checkpoint_dir) / f"episode_{episode + 1:06d}"
            agent.save(path, behavior_rng)
            logger.debug(f"检查点已保存: {path}")

    logger.success(f"{agent.name} 训练完成: {config.episodes} 回合, {update_step} 次更新")
    return curve
