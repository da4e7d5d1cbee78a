#!/usr/bin/env python3
"""
Policy Evaluator - 蒙特卡洛策略评估

功能：
1. 以确定性方式执行策略，累计折现费用（第 t 步费用乘 γ^t）
2. 多回合评估，报告均值与 95% 置信区间半宽 1.96·s/√N
3. 可选归一化除数（精确最优值或参考策略）
4. 动作一致率：沿策略 A 的轨迹逐控制单元比较 A 与 B 的决策
5. 可选记录策略实现轨迹（逐构件）

第 i 个评估回合的随机流由 SeedSequence([seed, i]) 派生，不同策略在同一种子下共享随机数。
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from ..environment.simulator import MaintenanceEnv, Policy, TraceRow

CI_Z = 1.96


@dataclass
class EvaluationReport:
    """
    评估结果

    Attributes:
        policy: 策略名称
        mean: 平均折现费用
        ci: 95% 置信区间半宽
        costs: 逐回合折现费用
        divisor: 归一化除数（可选）
    """

    policy: str
    mean: float
    ci: float
    costs: np.ndarray = field(repr=False)
    divisor: Optional[float] = None

    @property
    def n_episodes(self) -> int:
        return int(self.costs.shape[0])

    @property
    def normalized_mean(self) -> Optional[float]:
        return None if self.divisor is None else self.mean / self.divisor

    @property
    def normalized_ci(self) -> Optional[float]:
        return None if self.divisor is None else self.ci / self.divisor

    def with_divisor(self, divisor: Optional[float]) -> "EvaluationReport":
        if divisor is not None and divisor <= 0:
            raise ValueError(f"normalization divisor must be positive, got {divisor}")
        return EvaluationReport(self.policy, self.mean, self.ci, self.costs, divisor)


def confidence_half_width(costs: np.ndarray) -> float:
    """高斯 95% 置信区间半宽；样本方差为 0 时返回 0"""
    costs = np.asarray(costs, dtype=float)
    if costs.shape[0] < 2:
        raise ValueError("need at least two samples for a confidence interval")
    return float(CI_Z * costs.std(ddof=1) / np.sqrt(costs.shape[0]))


def episode_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(index)])


def rollout(policy: Policy, env: MaintenanceEnv, seed, episode: int = 0,
            record_trace: bool = False) -> Tuple[float, List[TraceRow]]:
    """
    执行一个完整回合

    Args:
        policy: 确定性策略
        env: 环境
        seed: 回合种子
        episode: 写入轨迹的回合编号
        record_trace: 是否记录逐构件轨迹

    Returns:
        (折现总费用, 轨迹行)
    """
    context = env.reset(seed)
    gamma = env.discount
    total = 0.0
    rows: List[TraceRow] = []
    done = False
    while not done:
        actions = np.asarray(policy.act(context), dtype=int)
        pre_state = env.state.copy()
        outcome, next_context, done = env.step(actions)
        total += gamma ** context.time * outcome.total_cost
        if record_trace:
            rows.extend(env.trace_rows(episode, context, pre_state, actions, outcome))
        context = next_context
    return total, rows


def evaluate_policy(policy: Policy, env: MaintenanceEnv, n_episodes: int, seed: int,
                    divisor: Optional[float] = None) -> EvaluationReport:
    """
    蒙特卡洛评估

    Args:
        policy: 确定性策略
        env: 环境
        n_episodes: 回合数（≥ 2）
        seed: 评估种子
        divisor: 归一化除数

    Returns:
        EvaluationReport
    """
    if n_episodes < 2:
        raise ValueError(f"n_episodes must be at least 2, got {n_episodes}")
    costs = np.array([rollout(policy, env, episode_seed(seed, i))[0] for i in range(n_episodes)])
    report = EvaluationReport(
        policy=getattr(policy, "name", type(policy).__name__),
        mean=float(costs.mean()),
        ci=confidence_half_width(costs),
        costs=costs,
    ).with_divisor(divisor)
    logger.debug(f"{report.policy}: 平均费用 {report.mean:.4f} ± {report.ci:.4f}（{n_episodes} 回合）")
    return report


def collect_traces(policy: Policy, env: MaintenanceEnv, n_episodes: int, seed: int) -> List[TraceRow]:
    """记录若干回合的策略实现轨迹"""
    rows: List[TraceRow] = []
    for i in range(n_episodes):
        rows.extend(rollout(policy, env, episode_seed(seed, i), episode=i, record_trace=True)[1])
    return rows


def action_agreement(policy_a: Policy, policy_b: Policy, env: MaintenanceEnv,
                     n_episodes: int, seed: int) -> float:
    """
    动作一致率

    沿 policy_a 的轨迹，在每个访问到的决策点比较两者的动作向量，逐控制单元计数。

    Returns:
        一致决策占比 ∈ [0, 1]
    """
    if n_episodes < 1:
        raise ValueError(f"n_episodes must be positive, got {n_episodes}")
    matched = 0
    total = 0
    for i in range(n_episodes):
        context = env.reset(episode_seed(seed, i))
        done = False
        while not done:
            a = np.asarray(policy_a.act(context), dtype=int)
            b = np.asarray(policy_b.act(context), dtype=int)
            matched += int(np.sum(a == b))
            total += a.shape[0]
            _, context, done = env.step(a)
    return matched / total
