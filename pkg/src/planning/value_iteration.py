#!/usr/bin/env python3
"""
Value Iteration - 有限规划期精确动态规划

功能：
1. 枚举联合 MDP（构件状态乘积空间，非平稳构件含劣化速率），转移矩阵为逐构件矩阵的 Kronecker 积
2. 按系统费用规则计算联合期望费用（含维修成功/失败的组合）
3. 逆向归纳求解各时间步的价值表与贪婪策略（最小费用，平局取最小动作索引）
4. 给定策略表的精确评估
5. 导出精确解 CSV，并提供可供评估器使用的贪婪策略对象

约定：决策步 t = 0..T-1，V_T ≡ 0，第 t 步费用按 γ^t 折现。
"""

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from loguru import logger

from ..environment.component import effective_transition_matrix
from ..environment.simulator import DecisionContext, Policy
from ..environment.system import SystemModel, SystemState, encode_input, one_hot_belief

DEFAULT_PAIR_CAP = 1_000_000
MAX_STOCHASTIC_COMPONENTS = 16


class StateSpaceTooLargeError(ValueError):
    """联合状态-动作对数量超过上限"""


@dataclass
class FlatMDP:
    """
    展平的联合 MDP

    Attributes:
        system: 源系统模型
        component_sizes: 各构件子状态数（|X| 或 |X|·R）
        unit_sizes: 各控制单元动作数
        transitions: 每个联合动作一个稀疏行随机矩阵
        costs: (S, A) 期望单步费用
        horizon: 规划期 T
        discount: 折现因子 γ
    """

    system: SystemModel
    component_sizes: List[int]
    unit_sizes: List[int]
    transitions: List[sp.csr_matrix]
    costs: np.ndarray
    horizon: int
    discount: float

    @property
    def num_states(self) -> int:
        return int(np.prod(self.component_sizes))

    @property
    def num_actions(self) -> int:
        return int(np.prod(self.unit_sizes))

    @property
    def tracks_rates(self) -> List[bool]:
        return [size > self.system.num_damage_states for size in self.component_sizes]

    def state_tuple(self, index: int):
        """联合状态索引 → (损伤状态向量, 速率向量)"""
        subs = np.unravel_index(int(index), self.component_sizes)
        X = self.system.num_damage_states
        damage = np.array([s % X for s in subs], dtype=int)
        rates = np.array([s // X for s in subs], dtype=int)
        return damage, rates

    def state_index(self, damage: Sequence[int], rates: Sequence[int]) -> int:
        """(损伤状态向量, 速率向量) → 联合状态索引"""
        X = self.system.num_damage_states
        subs = []
        for l, (x, tau) in enumerate(zip(damage, rates)):
            if self.tracks_rates[l]:
                tau = self.system.components[l].clamp_rate(int(tau))
                subs.append(tau * X + int(x))
            else:
                subs.append(int(x))
        return int(np.ravel_multi_index(subs, self.component_sizes))

    def action_tuple(self, index: int) -> np.ndarray:
        return np.array(np.unravel_index(int(index), self.unit_sizes), dtype=int)

    def action_index(self, actions: Sequence[int]) -> int:
        return int(np.ravel_multi_index([int(a) for a in actions], self.unit_sizes))

    @property
    def initial_state(self) -> int:
        n = self.system.num_components
        return self.state_index(np.zeros(n, dtype=int), np.zeros(n, dtype=int))


@dataclass
class ExactSolution:
    """
    精确解

    Attributes:
        values: (T+1, S) 价值表，values[T] ≡ 0
        policy: (T, S) 贪婪联合动作索引
    """

    values: np.ndarray
    policy: np.ndarray

    def initial_value(self, mdp: FlatMDP) -> float:
        return float(self.values[0, mdp.initial_state])


def component_matrix(system: SystemModel, l: int, action: int, track_rate: bool) -> np.ndarray:
    """单个构件在子状态空间上的转移矩阵（非平稳构件子状态为 τ·|X| + x）"""
    comp = system.components[l]
    X = comp.num_damage_states
    if not track_rate:
        return effective_transition_matrix(comp, action, 0)
    R = comp.max_rate + 1
    M = np.zeros((X * R, X * R))
    for tau in range(R):
        E = effective_transition_matrix(comp, action, tau)
        tau_next = comp.next_rate(action, tau)
        M[tau * X:(tau + 1) * X, tau_next * X:(tau_next + 1) * X] = E
    return M


def _post_action_options(system: SystemModel, l: int, action: int, damage: np.ndarray):
    """单个构件动作生效后的状态选项：[(概率, 动作后状态向量)]"""
    comp = system.components[l]
    effect = comp.action_effects[action]
    if effect.is_identity:
        return [(1.0, damage)]
    if effect.reset:
        success_state = np.zeros_like(damage)
    else:
        success_state = np.maximum(0, damage - effect.state_shift)
    p = effect.success_prob
    if p >= 1.0:
        return [(1.0, success_state)]
    if p <= 0.0:
        return [(1.0, damage)]
    return [(p, success_state), (1.0 - p, damage)]


def expected_costs(system: SystemModel, damage: np.ndarray, comp_actions: np.ndarray,
                   inspection_cost: float = 0.0) -> np.ndarray:
    """
    对一组联合损伤状态批量计算期望单步费用

    Args:
        system: 系统模型
        damage: (M, n) 联合损伤状态
        comp_actions: 逐构件动作
        inspection_cost: 检测费用

    Returns:
        (M,) 期望费用
    """
    n = system.num_components
    options = [_post_action_options(system, l, int(comp_actions[l]), damage[:, l]) for l in range(n)]
    stochastic = [l for l in range(n) if len(options[l]) > 1]
    if len(stochastic) > MAX_STOCHASTIC_COMPONENTS:
        raise StateSpaceTooLargeError(f"{len(stochastic)} components with probabilistic repairs in one action")

    maintenance = sum(system.components[l].maintenance_cost[comp_actions[l]] for l in range(n))
    total = np.zeros(damage.shape[0])
    for combo in itertools.product(*[range(len(options[l])) for l in range(n)]):
        prob = 1.0
        post = np.empty_like(damage)
        for l, choice in enumerate(combo):
            p, states = options[l][choice]
            prob *= p
            post[:, l] = states
        losses = np.zeros(damage.shape[0])
        for l, comp in enumerate(system.components):
            losses += comp.direct_loss[post[:, l]]
        total += prob * system.mode_function.batch_penalty(post) * losses
    return total + maintenance + inspection_cost


def enumerate_joint(system: SystemModel, pair_cap: int = DEFAULT_PAIR_CAP) -> FlatMDP:
    """
    枚举联合 MDP

    Args:
        system: 系统模型（不支持可选检测与结构位移模式）
        pair_cap: 状态-动作对上限

    Returns:
        FlatMDP 对象

    Raises:
        StateSpaceTooLargeError: 超过上限
        ValueError: 系统包含无法精确枚举的特性
    """
    if system.inspection.optional:
        raise ValueError("exact enumeration does not support optional inspection")
    if not system.mode_function.supports_batch:
        raise ValueError("exact enumeration does not support load-dependent system modes")

    X = system.num_damage_states
    track = [not comp.is_stationary for comp in system.components]
    sizes = [X * (comp.max_rate + 1) if t else X for comp, t in zip(system.components, track)]
    unit_sizes = system.unit_action_counts
    num_states = int(np.prod(sizes, dtype=float))
    num_actions = int(np.prod(unit_sizes, dtype=float))
    if num_states * num_actions > pair_cap:
        raise StateSpaceTooLargeError(
            f"{system.name}: {num_states} states x {num_actions} actions exceeds cap {pair_cap}"
        )
    logger.info(f"枚举 {system.name} 联合 MDP: {num_states} 个状态，{num_actions} 个动作")

    cache = {}
    for l in range(system.num_components):
        for a in range(system.components[l].num_actions):
            cache[(l, a)] = sp.csr_matrix(component_matrix(system, l, a, track[l]))

    subs = np.array(np.unravel_index(np.arange(num_states), sizes)).T
    damage = subs % X

    transitions = []
    costs = np.empty((num_states, num_actions))
    for a_idx in range(num_actions):
        unit_actions = np.array(np.unravel_index(a_idx, unit_sizes), dtype=int)
        comp_actions = system.component_actions(unit_actions)
        joint = cache[(0, int(comp_actions[0]))]
        for l in range(1, system.num_components):
            joint = sp.kron(joint, cache[(l, int(comp_actions[l]))], format="csr")
        transitions.append(sp.csr_matrix(joint))
        costs[:, a_idx] = expected_costs(system, damage, comp_actions)

    mdp = FlatMDP(
        system=system,
        component_sizes=sizes,
        unit_sizes=unit_sizes,
        transitions=transitions,
        costs=costs,
        horizon=system.horizon,
        discount=system.discount,
    )
    logger.success(f"✓ 联合 MDP 枚举完成，非零转移 {sum(P.nnz for P in transitions)} 个")
    return mdp


def value_iteration_finite(mdp: FlatMDP, maximize: bool = False) -> ExactSolution:
    """
    有限规划期逆向归纳

    V_t(s) = min_a { c(s,a) + γ Σ p(s'|s,a) V_{t+1}(s') }，平局取最小动作索引。
    maximize=True 时把 costs 视为奖励取最大。
    """
    T, S, A = mdp.horizon, mdp.num_states, mdp.num_actions
    values = np.zeros((T + 1, S))
    policy = np.zeros((T, S), dtype=np.int64)
    for t in range(T - 1, -1, -1):
        Q = mdp.costs + mdp.discount * np.column_stack([P @ values[t + 1] for P in mdp.transitions])
        policy[t] = Q.argmax(axis=1) if maximize else Q.argmin(axis=1)
        values[t] = Q[np.arange(S), policy[t]]
    logger.debug(f"值迭代完成: 初始状态价值 {values[0, mdp.initial_state]:.6f}")
    return ExactSolution(values=values, policy=policy)


def bellman_residual(mdp: FlatMDP, solution: ExactSolution) -> float:
    """各时间步、各状态的最大 Bellman 残差"""
    worst = 0.0
    for t in range(mdp.horizon):
        Q = mdp.costs + mdp.discount * np.column_stack([P @ solution.values[t + 1] for P in mdp.transitions])
        worst = max(worst, float(np.abs(Q.min(axis=1) - solution.values[t]).max()))
    return worst


def evaluate_policy_exact(mdp: FlatMDP, policy: Union[np.ndarray, Callable[[int, int], int]],
                          return_table: bool = False):
    """
    给定策略的精确期望折现费用（从初始状态出发）

    Args:
        mdp: 联合 MDP
        policy: (T, S) 联合动作索引表，或可调用对象 (t, s) → 动作索引
        return_table: 是否同时返回价值表
    """
    T, S = mdp.horizon, mdp.num_states
    if callable(policy):
        table = np.array([[policy(t, s) for s in range(S)] for t in range(T)], dtype=np.int64)
    else:
        table = np.asarray(policy, dtype=np.int64)
    if table.shape != (T, S):
        raise ValueError(f"policy table must have shape {(T, S)}, got {table.shape}")

    values = np.zeros((T + 1, S))
    rows = np.arange(S)
    for t in range(T - 1, -1, -1):
        expected_next = np.empty(S)
        for a in np.unique(table[t]):
            mask = table[t] == a
            expected_next[mask] = (mdp.transitions[a] @ values[t + 1])[mask]
        values[t] = mdp.costs[rows, table[t]] + mdp.discount * expected_next
    value = float(values[0, mdp.initial_state])
    return (value, values) if return_table else value


def state_context(mdp: FlatMDP, t: int, s: int) -> DecisionContext:
    """完全可观测下联合状态对应的决策上下文"""
    damage, rates = mdp.state_tuple(s)
    rates = np.where(mdp.tracks_rates, rates, 0)
    state = SystemState(damage=damage, rates=rates, time=t)
    belief = one_hot_belief(mdp.system, state)
    return DecisionContext(
        time=t,
        rates=rates.copy(),
        belief=belief.beliefs,
        observed_states=damage.copy(),
        features=encode_input(belief, mdp.system),
        state=state,
    )


def tabulate_policy(mdp: FlatMDP, policy: Policy) -> np.ndarray:
    """将任意确定性策略在全部 (t, s) 上制表"""
    table = np.empty((mdp.horizon, mdp.num_states), dtype=np.int64)
    for t in range(mdp.horizon):
        for s in range(mdp.num_states):
            table[t, s] = mdp.action_index(policy.act(state_context(mdp, t, s)))
    return table


class ExactPolicy(Policy):
    """精确解对应的贪婪策略（需要真实状态）"""

    name = "exact"

    def __init__(self, mdp: FlatMDP, solution: ExactSolution):
        self.mdp = mdp
        self.solution = solution

    def act(self, context: DecisionContext) -> np.ndarray:
        if context.state is None:
            raise ValueError("exact policy needs the true system state (fully observable environment)")
        t = min(context.time, self.mdp.horizon - 1)
        s = self.mdp.state_index(context.state.damage, context.state.rates)
        return self.mdp.action_tuple(self.solution.policy[t, s])


def export_solution(mdp: FlatMDP, solution: ExactSolution, path: str,
                    times: Optional[Sequence[int]] = None) -> Path:
    """
    导出精确解：state_index, t, damage_states, rates, value, greedy_action

    元组字段以 "|" 分隔，浮点数保留 17 位有效数字。
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    times = range(mdp.horizon) if times is None else times
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["state_index", "t", "damage_states", "rates", "value", "greedy_action"])
        for t in times:
            for s in range(mdp.num_states):
                damage, rates = mdp.state_tuple(s)
                writer.writerow([
                    s,
                    t,
                    "|".join(str(x) for x in damage),
                    "|".join(str(r) for r in rates),
                    f"{solution.values[t, s]:.17g}",
                    "|".join(str(a) for a in mdp.action_tuple(solution.policy[t, s])),
                ])
    logger.info(f"✓ 精确解已导出: {path}")
    return path
