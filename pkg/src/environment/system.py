#!/usr/bin/env python3
"""
System Model - 多构件劣化系统

功能：
1. 组织构件、控制单元、系统失效模式、检测经济性、规划期与折现因子
2. 随机推进一步（step）：先施加维修，再按有效转移矩阵抽样下一状态
3. 生成观测（observe）：按带状观测矩阵抽样，未购买检测时返回"无观测"
4. 逐构件贝叶斯信念更新（belief_update）
5. 神经网络输入编码（encode_input）与系统模式惩罚（mode_penalty）

费用规则：总费用 = 惩罚因子 × Σ 直接损失 + Σ 维修费用 + 检测费用，
直接损失与惩罚均按"动作生效后、转移发生前"的状态计算。
"""

import ast
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .component import ComponentModel, ObservationModel, effective_transition_matrix

# 未观测标记
NO_OBSERVATION = -1

# 信念归一化常数下限
BELIEF_NORMALIZER_FLOOR = 0.0


class InconsistentObservationError(ValueError):
    """观测在预测信念下概率为零（模型与观测不一致）"""


@dataclass(frozen=True)
class ControlUnit:
    """
    控制单元：接收独立动作的最小实体

    Attributes:
        name: 单元名称
        components: 该单元控制的构件索引（检测单元为空）
        num_actions: 动作集合大小
        kind: "maintenance" 或 "inspection"
    """

    name: str
    components: Tuple[int, ...]
    num_actions: int
    kind: str = "maintenance"

    @property
    def is_inspection(self) -> bool:
        return self.kind == "inspection"


@dataclass(frozen=True)
class InspectionSpec:
    """检测经济性：optional 为 True 时检测作为单独的控制单元决策"""

    optional: bool = False
    cost: float = 0.0


@dataclass
class SystemState:
    """系统真实状态：各构件损伤状态、劣化速率与全局时间"""

    damage: np.ndarray
    rates: np.ndarray
    time: int = 0

    def copy(self) -> "SystemState":
        return SystemState(damage=self.damage.copy(), rates=self.rates.copy(), time=self.time)


@dataclass
class BeliefState:
    """信念状态：各构件损伤状态的概率向量、已知劣化速率与全局时间"""

    beliefs: np.ndarray
    rates: np.ndarray
    time: int = 0

    def copy(self) -> "BeliefState":
        return BeliefState(beliefs=self.beliefs.copy(), rates=self.rates.copy(), time=self.time)

    def expected_states(self) -> np.ndarray:
        """各构件的期望损伤状态"""
        return self.beliefs @ np.arange(self.beliefs.shape[1], dtype=float)


@dataclass
class StepOutcome:
    """
    单步结果

    Attributes:
        next_state: 转移后的系统状态
        post_action_damage: 动作生效后、转移前的损伤状态
        direct_losses: 各构件直接损失
        penalty_factor: 系统模式惩罚因子
        maintenance_costs: 各构件维修费用
        inspection_cost: 检测费用
        total_cost: 总费用
        repair_success: 各构件维修是否成功
        displacement_ratio: 结构位移比 u/u_y（仅位移模式）
    """

    next_state: SystemState
    post_action_damage: np.ndarray
    direct_losses: np.ndarray
    penalty_factor: float
    maintenance_costs: np.ndarray
    inspection_cost: float
    total_cost: float
    repair_success: np.ndarray
    displacement_ratio: Optional[float] = None


class ModeFunction:
    """系统模式惩罚函数基类，惩罚因子 ≥ 1"""

    supports_batch = True

    def penalty(self, damage: np.ndarray, ratio: Optional[float] = None,
                rng: Optional[np.random.Generator] = None) -> Tuple[float, Optional[float]]:
        """
        计算单个联合损伤状态的惩罚因子

        Returns:
            (惩罚因子, 位移比或 None)
        """
        return float(self.batch_penalty(np.asarray(damage)[np.newaxis, :])[0]), None

    def batch_penalty(self, damage: np.ndarray) -> np.ndarray:
        """对形状为 (M, n) 的联合状态矩阵批量计算惩罚因子"""
        raise NotImplementedError


class NoMode(ModeFunction):
    """无系统模式，惩罚因子恒为 1"""

    def batch_penalty(self, damage: np.ndarray) -> np.ndarray:
        return np.ones(damage.shape[0])


class TopologyFailureMode(ModeFunction):
    """
    拓扑失效模式：布尔表达式描述系统失效（变量为构件失效指示）

    例如 "(c1 or c2) and (c3 or c4) and c5" 表示表达式为真时系统失效。
    """

    _ALLOWED = (ast.Expression, ast.BoolOp, ast.UnaryOp, ast.Name, ast.Load, ast.And, ast.Or, ast.Not)

    def __init__(self, expression: str, component_names: Sequence[str], failure_state: int,
                 failure_penalty: float = 24.0):
        if failure_penalty < 1.0:
            raise ValueError(f"failure_penalty must be >= 1, got {failure_penalty}")
        self.expression = expression
        self.failure_state = int(failure_state)
        self.failure_penalty = float(failure_penalty)
        self._index = {name: i for i, name in enumerate(component_names)}
        self._tree = ast.parse(expression, mode="eval")
        for node in ast.walk(self._tree):
            if not isinstance(node, self._ALLOWED):
                raise ValueError(f"Unsupported syntax in topology expression: {type(node).__name__}")
            if isinstance(node, ast.Name) and node.id not in self._index:
                raise ValueError(f"Unknown component '{node.id}' in topology expression")

    def _evaluate(self, node: ast.AST, failed: np.ndarray) -> np.ndarray:
        if isinstance(node, ast.Expression):
            return self._evaluate(node.body, failed)
        if isinstance(node, ast.Name):
            return failed[:, self._index[node.id]]
        if isinstance(node, ast.UnaryOp):
            return np.logical_not(self._evaluate(node.operand, failed))
        values = [self._evaluate(v, failed) for v in node.values]
        reducer = np.logical_and if isinstance(node.op, ast.And) else np.logical_or
        return reducer.reduce(values)

    def system_failed(self, damage: np.ndarray) -> np.ndarray:
        failed = np.atleast_2d(damage) >= self.failure_state
        return self._evaluate(self._tree, failed)

    def batch_penalty(self, damage: np.ndarray) -> np.ndarray:
        return np.where(self.system_failed(damage), self.failure_penalty, 1.0)


@dataclass(frozen=True)
class KOutOfNRule:
    """k-out-of-n 规则：至少 fraction 比例构件处于 min_state 及以上时触发"""

    min_state: int
    fraction: float
    penalty: float


class KOutOfNMode(ModeFunction):
    """多个 k-out-of-n 模式；同时触发多个模式时取组合惩罚"""

    def __init__(self, rules: Sequence[KOutOfNRule], combined_penalty: Optional[float] = None):
        if not rules:
            raise ValueError("KOutOfNMode needs at least one rule")
        for rule in rules:
            if rule.penalty < 1.0:
                raise ValueError(f"penalty must be >= 1, got {rule.penalty}")
        self.rules = list(rules)
        self.combined_penalty = combined_penalty

    def batch_penalty(self, damage: np.ndarray) -> np.ndarray:
        damage = np.atleast_2d(damage)
        n = damage.shape[1]
        active = np.stack(
            [(damage >= rule.min_state).sum(axis=1) >= rule.fraction * n - 1e-12 for rule in self.rules],
            axis=1,
        )
        factors = np.array([rule.penalty for rule in self.rules])
        penalty = np.where(active, factors, 1.0).max(axis=1)
        if self.combined_penalty is not None:
            penalty = np.where(active.sum(axis=1) > 1, self.combined_penalty, penalty)
        return penalty


class DisplacementMode(ModeFunction):
    """
    结构位移模式：由桁架代理模型计算 u/u_y，并按阈值分段惩罚

    惩罚依赖每步抽样的荷载，无法批量枚举，精确动态规划不支持该模式。
    """

    supports_batch = False

    def __init__(self, surrogate, section_loss: np.ndarray):
        self.surrogate = surrogate
        self.section_loss = np.asarray(section_loss, dtype=float)

    def losses_of(self, damage: np.ndarray) -> np.ndarray:
        return self.section_loss[np.asarray(damage, dtype=int)]

    def penalty(self, damage: np.ndarray, ratio: Optional[float] = None,
                rng: Optional[np.random.Generator] = None) -> Tuple[float, Optional[float]]:
        from ..structure.truss import displacement_ratio_penalty

        if ratio is None:
            load = self.surrogate.load_model.sample(rng) if rng is not None else self.surrogate.load_model.mean
            ratio = self.surrogate.displacement_ratio(self.losses_of(damage), load)
        return displacement_ratio_penalty(ratio), ratio

    def batch_penalty(self, damage: np.ndarray) -> np.ndarray:
        raise ValueError("Displacement-based modes depend on sampled loads and cannot be batch-evaluated")


@dataclass
class SystemModel:
    """
    多构件系统模型

    Attributes:
        name: 系统名称
        components: 构件模型列表
        control_units: 控制单元列表（检测单元放在最后）
        mode_function: 系统模式惩罚函数
        observation: 观测模型
        inspection: 检测经济性
        horizon: 规划期 T（决策步数）
        discount: 折现因子 γ
    """

    name: str
    components: List[ComponentModel]
    control_units: List[ControlUnit]
    mode_function: ModeFunction
    observation: ObservationModel
    inspection: InspectionSpec = field(default_factory=InspectionSpec)
    horizon: int = 50
    discount: float = 0.99
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.discount}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        counts = {c.num_damage_states for c in self.components}
        if len(counts) != 1:
            raise ValueError(f"all components must share one damage-state count, got {sorted(counts)}")
        if self.observation.matrix.shape[0] != self.num_damage_states:
            raise ValueError("observation matrix size does not match the damage-state count")

        owners = np.zeros(self.num_components, dtype=int)
        for unit in self.control_units:
            if unit.is_inspection:
                continue
            for idx in unit.components:
                owners[idx] += 1
                if self.components[idx].num_actions != unit.num_actions:
                    raise ValueError(f"unit {unit.name}: action count differs from component {idx}")
        if np.any(owners != 1):
            raise ValueError("every component must belong to exactly one maintenance control unit")
        inspection_units = [u for u in self.control_units if u.is_inspection]
        if self.inspection.optional != bool(inspection_units):
            raise ValueError("optional inspection requires exactly one inspection control unit")
        if inspection_units and self.control_units[-1] is not inspection_units[0]:
            raise ValueError("the inspection control unit must be the last unit")

        # 构件 → 维修单元索引
        self._unit_of_component = np.zeros(self.num_components, dtype=int)
        for u, unit in enumerate(self.control_units):
            for idx in unit.components:
                self._unit_of_component[idx] = u

    @property
    def num_components(self) -> int:
        return len(self.components)

    @property
    def num_damage_states(self) -> int:
        return self.components[0].num_damage_states

    @property
    def num_units(self) -> int:
        return len(self.control_units)

    @property
    def unit_action_counts(self) -> List[int]:
        return [u.num_actions for u in self.control_units]

    @property
    def partially_observable(self) -> bool:
        return self.inspection.optional or not self.observation.is_perfect

    def initial_state(self) -> SystemState:
        """初始状态：所有构件完好，劣化速率为 0"""
        n = self.num_components
        return SystemState(damage=np.zeros(n, dtype=int), rates=np.zeros(n, dtype=int), time=0)

    def initial_belief(self) -> BeliefState:
        n, X = self.num_components, self.num_damage_states
        beliefs = np.zeros((n, X))
        beliefs[:, 0] = 1.0
        return BeliefState(beliefs=beliefs, rates=np.zeros(n, dtype=int), time=0)

    def validate_actions(self, actions: Sequence[int]) -> np.ndarray:
        actions = np.asarray(actions, dtype=int)
        if actions.shape != (self.num_units,):
            raise ValueError(f"expected {self.num_units} unit actions, got shape {actions.shape}")
        for u, unit in enumerate(self.control_units):
            if not 0 <= actions[u] < unit.num_actions:
                raise ValueError(f"unit {unit.name}: invalid action {actions[u]}")
        return actions

    def component_actions(self, actions: Sequence[int]) -> np.ndarray:
        """将控制单元动作展开为逐构件动作"""
        actions = np.asarray(actions, dtype=int)
        return actions[self._unit_of_component]

    def inspects(self, actions: Sequence[int]) -> bool:
        """本步是否获得观测"""
        if not self.inspection.optional:
            return True
        return int(actions[-1]) == 1

    def next_rates(self, component_actions: np.ndarray, rates: np.ndarray) -> np.ndarray:
        return np.array(
            [comp.next_rate(a, tau) for comp, a, tau in zip(self.components, component_actions, rates)],
            dtype=int,
        )


def mode_penalty(system: SystemModel, damage: Sequence[int], ratio: Optional[float] = None) -> float:
    """
    系统模式惩罚因子

    Args:
        system: 系统模型
        damage: 联合损伤状态向量
        ratio: 可选的位移比 u/u_y（结构系统）

    Returns:
        惩罚因子（≥ 1）
    """
    penalty, _ = system.mode_function.penalty(np.asarray(damage, dtype=int), ratio=ratio)
    return penalty


def _sample_rows(rows: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """按逆累积分布对每一行抽样一个索引"""
    cdf = np.cumsum(rows, axis=1)
    cdf[:, -1] = 1.0
    return (cdf < uniforms[:, np.newaxis]).sum(axis=1)


def step(system: SystemModel, state: SystemState, actions: Sequence[int],
         rng: np.random.Generator,
         load_rng: Optional[np.random.Generator] = None) -> StepOutcome:
    """
    推进系统一步

    Args:
        system: 系统模型
        state: 当前真实状态
        actions: 控制单元动作向量
        rng: 转移随机数流
        load_rng: 结构荷载随机数流（缺省时与 rng 相同）

    Returns:
        StepOutcome 对象
    """
    actions = system.validate_actions(actions)
    comp_actions = system.component_actions(actions)
    n = system.num_components

    success_draws = rng.random(n)
    transition_draws = rng.random(n)

    post_damage = np.empty(n, dtype=int)
    success = np.ones(n, dtype=bool)
    rows = np.empty((n, system.num_damage_states))
    for l, comp in enumerate(system.components):
        a = int(comp_actions[l])
        effect = comp.action_effects[a]
        x, tau = int(state.damage[l]), int(state.rates[l])
        if effect.is_identity:
            post_damage[l] = x
            rows[l] = comp.base_transitions[comp.clamp_rate(tau)][x]
            continue
        success[l] = success_draws[l] < effect.success_prob
        if success[l]:
            post_damage[l] = comp.shifted_state(a, x)
            rows[l] = comp.base_transitions[comp.post_action_rate(a, tau)][post_damage[l]]
        else:
            post_damage[l] = x
            rows[l] = comp.base_transitions[comp.clamp_rate(tau)][x]

    next_damage = _sample_rows(rows, transition_draws)
    next_rates = system.next_rates(comp_actions, state.rates)

    direct_losses = np.array([comp.direct_loss[x] for comp, x in zip(system.components, post_damage)])
    penalty, ratio = system.mode_function.penalty(post_damage, rng=load_rng if load_rng is not None else rng)
    maintenance = np.array([comp.maintenance_cost[a] for comp, a in zip(system.components, comp_actions)])
    inspection_cost = system.inspection.cost if system.inspection.optional and system.inspects(actions) else 0.0
    total = penalty * direct_losses.sum() + maintenance.sum() + inspection_cost

    next_state = SystemState(damage=next_damage, rates=next_rates, time=state.time + 1)
    return StepOutcome(
        next_state=next_state,
        post_action_damage=post_damage,
        direct_losses=direct_losses,
        penalty_factor=float(penalty),
        maintenance_costs=maintenance,
        inspection_cost=float(inspection_cost),
        total_cost=float(total),
        repair_success=success,
        displacement_ratio=ratio,
    )


def observe(system: SystemModel, next_state: SystemState, actions: Sequence[int],
            rng: np.random.Generator) -> np.ndarray:
    """
    生成观测

    Returns:
        每个构件一个观测索引；未购买检测时全部为 NO_OBSERVATION
    """
    n = system.num_components
    # 无论是否检测都消耗同样数量的随机数，保证随机流对齐
    draws = rng.random(n)
    if not system.inspects(actions):
        return np.full(n, NO_OBSERVATION, dtype=int)
    if system.observation.is_perfect:
        return next_state.damage.astype(int).copy()
    rows = system.observation.matrix[next_state.damage]
    return _sample_rows(rows, draws)


def predict_belief(system: SystemModel, belief: BeliefState, actions: Sequence[int]) -> np.ndarray:
    """预测步：b' = bᵀ · 有效转移矩阵（逐构件）"""
    comp_actions = system.component_actions(system.validate_actions(actions))
    predicted = np.empty_like(belief.beliefs)
    for l, comp in enumerate(system.components):
        M = effective_transition_matrix(comp, int(comp_actions[l]), int(belief.rates[l]))
        predicted[l] = belief.beliefs[l] @ M
    return predicted


def belief_update(belief: BeliefState, actions: Sequence[int], observations: Sequence[int],
                  system: SystemModel) -> BeliefState:
    """
    逐构件贝叶斯信念更新

    Args:
        belief: 当前信念
        actions: 控制单元动作向量
        observations: 观测向量（NO_OBSERVATION 表示无观测）
        system: 系统模型

    Returns:
        更新后的信念

    Raises:
        InconsistentObservationError: 观测在预测信念下不可能出现
    """
    actions = system.validate_actions(actions)
    observations = np.asarray(observations, dtype=int)
    predicted = predict_belief(system, belief, actions)
    comp_actions = system.component_actions(actions)
    O = system.observation.matrix

    posterior = predicted.copy()
    for l in range(system.num_components):
        o = int(observations[l])
        if o == NO_OBSERVATION:
            continue
        weighted = predicted[l] * O[:, o]
        normalizer = weighted.sum()
        if normalizer <= BELIEF_NORMALIZER_FLOOR:
            raise InconsistentObservationError(
                f"component {l}: observation {o} has zero probability under the predicted belief"
            )
        posterior[l] = weighted / normalizer

    # 消除浮点误差
    posterior /= posterior.sum(axis=1, keepdims=True)
    return BeliefState(
        beliefs=posterior,
        rates=system.next_rates(comp_actions, belief.rates),
        time=belief.time + 1,
    )


def one_hot_belief(system: SystemModel, state: SystemState) -> BeliefState:
    """完全可观测时的信念（独热向量）"""
    beliefs = np.zeros((system.num_components, system.num_damage_states))
    beliefs[np.arange(system.num_components), state.damage] = 1.0
    return BeliefState(beliefs=beliefs, rates=state.rates.copy(), time=state.time)


def input_size(system: SystemModel) -> int:
    """编码输入向量长度"""
    rate_features = sum(1 for comp in system.components if not comp.is_stationary)
    return system.num_components * system.num_damage_states + rate_features + 1


def encode_input(belief_or_state, system: SystemModel) -> np.ndarray:
    """
    编码神经网络输入

    拼接逐构件独热向量（MDP）或信念向量（POMDP）、非平稳构件的 τ/T 以及全局 t/T，
    所有元素位于 [0, 1]。

    Args:
        belief_or_state: BeliefState 或 SystemState
        system: 系统模型

    Returns:
        一维特征向量
    """
    if isinstance(belief_or_state, SystemState):
        belief_or_state = one_hot_belief(system, belief_or_state)

    T = float(system.horizon)
    parts = [belief_or_state.beliefs.reshape(-1)]
    stationary = np.array([comp.is_stationary for comp in system.components])
    if not stationary.all():
        rates = belief_or_state.rates[~stationary].astype(float)
        parts.append(np.clip(rates / T, 0.0, 1.0))
    parts.append(np.array([min(belief_or_state.time / T, 1.0)]))
    return np.concatenate(parts)


def joint_belief_from_marginals(beliefs: np.ndarray) -> np.ndarray:
    """由逐构件信念构造联合信念（独立乘积），用于校验"""
    joint = np.ones(1)
    for b in beliefs:
        joint = np.kron(joint, b)
    return joint


def describe(system: SystemModel) -> Dict:
    """系统摘要（日志与报告使用）"""
    summary = {
        "name": system.name,
        "components": system.num_components,
        "damage_states": system.num_damage_states,
        "units": system.num_units,
        "unit_actions": system.unit_action_counts,
        "horizon": system.horizon,
        "discount": system.discount,
        "precision": system.observation.precision,
        "optional_inspection": system.inspection.optional,
    }
    logger.debug(f"系统概要: {summary}")
    return summary
