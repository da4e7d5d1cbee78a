#!/usr/bin/env python3
"""
Experiment Runner - 可复现实验编排

功能：
1. 读取实验配置（环境、智能体、基准、评估、可观测性扫描、主种子、输出目录）
2. 精确解：枚举联合 MDP、值迭代、导出精确解
3. 训练：多次独立训练，保留最终评估费用最低的一次，写出学习曲线与检查点
4. 基准优化：网格搜索并写出优化报告
5. 评估：蒙特卡洛评估全部策略（可归一化），写出评估表与策略实现轨迹
6. 可观测性扫描：不同观测精度下评估各策略，计算信息价值
7. 动作一致率：智能体相对精确贪婪策略

同一配置与种子重复运行得到逐字节一致的 CSV（学习曲线的耗时列仅在 RECORD_WALL_CLOCK 打开时填写）。
"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
from dotenv import load_dotenv
from loguru import logger

from ..agents.dcmac import DcmacAgent
from ..agents.ddqn import DdqnAgent
from ..agents.replay import ExplorationSchedule
from ..agents.trainer import ShapingConfig, ShapingPenalty, TrainingConfig, train
from ..baselines.grid_search import GridResult, optimize_periodic_baselines, optimize_state_map_baselines
from ..environment.config_loader import load_json, load_system, resolve_path
from ..environment.simulator import MaintenanceEnv, Policy
from ..environment.system import SystemModel, input_size
from ..evaluation.evaluator import EvaluationReport, action_agreement, collect_traces, evaluate_policy
from ..neural.optimizer import TwoStageLearningRate
from ..planning.value_iteration import (
    ExactPolicy,
    ExactSolution,
    FlatMDP,
    enumerate_joint,
    export_solution,
    value_iteration_finite,
)
from .export import (
    format_float,
    write_csv,
    write_evaluation,
    write_grid_report,
    write_learning_curve,
    write_traces,
)

# 加载环境变量
load_dotenv()

ALL_STAGES = ("exact", "train", "baselines", "eval", "agreement")

# 派生种子的用途编号
TRAIN_STREAM = 1
AGENT_INIT_STREAM = 2
EVAL_STREAM = 3
BASELINE_STREAM = 4
AGREEMENT_STREAM = 5


def derive_seed(master: int, *keys: int) -> int:
    """由主种子与用途编号派生确定性的子种子"""
    return int(np.random.SeedSequence([int(master), *[int(k) for k in keys]]).generate_state(1)[0])


@dataclass
class ExperimentConfig:
    """
    实验配置

    Attributes:
        name: 实验名称
        environment: 环境定义文件路径
        seed: 主种子（必须显式给出）
        output_dir: 产物目录
        precision: 覆盖观测精度（可选）
        exact: 是否求精确解
        agent: 智能体配置（kind: ddqn / dcmac）
        baselines: 基准配置（family: state_map / periodic）
        evaluation: 评估配置
        observability_sweep: 可观测性扫描的精度列表
    """

    name: str
    environment: str
    seed: int
    output_dir: str
    precision: Optional[float] = None
    exact: bool = False
    agent: Optional[Dict[str, Any]] = None
    baselines: Optional[Dict[str, Any]] = None
    evaluation: Dict[str, Any] = field(default_factory=dict)
    observability_sweep: List[float] = field(default_factory=list)

    @classmethod
    def from_file(cls, path: str, seed: Optional[int] = None, output_dir: Optional[str] = None,
                  episodes: Optional[int] = None) -> "ExperimentConfig":
        """
        读取实验配置；命令行参数覆盖配置值

        Args:
            path: 配置文件路径
            seed: 覆盖主种子
            output_dir: 覆盖输出目录
            episodes: 覆盖训练回合数
        """
        raw = load_json(path)
        base = Path(path).parent
        environment = resolve_path(raw["environment"], base)
        if not environment.exists():
            raise FileNotFoundError(f"Environment file not found: {environment}")

        seed = raw.get("seed") if seed is None else seed
        if seed is None:
            raise ValueError(f"{path}: a master seed is required")
        name = raw.get("name", Path(path).stem)
        default_out = Path(os.getenv("OUTPUT_DIR", "./outputs")) / name
        agent = dict(raw["agent"]) if raw.get("agent") else None
        if agent is not None and episodes is not None:
            agent["training"] = {**agent.get("training", {}), "episodes": int(episodes)}

        return cls(
            name=name,
            environment=str(environment),
            seed=int(seed),
            output_dir=str(output_dir or raw.get("output_dir") or default_out),
            precision=raw.get("precision"),
            exact=bool(raw.get("exact", False)),
            agent=agent,
            baselines=raw.get("baselines"),
            evaluation=dict(raw.get("evaluation", {})),
            observability_sweep=[float(p) for p in raw.get("observability_sweep", [])],
        )

    @property
    def n_eval(self) -> int:
        return int(self.evaluation.get("n_episodes", 1000))

    @property
    def eval_seed(self) -> int:
        return int(self.evaluation.get("seed", derive_seed(self.seed, EVAL_STREAM)))


def training_config(section: Dict[str, Any], checkpoint_dir: Optional[str] = None) -> TrainingConfig:
    """由配置字典构造 TrainingConfig"""
    exploration = section.get("exploration", {})
    shaping = section.get("shaping", {})
    episodes = int(section.get("episodes", 1000))
    return TrainingConfig(
        episodes=episodes,
        batch_size=int(section.get("batch_size", 32)),
        learning_starts=int(section.get("learning_starts", section.get("batch_size", 32))),
        replay_capacity=int(section.get("replay_capacity", 300_000)),
        exploration=ExplorationSchedule(
            initial=float(exploration.get("initial", 1.0)),
            final=float(exploration.get("final", 0.01)),
            anneal_episodes=int(exploration.get("anneal_episodes", max(episodes // 2, 1))),
        ),
        learning_rates={
            key: TwoStageLearningRate(float(v["initial"]), float(v["final"]), int(v["decay_episode"]))
            for key, v in section.get("learning_rates", {}).items()
        },
        eval_every=int(section.get("eval_every", 100)),
        eval_episodes=int(section.get("eval_episodes", 100)),
        eval_seed=int(section.get("eval_seed", 10_000)),
        checkpoint_every=int(section.get("checkpoint_every", 0)),
        checkpoint_dir=checkpoint_dir,
        cost_scale=float(section.get("cost_scale", 1.0)),
        shaping=ShapingConfig(
            episodes=int(shaping.get("episodes", 0)),
            nothing_prob=float(shaping.get("nothing_prob", 0.5)),
            penalties=[ShapingPenalty(int(p["action"]), int(p["max_rate"]), float(p["penalty"]))
                       for p in shaping.get("penalties", [])],
        ),
    )


def build_agent(section: Dict[str, Any], system: SystemModel, rng: np.random.Generator):
    """按配置构造 DDQN 或 DCMAC 智能体"""
    kind = section.get("kind", "dcmac")
    d = input_size(system)
    units = system.unit_action_counts
    init_scale = float(section.get("init_scale", 1.0))
    if kind == "dcmac":
        return DcmacAgent(
            d, units,
            actor_hidden=tuple(section.get("actor_hidden", (40, 40))),
            critic_hidden=tuple(section.get("critic_hidden", (40, 40))),
            gamma=system.discount,
            actor_lr=float(section.get("actor_lr", 1e-4)),
            critic_lr=float(section.get("critic_lr", 1e-3)),
            importance_cap=float(section.get("importance_cap", 2.0)),
            rng=rng,
            init_scale=init_scale,
        )
    if kind == "ddqn":
        return DdqnAgent(
            d, units,
            hidden_sizes=tuple(section.get("hidden", (40, 40))),
            gamma=system.discount,
            lr=float(section.get("lr", 1e-3)),
            target_period=int(section.get("target_period", 13)),
            rng=rng,
            init_scale=init_scale,
        )
    raise ValueError(f"Unknown agent kind: {kind}")


def load_agent(section: Dict[str, Any], directory: Path, gamma: float):
    kind = section.get("kind", "dcmac")
    if not directory.exists():
        raise FileNotFoundError(f"No trained agent at {directory}; run the train stage first")
    return DcmacAgent.load(directory, gamma) if kind == "dcmac" else DdqnAgent.load(directory, gamma)


@dataclass
class ExperimentState:
    """实验过程中的中间结果"""

    mdp: Optional[FlatMDP] = None
    solution: Optional[ExactSolution] = None
    agent: Optional[Policy] = None
    baselines: Dict[str, GridResult] = field(default_factory=dict)

    @property
    def exact_value(self) -> Optional[float]:
        return None if self.solution is None else self.solution.initial_value(self.mdp)


def solve_exact(system: SystemModel, out: Path, state: ExperimentState):
    state.mdp = enumerate_joint(system)
    state.solution = value_iteration_finite(state.mdp)
    export_solution(state.mdp, state.solution, out / "exact_solution.csv")
    write_csv(out / "exact_value.csv", ["system", "num_states", "num_actions", "initial_value"],
              [[system.name, state.mdp.num_states, state.mdp.num_actions, format_float(state.exact_value)]])
    logger.success(f"精确解完成: V_0 = {state.exact_value:.6f}")


def train_agent(config: ExperimentConfig, system: SystemModel, out: Path, state: ExperimentState):
    """多次独立训练，保留最终评估费用最低的一次"""
    runs = int(config.agent.get("runs", 1))
    curves = []
    best: Optional[Tuple[Any, EvaluationReport, int]] = None
    for run in range(runs):
        run_seed = derive_seed(config.seed, TRAIN_STREAM, run)
        agent = build_agent(config.agent, system,
                            np.random.default_rng(derive_seed(config.seed, AGENT_INIT_STREAM, run)))
        env = MaintenanceEnv(system)
        tc = training_config(config.agent.get("training", {}), str(out / "checkpoints" / f"run_{run}"))
        curves.append(train(agent, env, tc, run_seed))
        final = evaluate_policy(agent, env, config.n_eval, config.eval_seed)
        logger.info(f"第 {run} 次训练: 最终评估费用 {final.mean:.4f} ± {final.ci:.4f}")
        if best is None or final.mean < best[1].mean:
            best = (agent, final, run)

    write_learning_curve(out / "learning_curve.csv", curves)
    if best is not None:
        agent, final, run = best
        agent.save(out / "checkpoints" / "final")
        state.agent = agent
        logger.success(f"训练完成: 最优为 run {run}，费用 {final.mean:.4f}")


def optimize_baselines(config: ExperimentConfig, system: SystemModel, out: Path, state: ExperimentState):
    section = config.baselines
    env = MaintenanceEnv(system)
    n_eval = int(section.get("n_eval", 200))
    seed = int(section.get("seed", derive_seed(config.seed, BASELINE_STREAM)))
    family = section.get("family", "state_map")
    if family == "state_map":
        rate_grid = section.get("rate_grid")
        kwargs = {} if rate_grid is None else {"rate_grid": tuple(rate_grid)}
        state.baselines = optimize_state_map_baselines(env, n_eval, seed, **kwargs)
    elif family == "periodic":
        kwargs = {}
        if "periods" in section:
            kwargs["periods"] = tuple(int(p) for p in section["periods"])
        if "grid" in section:
            kwargs["grid"] = {k: tuple(v) for k, v in section["grid"].items()}
        state.baselines = optimize_periodic_baselines(env, n_eval, seed, **kwargs)
    else:
        raise ValueError(f"Unknown baseline family: {family}")
    write_grid_report(out / "baselines_report.csv", list(state.baselines.values()))


def policies_of(state: ExperimentState, observable: bool) -> List[Policy]:
    policies: List[Policy] = []
    if state.solution is not None and observable:
        policies.append(ExactPolicy(state.mdp, state.solution))
    if state.agent is not None:
        policies.append(state.agent)
    policies.extend(r.best_policy for r in state.baselines.values())
    return policies


def normalization_divisor(config: ExperimentConfig, state: ExperimentState,
                          reports: Iterable[EvaluationReport]) -> Optional[float]:
    """精确最优值优先，否则取配置的参考策略的平均费用"""
    if state.exact_value is not None and state.exact_value > 0:
        return state.exact_value
    reference = config.evaluation.get("reference")
    for report in reports:
        if report.policy == reference and report.mean > 0:
            return report.mean
    return None


def evaluate_all(config: ExperimentConfig, system: SystemModel, out: Path, state: ExperimentState):
    env = MaintenanceEnv(system)
    policies = policies_of(state, env.observable)
    if not policies:
        raise ValueError("nothing to evaluate: configure exact, agent or baselines")
    reports = [evaluate_policy(p, env, config.n_eval, config.eval_seed) for p in policies]
    divisor = normalization_divisor(config, state, reports)
    reports = [r.with_divisor(divisor) for r in reports]
    write_evaluation(out / "evaluation.csv", reports, system.observation.precision)
    for report in reports:
        logger.info(f"{report.policy}: 平均费用 {report.mean:.4f} ± {report.ci:.4f}")

    trace_episodes = int(config.evaluation.get("trace_episodes", 1))
    if trace_episodes > 0:
        for policy in policies:
            write_traces(out / "traces" / f"{policy.name}.csv",
                         collect_traces(policy, env, trace_episodes, config.eval_seed))

    if config.observability_sweep:
        observability_sweep(config, out, state, divisor)


def observability_sweep(config: ExperimentConfig, out: Path, state: ExperimentState, divisor: Optional[float]):
    """
    逐观测精度评估各策略并计算信息价值

    信息价值以扫描中精度最高者为参照：VoI(p) = cost(p) − cost(p_max)。
    """
    rows = []
    by_policy: Dict[str, Dict[float, float]] = {}
    for p in config.observability_sweep:
        system = load_system(config.environment, precision=p)
        env = MaintenanceEnv(system)
        for policy in policies_of(state, observable=False):
            report = evaluate_policy(policy, env, config.n_eval, config.eval_seed).with_divisor(divisor)
            rows.append([p, report])
            by_policy.setdefault(report.policy, {})[p] = report.mean
            logger.info(f"p={p}: {report.policy} 平均费用 {report.mean:.4f} ± {report.ci:.4f}")

    write_csv(out / "observability_sweep.csv",
              ["precision", "policy", "mean_cost", "ci_half_width", "normalized_mean"],
              ([format_float(p), r.policy, format_float(r.mean), format_float(r.ci), format_float(r.normalized_mean)]
               for p, r in rows))
    reference = max(config.observability_sweep)
    write_csv(out / "value_of_information.csv",
              ["policy", "precision", "reference_precision", "cost_difference"],
              ([name, format_float(p), format_float(reference), format_float(means[p] - means[reference])]
               for name, means in by_policy.items() for p in config.observability_sweep))


def agreement(config: ExperimentConfig, system: SystemModel, out: Path, state: ExperimentState):
    if state.solution is None or state.agent is None:
        raise ValueError("action agreement needs both the exact solution and a trained agent")
    env = MaintenanceEnv(system)
    n = int(config.evaluation.get("agreement_episodes", config.n_eval))
    seed = derive_seed(config.seed, AGREEMENT_STREAM)
    value = action_agreement(state.agent, ExactPolicy(state.mdp, state.solution), env, n, seed)
    write_csv(out / "agreement.csv", ["policy", "reference", "agreement", "n_episodes"],
              [[state.agent.name, "exact", format_float(value), n]])
    logger.success(f"{state.agent.name} 与精确策略的动作一致率: {value:.4f}")


def default_stages(config: ExperimentConfig) -> set:
    """完整运行时按配置启用的阶段"""
    stages = {"eval"}
    if config.exact:
        stages.add("exact")
    if config.agent:
        stages.add("train")
    if config.baselines:
        stages.add("baselines")
    if config.exact and config.agent:
        stages.add("agreement")
    return stages


def run_experiment(config: ExperimentConfig, stages: Optional[Iterable[str]] = None) -> Path:
    """
    运行实验

    Args:
        config: 实验配置
        stages: 要执行的阶段（缺省按配置启用）：exact、train、baselines、eval、agreement

    Returns:
        产物目录
    """
    stages = default_stages(config) if stages is None else set(stages)
    unknown = stages - set(ALL_STAGES)
    if unknown:
        raise ValueError(f"Unknown stages: {sorted(unknown)}")

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    logger.info(f"实验 {config.name}: 阶段 {sorted(stages)}，输出 {out}")
    system = load_system(config.environment, precision=config.precision)
    state = ExperimentState()

    needs_exact = "exact" in stages or "agreement" in stages or ("eval" in stages and config.exact)
    if needs_exact:
        solve_exact(system, out, state)

    if config.agent:
        if "train" in stages:
            train_agent(config, system, out, state)
        elif stages & {"eval", "agreement"}:
            state.agent = load_agent(config.agent, out / "checkpoints" / "final", system.discount)
    elif "train" in stages:
        logger.warning(f"⚠ {config.name}: 未配置智能体，跳过训练")

    if config.baselines and ("baselines" in stages or "eval" in stages):
        optimize_baselines(config, system, out, state)

    if "eval" in stages:
        evaluate_all(config, system, out, state)
    if "agreement" in stages:
        agreement(config, system, out, state)

    logger.success(f"实验 {config.name} 完成: {out}")
    return out
