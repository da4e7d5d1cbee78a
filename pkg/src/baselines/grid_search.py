#!/usr/bin/env python3
"""
Grid Search - 基准策略参数的仿真网格优化

功能：
1. 对参数网格的每个点以 n_eval 个蒙特卡洛回合评估（所有点共享同一组回合种子）
2. 返回费用最小的参数、对应报告及升序费用表；平局按网格枚举（字典序）先者胜出
3. System II 两阶段优化：先优化状态映射（CBM-I / CBM-II），再在最优映射上优化速率阈值（TCBM-I / TCBM-II）
4. System III 定期检测族：每个检测周期分别优化大修 / 更换阈值与小修速率阈值 τ*
"""

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from loguru import logger

from ..environment.simulator import MaintenanceEnv, Policy
from ..evaluation.evaluator import EvaluationReport, evaluate_policy
from .threshold_policy import (
    DEFAULT_PERIODS,
    DEFAULT_RATE_GRID,
    PeriodicLossPolicy,
    all_state_maps,
    cbm_i,
    cbm_ii,
    default_periodic_grid,
    periodic_family_name,
    tcbm_i,
    tcbm_ii,
)


@dataclass
class GridEntry:
    """网格中的一个评估点"""

    params: Dict
    mean: float
    ci: float


@dataclass
class GridResult:
    """
    网格优化结果

    Attributes:
        family: 策略族名称
        best_policy: 最优策略
        best_params: 最优参数
        best_report: 最优策略评估报告
        table: 全部评估点（按平均费用升序，平局保持枚举顺序）
    """

    family: str
    best_policy: Policy
    best_params: Dict
    best_report: EvaluationReport
    table: List[GridEntry] = field(default_factory=list)


def format_value(value) -> str:
    if value is None:
        return "inf"
    if isinstance(value, (tuple, list)):
        return "-".join(str(v) for v in value)
    return str(value)


def format_params(params: Mapping) -> str:
    return ";".join(f"{k}={format_value(v)}" for k, v in params.items())


def grid_points(grid: Mapping[str, Sequence]) -> List[Dict]:
    """按键的给定顺序做笛卡尔积"""
    keys = list(grid.keys())
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


def grid_optimize(family: str, factory: Callable[..., Policy], env: MaintenanceEnv,
                  grid: Mapping[str, Sequence], n_eval: int, seed: int,
                  accept: Optional[Callable[[Dict], bool]] = None) -> GridResult:
    """
    网格优化

    Args:
        family: 策略族名称
        factory: 参数 → 策略
        env: 评估环境
        grid: 参数网格（键的顺序决定字典序）
        n_eval: 每个网格点的评估回合数
        seed: 评估种子（所有点共用）
        accept: 可选的参数过滤条件

    Returns:
        GridResult
    """
    points = [p for p in grid_points(grid) if accept is None or accept(p)]
    if not points:
        raise ValueError(f"{family}: parameter grid is empty")

    entries: List[Tuple[GridEntry, Policy, EvaluationReport]] = []
    best = None
    for params in points:
        policy = factory(**params)
        report = evaluate_policy(policy, env, n_eval, seed)
        entries.append((GridEntry(params, report.mean, report.ci), policy, report))
        if best is None or report.mean < best[0].mean:
            best = entries[-1]
    table = [e for e, _, _ in sorted(entries, key=lambda item: item[0].mean)]

    entry, policy, report = best
    logger.info(f"{family}: 最优参数 {format_params(entry.params)}，费用 {entry.mean:.4f} ± {entry.ci:.4f}"
                f"（共 {len(points)} 个网格点）")
    return GridResult(family, policy, entry.params, report, table)


def optimize_state_map_baselines(env: MaintenanceEnv, n_eval: int, seed: int,
                                 rate_grid: Sequence[Optional[int]] = DEFAULT_RATE_GRID) -> Dict[str, GridResult]:
    """
    System II 基准族两阶段优化

    阶段一：CBM-I 更换阈值与 CBM-II 全部状态映射；阶段二：在各自最优映射上优化 τ*。
    """
    system = env.system
    X = system.num_damage_states
    A = system.components[0].num_actions

    results = {}
    results["CBM-I"] = grid_optimize("CBM-I", lambda replace_state: cbm_i(system, replace_state), env,
                                     {"replace_state": tuple(range(1, X + 1))}, n_eval, seed)
    results["CBM-II"] = grid_optimize("CBM-II", lambda state_map: cbm_ii(system, state_map), env,
                                      {"state_map": all_state_maps(X, A)}, n_eval, seed)

    base_i = tuple(int(a) for a in results["CBM-I"].best_policy.state_actions)
    base_ii = tuple(int(a) for a in results["CBM-II"].best_policy.state_actions)
    results["TCBM-I"] = grid_optimize(
        "TCBM-I", lambda state_map, rate_threshold: tcbm_i(system, state_map, rate_threshold), env,
        {"state_map": (base_i,), "rate_threshold": tuple(rate_grid)}, n_eval, seed)
    results["TCBM-II"] = grid_optimize(
        "TCBM-II", lambda state_map, rate_threshold: tcbm_ii(system, state_map, rate_threshold), env,
        {"state_map": (base_ii,), "rate_threshold": tuple(rate_grid)}, n_eval, seed)
    return results


def optimize_periodic_baselines(env: MaintenanceEnv, n_eval: int, seed: int,
                                periods: Sequence[int] = DEFAULT_PERIODS,
                                grid: Optional[Mapping[str, Sequence]] = None) -> Dict[str, GridResult]:
    """
    System III 定期检测族：每个检测周期一族，大修阈值不高于更换阈值
    """
    system = env.system
    grid = dict(grid) if grid is not None else default_periodic_grid(system)
    results = {}
    for i, period in enumerate(periods):
        name = periodic_family_name(i)

        def factory(major_threshold, replace_threshold, rate_threshold, period=period, name=name):
            return PeriodicLossPolicy(system, period, major_threshold, replace_threshold, rate_threshold, name=name)

        results[name] = grid_optimize(
            name, factory, env, grid, n_eval, seed,
            accept=lambda p: p["major_threshold"] <= p["replace_threshold"],
        )
        results[name].best_params = {"period": period, **results[name].best_params}
    return results
