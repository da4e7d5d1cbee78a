#!/usr/bin/env python3
"""
CSV Export - 实验产物写出

功能：
1. 固定列顺序的 CSV 写出，浮点数保留 17 位有效数字
2. 学习曲线、评估报告、动作一致率、策略实现轨迹、基准优化报告、可观测性扫描
"""

import csv
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

from loguru import logger

from ..agents.trainer import CurvePoint
from ..baselines.grid_search import GridResult, format_params
from ..environment.simulator import TraceRow
from ..evaluation.evaluator import EvaluationReport

CURVE_COLUMNS = ["run", "episode", "mean_cost", "ci_half_width", "epsilon", "wall_clock_s"]
EVALUATION_COLUMNS = ["policy", "precision", "mean_cost", "ci_half_width", "normalized_mean",
                      "normalized_ci", "n_episodes"]
TRACE_COLUMNS = ["episode", "t", "component", "rate", "true_state", "expected_state", "observation",
                 "action", "inspected", "step_cost"]
GRID_COLUMNS = ["family", "parameters", "mean_cost", "ci_half_width"]


def format_float(value: Optional[float]) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
            count += 1
    logger.debug(f"已写入 {count} 行: {path}")
    return path


def write_learning_curve(path, curves: List[List[CurvePoint]]) -> Path:
    rows = (
        [run, p.episode, format_float(p.mean), format_float(p.ci), format_float(p.epsilon),
         format_float(p.wall_clock)]
        for run, curve in enumerate(curves) for p in curve
    )
    return write_csv(path, CURVE_COLUMNS, rows)


def evaluation_row(report: EvaluationReport, precision: Optional[float]) -> List[str]:
    return [report.policy, format_float(precision), format_float(report.mean), format_float(report.ci),
            format_float(report.normalized_mean), format_float(report.normalized_ci), report.n_episodes]


def write_evaluation(path, reports: Sequence[EvaluationReport], precision: Optional[float] = None) -> Path:
    return write_csv(path, EVALUATION_COLUMNS, (evaluation_row(r, precision) for r in reports))


def write_traces(path, rows: Sequence[TraceRow]) -> Path:
    return write_csv(path, TRACE_COLUMNS, (
        [r.episode, r.time, r.component, r.rate, r.true_state, format_float(r.expected_state),
         "" if r.observation is None else r.observation, r.action, r.inspected, format_float(r.step_cost)]
        for r in rows
    ))


def write_grid_report(path, results: Sequence[GridResult]) -> Path:
    """基准优化报告：每族全部网格点，按平均费用升序"""
    return write_csv(path, GRID_COLUMNS, (
        [result.family, format_params(entry.params), format_float(entry.mean), format_float(entry.ci)]
        for result in results for entry in result.table
    ))
