#!/usr/bin/env python3
"""
Config Loader - 环境定义文件加载器

功能：
1. 读取 JSON 环境定义（状态数、转移矩阵端点、动作效果、费用、系统模式、规划期、折现）
2. 线性插值生成非平稳转移矩阵族，或调用伽马过程估计矩阵
3. 结构系统：加载桁架几何与荷载模型，按杆件体积缩放费用
4. 组装 SystemModel（可覆盖观测精度）
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from dotenv import load_dotenv
from loguru import logger

from .component import ActionEffect, ComponentModel, ObservationModel, interpolated_transitions
from .system import (
    ControlUnit,
    DisplacementMode,
    InspectionSpec,
    KOutOfNMode,
    KOutOfNRule,
    ModeFunction,
    NoMode,
    SystemModel,
    TopologyFailureMode,
)

# 加载环境变量
load_dotenv()


def resolve_path(path: str, base: Optional[Path] = None) -> Path:
    """相对路径先按当前目录解析，再按配置文件所在目录解析"""
    candidate = Path(path)
    if candidate.is_absolute() or candidate.exists() or base is None:
        return candidate
    return base / candidate


def load_json(path: str) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def parse_actions(spec: List[Dict[str, Any]]) -> List[ActionEffect]:
    return [
        ActionEffect(
            name=a["name"],
            state_shift=int(a.get("state_shift", 0)),
            rate_shift=int(a.get("rate_shift", 0)),
            reset=bool(a.get("reset", False)),
            success_prob=float(a.get("success_prob", 1.0)),
        )
        for a in spec
    ]


def _build_structure(config: Dict[str, Any], base: Path):
    from ..structure.truss import LoadModel, TrussGeometry, TrussSurrogate

    structure = config["structure"]
    geometry = TrussGeometry.from_file(str(resolve_path(structure["geometry"], base)))
    load = structure.get("load", {})
    load_model = LoadModel(mean=float(load.get("mean", 16.25)),
                           coefficient_of_variation=float(load.get("cov", 0.10)))
    return TrussSurrogate(geometry, load_model, structure.get("component_members"))


def _build_gamma(config: Dict[str, Any], max_rate: int, cache_dir: Optional[str], use_cache: bool):
    from ..deterioration.gamma_process import build_deterioration

    spec = config["deterioration"]
    return build_deterioration(
        calibration=spec["calibration"],
        discretization=spec.get("discretization", {}),
        n_sims=int(spec.get("n_sims", 1_000_000)),
        seed=int(spec.get("seed", 0)),
        max_rate=max_rate,
        cache_dir=cache_dir,
        use_cache=use_cache,
    )


def _build_mode(config: Dict[str, Any], names: List[str], num_states: int,
                surrogate=None, section_loss: Optional[np.ndarray] = None) -> ModeFunction:
    mode = config.get("mode", {"kind": "none"})
    kind = mode.get("kind", "none")
    if kind == "none":
        return NoMode()
    if kind == "topology":
        return TopologyFailureMode(
            expression=mode["expression"],
            component_names=names,
            failure_state=int(mode.get("failure_state", num_states - 1)),
            failure_penalty=float(mode.get("failure_penalty", 24.0)),
        )
    if kind == "k_out_of_n":
        rules = [KOutOfNRule(int(r["min_state"]), float(r["fraction"]), float(r["penalty"])) for r in mode["rules"]]
        combined = mode.get("combined_penalty")
        return KOutOfNMode(rules, None if combined is None else float(combined))
    if kind == "displacement":
        if surrogate is None:
            raise ValueError("displacement mode requires a 'structure' section")
        return DisplacementMode(surrogate, section_loss)
    raise ValueError(f"Unknown mode kind: {kind}")


def load_system(path: str, precision: Optional[float] = None,
                cache_dir: Optional[str] = None, use_cache: bool = True) -> SystemModel:
    """
    加载环境定义文件

    Args:
        path: JSON 文件路径
        precision: 覆盖观测精度 p
        cache_dir: 伽马矩阵缓存目录（缺省读取 MATRIX_CACHE_DIR）
        use_cache: 是否读写伽马矩阵缓存

    Returns:
        SystemModel 对象
    """
    config = load_json(path)
    base = Path(path).parent
    logger.info(f"加载环境 '{config.get('name', Path(path).stem)}': {path}")

    horizon = int(config["horizon"])
    actions = parse_actions(config["actions"])
    names = [c["name"] for c in config["components"]]
    types = config["component_types"]

    surrogate = None
    deterioration = None
    if "structure" in config:
        surrogate = _build_structure(config, base)
        if surrogate.num_components != len(names):
            raise ValueError(f"structure maps {surrogate.num_components} components, config lists {len(names)}")
    if "deterioration" in config:
        _, deterioration = _build_gamma(config, int(config["deterioration"].get("max_rate", horizon)),
                                        cache_dir or os.getenv("MATRIX_CACHE_DIR"), use_cache)

    volume_ratio = None
    scaling = config.get("cost_scaling")
    if scaling is not None:
        if surrogate is None:
            raise ValueError("cost_scaling requires a 'structure' section")
        volumes = np.array([surrogate.geometry.volumes[g].sum() for g in surrogate.component_members])
        volume_ratio = volumes / volumes.max()

    components: List[ComponentModel] = []
    for l, entry in enumerate(config["components"]):
        ctype = types[entry["type"]]
        if ctype.get("transition") == "gamma":
            if deterioration is None:
                raise ValueError(f"component type {entry['type']} needs a 'deterioration' section")
            transitions = deterioration.matrices
        else:
            transitions = interpolated_transitions(
                ctype["initial_transition"], ctype.get("final_transition"), int(ctype.get("max_rate", 0))
            )

        if volume_ratio is not None:
            fractions = deterioration.section_loss_fractions()
            direct_loss = float(scaling["direct_loss_base"]) * volume_ratio[l] * fractions
            maintenance = np.asarray(scaling["maintenance_base"], dtype=float) * volume_ratio[l]
        else:
            direct_loss = ctype["direct_loss"]
            maintenance = ctype["maintenance_cost"]

        components.append(ComponentModel(
            name=entry["name"],
            base_transitions=transitions,
            action_effects=actions,
            direct_loss=direct_loss,
            maintenance_cost=maintenance,
            metadata={"type": entry["type"]},
        ))

    num_states = components[0].num_damage_states
    inspection_cfg = config.get("inspection", {})
    inspection = InspectionSpec(optional=bool(inspection_cfg.get("optional", False)),
                                cost=float(inspection_cfg.get("cost", 0.0)))

    if "control_units" in config:
        units = [ControlUnit(u["name"], tuple(names.index(c) for c in u["components"]), len(actions))
                 for u in config["control_units"]]
    else:
        units = [ControlUnit(name, (l,), len(actions)) for l, name in enumerate(names)]
    if inspection.optional:
        units.append(ControlUnit("inspection", tuple(), 2, kind="inspection"))

    p = float(config.get("observation", {}).get("precision", 1.0)) if precision is None else float(precision)
    section_loss = deterioration.section_loss_fractions() if deterioration is not None else None
    metadata = {"config_path": str(path), "action_names": [a.name for a in actions]}
    if deterioration is not None:
        metadata["deterioration"] = deterioration
        metadata["loss_percent"] = deterioration.representative_losses()
    if surrogate is not None:
        metadata["surrogate"] = surrogate

    system = SystemModel(
        name=config.get("name", Path(path).stem),
        components=components,
        control_units=units,
        mode_function=_build_mode(config, names, num_states, surrogate, section_loss),
        observation=ObservationModel.banded(num_states, p),
        inspection=inspection,
        horizon=horizon,
        discount=float(config.get("discount", 0.99)),
        metadata=metadata,
    )
    logger.success(
        f"✓ 已加载 {system.name}: {system.num_components} 个构件，{num_states} 个损伤状态，"
        f"{system.num_units} 个控制单元，T={system.horizon}，p={p}"
    )
    return system
