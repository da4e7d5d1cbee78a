#!/usr/bin/env python3
"""
Truss Surrogate - 线弹性桁架代理模型

功能：
1. 读取桁架几何文件，使用 networkx 建立节点-杆件图
2. 组装全局刚度矩阵（杆件轴向刚度 EA(1-loss)/L），求解 K·u = F
3. 计算完好状态下的屈服参考位移 u_y
4. 将监测位移比 u/u_y 映射为系统模式惩罚因子
5. 构造镜像杆件映射，校验几何对称性

两个对称子结构承受相同竖向荷载，因此一片桁架的响应即可代表整个结构，
每个构件对应该片桁架中的一根杆件。
"""

import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from loguru import logger

# 位移比阈值与对应惩罚（左闭区间）
RATIO_THRESHOLDS = (0.60, 0.75, 1.00)
RATIO_PENALTIES = (2.0, 6.0, 24.0)

# 超过该条件数视为机构（刚度奇异）
SINGULAR_CONDITION = 1e12


class StructuralCollapseError(RuntimeError):
    """刚度矩阵奇异：杆件损失过大形成机构"""


@dataclass(frozen=True)
class Member:
    """桁架杆件"""

    name: str
    start: str
    end: str
    area: float


@dataclass(frozen=True)
class LoadModel:
    """
    竖向分布荷载模型（正态分布）

    Attributes:
        mean: 荷载均值（kN/m²）
        coefficient_of_variation: 变异系数
    """

    mean: float = 16.25
    coefficient_of_variation: float = 0.10

    def __post_init__(self):
        if self.mean <= 0:
            raise ValueError(f"load mean must be positive, got {self.mean}")
        if self.coefficient_of_variation < 0:
            raise ValueError(f"coefficient of variation must be non-negative, got {self.coefficient_of_variation}")

    def sample(self, rng: np.random.Generator) -> float:
        """抽样一个荷载值（截断于 0）"""
        value = rng.normal(self.mean, self.mean * self.coefficient_of_variation)
        return max(0.0, float(value))


class TrussGeometry:
    """
    平面桁架几何与材料

    节点为图节点（属性 pos），杆件为图的边（属性 index、area）。
    """

    def __init__(self,
                 nodes: Dict[str, Tuple[float, float]],
                 members: Sequence[Member],
                 supports: Dict[str, Tuple[bool, bool]],
                 elastic_modulus: float,
                 yield_stress: float,
                 monitored: Tuple[str, str],
                 load_pattern: Dict[str, Tuple[float, float]],
                 name: str = "truss"):
        """
        Args:
            nodes: 节点名 → (x, y)
            members: 杆件列表
            supports: 节点名 → (约束 x, 约束 y)
            elastic_modulus: 弹性模量
            yield_stress: 屈服应力
            monitored: (节点名, "x" 或 "y")
            load_pattern: 单位分布荷载对应的节点力
            name: 几何名称
        """
        if elastic_modulus <= 0 or yield_stress <= 0:
            raise ValueError("elastic_modulus and yield_stress must be positive")

        self.name = name
        self.node_names = list(nodes.keys())
        self.node_index = {n: i for i, n in enumerate(self.node_names)}
        self.coords = np.array([nodes[n] for n in self.node_names], dtype=float)
        self.members = list(members)
        self.elastic_modulus = float(elastic_modulus)
        self.yield_stress = float(yield_stress)

        self.graph = nx.Graph(name=name)
        for n in self.node_names:
            self.graph.add_node(n, pos=tuple(nodes[n]))
        for idx, m in enumerate(self.members):
            if m.start not in self.node_index or m.end not in self.node_index:
                raise ValueError(f"member {m.name} references an unknown node")
            if m.area <= 0:
                raise ValueError(f"member {m.name} must have a positive area")
            self.graph.add_edge(m.start, m.end, index=idx, area=m.area, name=m.name)

        num_dofs = 2 * len(self.node_names)
        fixed = []
        for node, (fx, fy) in supports.items():
            base = 2 * self.node_index[node]
            if fx:
                fixed.append(base)
            if fy:
                fixed.append(base + 1)
        self.fixed_dofs = np.array(sorted(set(fixed)), dtype=int)
        self.free_dofs = np.setdiff1d(np.arange(num_dofs), self.fixed_dofs)
        if self.free_dofs.size == 0:
            raise ValueError("No free DOFs. Check supports.")

        node, direction = monitored
        self.monitored_dof = 2 * self.node_index[node] + (1 if direction == "y" else 0)
        if self.monitored_dof in set(self.fixed_dofs.tolist()):
            raise ValueError(f"monitored DOF at node {node} is constrained")

        self.load_pattern = np.zeros(num_dofs)
        for node, (px, py) in load_pattern.items():
            base = 2 * self.node_index[node]
            self.load_pattern[base] += px
            self.load_pattern[base + 1] += py

        self._geometry = [self._member_geometry(m) for m in self.members]

    @classmethod
    def from_file(cls, path: str) -> "TrussGeometry":
        """从 JSON 几何文件加载"""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Truss geometry not found: {path}")
        logger.info(f"加载桁架几何: {path}")
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        members = [
            Member(name=m["name"], start=m["nodes"][0], end=m["nodes"][1], area=float(m["area"]))
            for m in data["members"]
        ]
        return cls(
            nodes={k: tuple(v) for k, v in data["nodes"].items()},
            members=members,
            supports={k: tuple(v) for k, v in data["supports"].items()},
            elastic_modulus=float(data["elastic_modulus"]),
            yield_stress=float(data["yield_stress"]),
            monitored=(data["monitored"]["node"], data["monitored"].get("direction", "y")),
            load_pattern={k: tuple(v) for k, v in data.get("load_pattern", {}).items()},
            name=data.get("name", path.stem),
        )

    @property
    def num_members(self) -> int:
        return len(self.members)

    @property
    def areas(self) -> np.ndarray:
        return np.array([m.area for m in self.members])

    @property
    def volumes(self) -> np.ndarray:
        return np.array([m.area * g[0] for m, g in zip(self.members, self._geometry)])

    def _member_geometry(self, m: Member) -> Tuple[float, float, float, np.ndarray]:
        i, j = self.node_index[m.start], self.node_index[m.end]
        dx, dy = self.coords[j] - self.coords[i]
        length = math.hypot(dx, dy)
        if length == 0:
            raise ValueError(f"member {m.name} has zero length")
        dofs = np.array([2 * i, 2 * i + 1, 2 * j, 2 * j + 1])
        return length, dx / length, dy / length, dofs

    def scaled(self, area_factor: float) -> "TrussGeometry":
        """所有杆件面积乘以同一系数后的几何"""
        return TrussGeometry(
            nodes={n: tuple(self.coords[i]) for n, i in self.node_index.items()},
            members=[Member(m.name, m.start, m.end, m.area * area_factor) for m in self.members],
            supports=self._supports_dict(),
            elastic_modulus=self.elastic_modulus,
            yield_stress=self.yield_stress,
            monitored=self._monitored_pair(),
            load_pattern=self._load_dict(),
            name=self.name,
        )

    def _supports_dict(self) -> Dict[str, Tuple[bool, bool]]:
        fixed = set(self.fixed_dofs.tolist())
        out = {}
        for n, i in self.node_index.items():
            fx, fy = 2 * i in fixed, 2 * i + 1 in fixed
            if fx or fy:
                out[n] = (fx, fy)
        return out

    def _monitored_pair(self) -> Tuple[str, str]:
        return self.node_names[self.monitored_dof // 2], "y" if self.monitored_dof % 2 else "x"

    def _load_dict(self) -> Dict[str, Tuple[float, float]]:
        return {n: (self.load_pattern[2 * i], self.load_pattern[2 * i + 1]) for n, i in self.node_index.items()}

    def stiffness_matrix(self, section_loss: Optional[np.ndarray] = None) -> np.ndarray:
        """
        组装全局刚度矩阵

        Args:
            section_loss: 各杆件截面损失比例（缺省为完好）
        """
        num_dofs = 2 * len(self.node_names)
        K = np.zeros((num_dofs, num_dofs))
        loss = np.zeros(self.num_members) if section_loss is None else np.asarray(section_loss, dtype=float)
        for m, (length, c, s, dofs), delta in zip(self.members, self._geometry, loss):
            ea = self.elastic_modulus * m.area * (1.0 - delta)
            block = np.array([[c * c, c * s], [c * s, s * s]])
            ke = (ea / length) * np.block([[block, -block], [-block, block]])
            K[np.ix_(dofs, dofs)] += ke
        return K

    def solve(self, section_loss: Optional[np.ndarray] = None, load_magnitude: float = 1.0) -> np.ndarray:
        """
        求解全部节点位移

        Raises:
            StructuralCollapseError: 约束后刚度矩阵奇异
        """
        K = self.stiffness_matrix(section_loss)
        K_ff = K[np.ix_(self.free_dofs, self.free_dofs)]
        if not np.isfinite(K_ff).all() or np.linalg.cond(K_ff) > SINGULAR_CONDITION:
            raise StructuralCollapseError(f"{self.name}: stiffness matrix is singular (mechanism)")
        U = np.zeros(K.shape[0])
        U[self.free_dofs] = np.linalg.solve(K_ff, load_magnitude * self.load_pattern[self.free_dofs])
        return U

    def member_forces(self, U: np.ndarray, section_loss: Optional[np.ndarray] = None) -> np.ndarray:
        """杆件轴力（拉为正）"""
        loss = np.zeros(self.num_members) if section_loss is None else np.asarray(section_loss, dtype=float)
        forces = np.empty(self.num_members)
        for k, (m, (length, c, s, dofs)) in enumerate(zip(self.members, self._geometry)):
            du = (U[dofs[2:]] - U[dofs[:2]]) @ np.array([c, s])
            forces[k] = self.elastic_modulus * m.area * (1.0 - loss[k]) * du / length
        return forces

    def member_stresses(self, U: np.ndarray) -> np.ndarray:
        """完好截面下的杆件应力"""
        return self.member_forces(U) / self.areas

    def mirror_member_map(self) -> List[int]:
        """
        关于跨中竖直轴的镜像杆件映射

        Returns:
            第 k 个元素为杆件 k 的镜像杆件索引

        Raises:
            ValueError: 几何不对称
        """
        x_mid = 0.5 * (self.coords[:, 0].min() + self.coords[:, 0].max())
        mirror_node = {}
        for n, i in self.node_index.items():
            x, y = self.coords[i]
            target = np.array([2 * x_mid - x, y])
            dist = np.linalg.norm(self.coords - target, axis=1)
            j = int(np.argmin(dist))
            if dist[j] > 1e-9:
                raise ValueError(f"node {n} has no mirror image")
            mirror_node[n] = self.node_names[j]

        mapping = []
        for m in self.members:
            a, b = mirror_node[m.start], mirror_node[m.end]
            if not self.graph.has_edge(a, b):
                raise ValueError(f"member {m.name} has no mirror image")
            edge = self.graph.edges[a, b]
            if not math.isclose(edge["area"], m.area, rel_tol=1e-12):
                raise ValueError(f"member {m.name} and its mirror differ in area")
            mapping.append(edge["index"])
        return mapping

    def mirror_dof(self, dof: int) -> int:
        """镜像节点的同方向自由度"""
        x_mid = 0.5 * (self.coords[:, 0].min() + self.coords[:, 0].max())
        i = dof // 2
        target = np.array([2 * x_mid - self.coords[i, 0], self.coords[i, 1]])
        j = int(np.argmin(np.linalg.norm(self.coords - target, axis=1)))
        return 2 * j + dof % 2


def solve_displacement(geometry: TrussGeometry, section_loss: Sequence[float], load_magnitude: float) -> float:
    """
    监测自由度位移幅值

    Args:
        geometry: 桁架几何
        section_loss: 各杆件截面损失比例，位于 [0, 1)
        load_magnitude: 分布荷载大小

    Returns:
        |u|

    Raises:
        StructuralCollapseError: 刚度奇异
    """
    if not math.isfinite(load_magnitude):
        raise ValueError(f"load magnitude must be finite, got {load_magnitude}")
    U = geometry.solve(np.asarray(section_loss, dtype=float), load_magnitude)
    return float(abs(U[geometry.monitored_dof]))


def compute_reference_yield_displacement(geometry: TrussGeometry) -> float:
    """
    完好状态下的屈服参考位移 u_y

    单位荷载线性求解，u_y = u_unit × (屈服应力 / 单位荷载下最大杆件应力)。
    """
    U = geometry.solve(None, 1.0)
    stresses = np.abs(geometry.member_stresses(U))
    peak = stresses.max()
    if peak <= 0:
        raise ValueError(f"{geometry.name}: load pattern produces no member stress")
    u_unit = abs(U[geometry.monitored_dof])
    u_y = u_unit * geometry.yield_stress / peak
    logger.debug(f"{geometry.name}: 单位荷载位移 {u_unit:.6e}，最大应力杆件 {int(np.argmax(stresses))}，屈服位移 {u_y:.6e}")
    return float(u_y)


def displacement_ratio_penalty(u: Optional[float], u_y: Optional[float] = None) -> float:
    """
    位移比惩罚因子

    ratio < 0.60 → 1.0；[0.60, 0.75) → 2.0；[0.75, 1.00) → 6.0；≥ 1.00 或倒塌 → 24.0。

    Args:
        u: 位移；未给出 u_y 时直接视为位移比。None 表示倒塌
        u_y: 屈服参考位移
    """
    if u is None:
        return RATIO_PENALTIES[-1]
    ratio = u if u_y is None else u / u_y
    if not math.isfinite(ratio):
        return RATIO_PENALTIES[-1]
    penalty = 1.0
    for threshold, factor in zip(RATIO_THRESHOLDS, RATIO_PENALTIES):
        if ratio >= threshold:
            penalty = factor
    return penalty


class TrussSurrogate:
    """
    结构代理：构件损伤状态 → 杆件截面损失 → 位移比 u/u_y

    Attributes:
        geometry: 桁架几何
        load_model: 荷载模型
        component_members: 构件 → 杆件索引
        u_y: 屈服参考位移（缓存）
    """

    def __init__(self, geometry: TrussGeometry, load_model: LoadModel,
                 component_members: Optional[Sequence[Sequence[int]]] = None):
        self.geometry = geometry
        self.load_model = load_model
        if component_members is None:
            component_members = [[k] for k in range(geometry.num_members)]
        covered = sorted(k for group in component_members for k in group)
        if covered != list(range(geometry.num_members)):
            raise ValueError("every truss member must belong to exactly one component")
        self.component_members = [list(g) for g in component_members]
        self.u_y = compute_reference_yield_displacement(geometry)

    @property
    def num_components(self) -> int:
        return len(self.component_members)

    def member_losses(self, component_losses: Sequence[float]) -> np.ndarray:
        losses = np.zeros(self.geometry.num_members)
        for loss, group in zip(component_losses, self.component_members):
            losses[group] = loss
        return losses

    def displacement_ratio(self, component_losses: Sequence[float], load: float) -> float:
        """
        计算位移比；形成机构时返回 inf
        """
        losses = self.member_losses(component_losses)
        if np.any(losses >= 1.0):
            return math.inf
        try:
            u = solve_displacement(self.geometry, losses, load)
        except StructuralCollapseError:
            return math.inf
        return u / self.u_y


def main():
    """打印几何摘要与完好状态下的均值荷载位移比"""
    path = sys.argv[1] if len(sys.argv) > 1 else "data/structures/pratt_truss.json"
    try:
        geometry = TrussGeometry.from_file(path)
        surrogate = TrussSurrogate(geometry, LoadModel())
        ratio = surrogate.displacement_ratio(np.zeros(geometry.num_members), surrogate.load_model.mean)
        logger.info(f"{geometry.name}: {geometry.num_members} 根杆件，{len(geometry.free_dofs)} 个自由度")
        logger.info(f"镜像杆件映射: {geometry.mirror_member_map()}")
        logger.success(f"✓ 完好状态平均荷载下位移比 {ratio:.4f}（惩罚因子 {displacement_ratio_penalty(ratio)}）")
        return 0
    except Exception as e:
        logger.error(f"桁架分析失败: {e}")
        logger.exception("详细错误信息:")
        return 1


if __name__ == "__main__":
    sys.exit(main())
