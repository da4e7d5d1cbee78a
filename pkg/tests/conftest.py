"""
共享测试夹具：小型构件与系统、随仓库分发的环境配置
"""

from pathlib import Path

import numpy as np
import pytest

from src.agents.replay import Batch
from src.environment.component import ActionEffect, ComponentModel, ObservationModel
from src.environment.config_loader import load_system
from src.environment.system import ControlUnit, InspectionSpec, NoMode, SystemModel

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

TOY_P = np.array([
    [0.7, 0.2, 0.1, 0.0],
    [0.0, 0.6, 0.3, 0.1],
    [0.0, 0.0, 0.8, 0.2],
    [0.0, 0.0, 0.0, 1.0],
])

TOY_ACTIONS = [
    ActionEffect("do_nothing"),
    ActionEffect("minor_repair", state_shift=1, success_prob=0.95),
    ActionEffect("replace", reset=True),
]


def make_component(name: str = "c", transitions=TOY_P, actions=None, direct_loss=(0.0, 1.0, 5.0, 20.0),
                   maintenance_cost=(0.0, 3.0, 10.0)) -> ComponentModel:
    return ComponentModel(
        name=name,
        base_transitions=np.array(transitions, dtype=float),
        action_effects=list(actions or TOY_ACTIONS),
        direct_loss=np.array(direct_loss, dtype=float),
        maintenance_cost=np.array(maintenance_cost, dtype=float),
    )


def make_system(num_components: int = 2, precision: float = 1.0, horizon: int = 5, mode=None,
                optional_inspection: bool = False, inspection_cost: float = 0.0,
                components=None, discount: float = 0.95) -> SystemModel:
    components = components or [make_component(f"c{i + 1}") for i in range(num_components)]
    units = [ControlUnit(c.name, (l,), c.num_actions) for l, c in enumerate(components)]
    if optional_inspection:
        units.append(ControlUnit("inspection", tuple(), 2, kind="inspection"))
    return SystemModel(
        name="toy",
        components=components,
        control_units=units,
        mode_function=mode or NoMode(),
        observation=ObservationModel.banded(components[0].num_damage_states, precision),
        inspection=InspectionSpec(optional=optional_inspection, cost=inspection_cost),
        horizon=horizon,
        discount=discount,
    )


@pytest.fixture
def toy_component():
    return make_component()


@pytest.fixture
def toy_system():
    return make_system()


@pytest.fixture
def noisy_system():
    return make_system(precision=0.9)


@pytest.fixture(scope="session")
def system_i():
    return load_system(str(DATA_DIR / "environments" / "system_i.json"))


@pytest.fixture(scope="session")
def system_ii():
    return load_system(str(DATA_DIR / "environments" / "system_ii.json"))


def random_batch(rng: np.random.Generator, input_size: int, unit_sizes, size: int = 8, behavior_width: int = None,
                 terminal=None, costs=None) -> Batch:
    """随机输入、动作与行为概率组成的批次"""
    width = len(unit_sizes) if behavior_width is None else behavior_width
    return Batch(
        features=rng.random((size, input_size)),
        actions=np.stack([rng.integers(0, k, size=size) for k in unit_sizes], axis=1),
        behavior_probs=rng.uniform(0.2, 1.0, size=(size, width)),
        costs=rng.uniform(0.0, 5.0, size=size) if costs is None else np.asarray(costs, dtype=float),
        next_features=rng.random((size, input_size)),
        terminal=np.zeros(size, dtype=bool) if terminal is None else np.asarray(terminal, dtype=bool),
    )
