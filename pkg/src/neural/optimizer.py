#!/usr/bin/env python3
"""
Adam Optimizer - 自适应矩估计优化器

m ← β1·m + (1−β1)·g，v ← β2·v + (1−β2)·g²，
θ ← θ − η·m̂ / (√v̂ + ε)，其中 m̂、v̂ 为偏差修正后的矩估计。
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np


@dataclass
class AdamState:
    """Adam 状态：逐参数一阶/二阶矩、步数与超参数"""

    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = 1e-3, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            lr=lr, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(params: List[np.ndarray], grads: Sequence[np.ndarray], state: AdamState) -> List[np.ndarray]:
    """
    执行一步 Adam 更新（原地修改 params）

    Args:
        params: 参数列表
        grads: 与参数同形状的梯度
        state: Adam 状态

    Returns:
        更新后的参数列表
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state must have equal length")
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ValueError(f"gradient {i} has shape {g.shape}, parameter has {p.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


class Adam:
    """绑定到某个网络参数列表的 Adam 优化器"""

    def __init__(self, params: List[np.ndarray], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.state = AdamState.for_params(params, lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float):
        self.state.lr = float(value)

    def step(self, grads: Sequence[np.ndarray]):
        adam_step(self.params, grads, self.state)


@dataclass(frozen=True)
class TwoStageLearningRate:
    """两阶段学习率：decay_episode 之前为 initial，之后为 final"""

    initial: float
    final: float
    decay_episode: int

    def value(self, episode: int) -> float:
        return self.initial if episode < self.decay_episode else self.final
