#!/usr/bin/env python3
"""
Dense Network - 全连接前馈网络

功能：
1. ReLU 隐藏层 + 三类输出头：标量线性、向量线性、多个 softmax 分头
2. 前向传播（softmax 减最大值稳定化）并缓存激活值
3. 精确反向传播，输入为输出层线性值（logits）上的梯度
4. 中心差分梯度检验
5. 参数检查点读写（含优化器状态与随机数状态）

全部使用双精度。
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

# 取对数时的概率下限
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class HeadSpec:
    """
    输出头规格

    Attributes:
        kind: "scalar"、"vector" 或 "softmax"
        sizes: vector 为 (K,)；softmax 为各分头大小 (k_1, ..., k_n)；scalar 为 (1,)
    """

    kind: str
    sizes: Tuple[int, ...] = (1,)

    def __post_init__(self):
        if self.kind not in ("scalar", "vector", "softmax"):
            raise ValueError(f"Unknown head kind: {self.kind}")
        if any(k < 1 for k in self.sizes):
            raise ValueError(f"head sizes must be positive, got {self.sizes}")
        if self.kind == "scalar" and tuple(self.sizes) != (1,):
            raise ValueError("scalar head has exactly one output")

    @property
    def output_size(self) -> int:
        return int(sum(self.sizes))

    @property
    def offsets(self) -> List[int]:
        return list(np.cumsum((0,) + tuple(self.sizes)))


def softmax(z: np.ndarray) -> np.ndarray:
    """数值稳定的 softmax（最后一维）"""
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax_grad(probs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """d log π(a) / d logits = onehot(a) − π"""
    grad = -probs.copy()
    grad[np.arange(probs.shape[0]), actions] += 1.0
    return grad


@dataclass
class ForwardCache:
    """前向缓存：各层输入、隐藏层预激活值与输出层线性值"""

    inputs: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)
    logits: Optional[np.ndarray] = None


class DenseNet:
    """全连接网络（ReLU 隐藏层）"""

    def __init__(self, input_size: int, hidden_sizes: Sequence[int], head: HeadSpec,
                 rng: Optional[np.random.Generator] = None, init_scale: float = 1.0):
        """
        Args:
            input_size: 输入维度
            hidden_sizes: 隐藏层宽度
            head: 输出头规格
            rng: 随机数生成器（权重初始化）
            init_scale: 初始化缩放，权重 ~ U(±init_scale/√fan_in)，偏置为 0
        """
        self.layer_sizes = [int(input_size)] + [int(h) for h in hidden_sizes] + [head.output_size]
        self.head = head
        self.init_scale = float(init_scale)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params: List[np.ndarray] = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            bound = self.init_scale / np.sqrt(fan_in)
            self.params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params))

    def copy(self) -> "DenseNet":
        clone = DenseNet.__new__(DenseNet)
        clone.layer_sizes = list(self.layer_sizes)
        clone.head = self.head
        clone.init_scale = self.init_scale
        clone.params = [p.copy() for p in self.params]
        return clone

    def load_params(self, params: Sequence[np.ndarray]):
        if len(params) != len(self.params) or any(a.shape != b.shape for a, b in zip(params, self.params)):
            raise ValueError("parameter shapes do not match the network")
        # 原地复制，优化器持有的参数引用保持有效
        for dst, src in zip(self.params, params):
            dst[...] = src

    def forward(self, x: np.ndarray):
        """
        前向传播

        Args:
            x: (B, d) 或 (d,) 输入

        Returns:
            (输出, 缓存)。scalar → (B,)；vector → (B, K)；softmax → 各分头概率列表
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.layer_sizes[0]:
            raise ValueError(f"input size {x.shape[1]} does not match network input {self.layer_sizes[0]}")

        cache = ForwardCache()
        h = x
        for layer in range(self.num_layers):
            W, b = self.params[2 * layer], self.params[2 * layer + 1]
            cache.inputs.append(h)
            z = h @ W + b
            if layer < self.num_layers - 1:
                cache.pre_activations.append(z)
                h = np.maximum(z, 0.0)
            else:
                cache.logits = z
        return self.outputs_from_logits(cache.logits), cache

    def outputs_from_logits(self, z: np.ndarray):
        if self.head.kind == "scalar":
            return z[:, 0]
        if self.head.kind == "vector":
            return z
        offsets = self.head.offsets
        return [softmax(z[:, offsets[j]:offsets[j + 1]]) for j in range(len(self.head.sizes))]

    def predict(self, x: np.ndarray):
        outputs, _ = self.forward(x)
        return outputs

    def backward(self, cache: ForwardCache, grad_logits: np.ndarray) -> List[np.ndarray]:
        """
        反向传播

        Args:
            cache: 前向缓存
            grad_logits: 标量损失对输出层线性值的梯度，(B, out)；scalar 头可为 (B,)

        Returns:
            与 params 同序的梯度列表
        """
        delta = np.asarray(grad_logits, dtype=float)
        if delta.ndim == 1:
            delta = delta[:, np.newaxis]
        if delta.shape != cache.logits.shape:
            raise ValueError(f"gradient shape {delta.shape} does not match logits {cache.logits.shape}")

        grads: List[np.ndarray] = [None] * len(self.params)
        for layer in range(self.num_layers - 1, -1, -1):
            W = self.params[2 * layer]
            grads[2 * layer] = cache.inputs[layer].T @ delta
            grads[2 * layer + 1] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ W.T) * (cache.pre_activations[layer - 1] > 0.0)
        return grads

    def log_probs(self, outputs: List[np.ndarray], actions: np.ndarray) -> np.ndarray:
        """
        各分头所选动作的对数概率

        Args:
            outputs: softmax 分头概率列表
            actions: (B, n) 动作

        Returns:
            (B, n) 对数概率
        """
        actions = np.atleast_2d(actions)
        rows = np.arange(actions.shape[0])
        return np.stack(
            [np.log(np.maximum(p[rows, actions[:, j]], PROB_FLOOR)) for j, p in enumerate(outputs)],
            axis=1,
        )

    def policy_gradient_logits(self, outputs: List[np.ndarray], actions: np.ndarray,
                               coefficients: np.ndarray) -> np.ndarray:
        """
        Σ_i coeff_i Σ_j log π_j(a_ij) 对 logits 的梯度，逐分头拼接
        """
        actions = np.atleast_2d(actions)
        parts = [coefficients[:, np.newaxis] * log_softmax_grad(p, actions[:, j]) for j, p in enumerate(outputs)]
        return np.concatenate(parts, axis=1)

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])


def grad_check(net: DenseNet, x: np.ndarray,
               loss_fn: Callable[[DenseNet, np.ndarray], Tuple[float, np.ndarray]],
               eps: float = 1e-5, max_params: Optional[int] = None,
               rng: Optional[np.random.Generator] = None) -> float:
    """
    中心差分梯度检验

    Args:
        net: 网络
        x: 输入批
        loss_fn: (net, x) → (标量损失, logits 梯度)
        eps: 扰动步长
        max_params: 最多随机抽查的参数个数（缺省全部）
        rng: 抽查用随机数生成器

    Returns:
        最大相对误差 |g − ĝ| / max(|g| + |ĝ|, 1e-6)
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    _, cache = net.forward(x)
    _, grad_logits = loss_fn(net, x)
    analytic = net.backward(cache, grad_logits)

    coords = [(k, idx) for k, p in enumerate(net.params) for idx in np.ndindex(p.shape)]
    if max_params is not None and max_params < len(coords):
        rng = rng if rng is not None else np.random.default_rng(0)
        picks = rng.choice(len(coords), size=max_params, replace=False)
        coords = [coords[i] for i in sorted(picks)]

    worst = 0.0
    for k, idx in coords:
        original = net.params[k][idx]
        net.params[k][idx] = original + eps
        plus, _ = loss_fn(net, x)
        net.params[k][idx] = original - eps
        minus, _ = loss_fn(net, x)
        net.params[k][idx] = original
        numeric = (plus - minus) / (2.0 * eps)
        a = analytic[k][idx]
        worst = max(worst, abs(a - numeric) / max(abs(a) + abs(numeric), 1e-6))
    logger.debug(f"梯度检验 {len(coords)} 个参数: 最大相对误差 {worst:.3e}")
    return worst


def save_checkpoint(path: str, net: DenseNet, optimizer=None,
                    rng: Optional[np.random.Generator] = None, extra: Optional[Dict] = None) -> Path:
    """
    保存网络检查点（.npz）

    字段：layer_sizes、head_kind、head_sizes、init_scale、param_{k}；
    有优化器时加 adam_m_{k}、adam_v_{k}、adam_meta；有随机数生成器时加 rng_state（JSON）。
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {
        "layer_sizes": np.array(net.layer_sizes),
        "head_kind": np.array(net.head.kind),
        "head_sizes": np.array(net.head.sizes),
        "init_scale": np.array(net.init_scale),
    }
    for k, p in enumerate(net.params):
        arrays[f"param_{k}"] = p
    if optimizer is not None:
        state = optimizer.state
        for k, (m, v) in enumerate(zip(state.m, state.v)):
            arrays[f"adam_m_{k}"] = m
            arrays[f"adam_v_{k}"] = v
        arrays["adam_meta"] = np.array(json.dumps({
            "step": state.step, "lr": state.lr, "beta1": state.beta1, "beta2": state.beta2, "eps": state.eps,
        }))
    if rng is not None:
        arrays["rng_state"] = np.array(json.dumps(rng.bit_generator.state))
    if extra:
        arrays["extra"] = np.array(json.dumps(extra, sort_keys=True))
    np.savez(path, **arrays)
    logger.debug(f"检查点已保存: {path}")
    return path


def load_checkpoint(path: str):
    """
    读取网络检查点

    Returns:
        (DenseNet, AdamState 或 None, 随机数状态字典或 None, extra 字典)
    """
    from .optimizer import AdamState

    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        layer_sizes = [int(s) for s in data["layer_sizes"]]
        head = HeadSpec(str(data["head_kind"]), tuple(int(s) for s in data["head_sizes"]))
        net = DenseNet(layer_sizes[0], layer_sizes[1:-1], head, init_scale=float(data["init_scale"]))
        net.load_params([data[f"param_{k}"] for k in range(2 * (len(layer_sizes) - 1))])

        state = None
        if "adam_meta" in data.files:
            meta = json.loads(str(data["adam_meta"]))
            count = len(net.params)
            state = AdamState(
                m=[data[f"adam_m_{k}"].copy() for k in range(count)],
                v=[data[f"adam_v_{k}"].copy() for k in range(count)],
                step=int(meta["step"]), lr=float(meta["lr"]),
                beta1=float(meta["beta1"]), beta2=float(meta["beta2"]), eps=float(meta["eps"]),
            )
        rng_state = json.loads(str(data["rng_state"])) if "rng_state" in data.files else None
        extra = json.loads(str(data["extra"])) if "extra" in data.files else {}
    return net, state, rng_state, extra
