"""
Neural Module - 全连接网络与优化器
负责前向/反向传播、梯度检验、Adam 与检查点
"""

from .network import DenseNet, HeadSpec, grad_check, load_checkpoint, log_softmax_grad, save_checkpoint, softmax
from .optimizer import Adam, AdamState, TwoStageLearningRate, adam_step

__all__ = [
    "DenseNet",
    "HeadSpec",
    "grad_check",
    "load_checkpoint",
    "log_softmax_grad",
    "save_checkpoint",
    "softmax",
    "Adam",
    "AdamState",
    "TwoStageLearningRate",
    "adam_step",
]
