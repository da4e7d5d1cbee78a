#!/usr/bin/env python3
"""
Gamma Process - 非平稳伽马过程截面损失模型

功能：
1. 按时刻 T 的均值与标准差标定伽马过程（f(τ) = c·τ^β）
2. 抽样年度增量 Δd ~ Gamma(f(τ2) − f(τ1), 1/λ)
3. 蒙特卡洛估计离散损伤状态的逐速率转移矩阵（分批、独立子随机流）
4. 新构件（d = 0）转移行的解析解（scipy.stats.gamma），用于校验
5. 转移矩阵缓存（.npz，带参数头）

离散规则：d ∈ [k·w, (k+1)·w) → 状态 k；d > 失效阈值 → 失效状态（最后一个状态）。
"""

import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from dotenv import load_dotenv
from loguru import logger
from scipy import stats

# 加载环境变量
load_dotenv()

CACHE_VERSION = 1
MIN_SIMULATIONS = 10_000


@dataclass(frozen=True)
class GammaProcessModel:
    """
    伽马过程参数

    Attributes:
        beta: 指数 β ∈ (0, 2]
        lam: 尺度参数 λ（1/百分比）
        c: 形状系数，f(τ) = c·τ^β
        horizon: 标定年限 T
    """

    beta: float
    lam: float
    c: float
    horizon: float

    def __post_init__(self):
        if not 0.0 < self.beta <= 2.0:
            raise ValueError(f"beta must lie in (0, 2], got {self.beta}")
        if self.lam <= 0 or self.c <= 0:
            raise ValueError(f"lambda and c must be positive, got lam={self.lam}, c={self.c}")

    def shape(self, tau) -> np.ndarray:
        """形状函数 f(τ)"""
        return self.c * np.power(np.asarray(tau, dtype=float), self.beta)

    def mean(self, tau) -> np.ndarray:
        """平均截面损失 f(τ)/λ"""
        return self.shape(tau) / self.lam

    def std(self, tau) -> np.ndarray:
        return np.sqrt(self.shape(tau)) / self.lam


def calibrate(mean_at_T: float, sigma_at_T: float, T: float, beta: float) -> GammaProcessModel:
    """
    由 T 时刻的均值与标准差标定伽马过程

    f(T) = (mean/sigma)²，λ = f(T)/mean，c = f(T)/T^β

    Args:
        mean_at_T: T 时刻平均截面损失（%）
        sigma_at_T: T 时刻截面损失标准差（%）
        T: 标定年限
        beta: 指数 β

    Returns:
        GammaProcessModel 对象
    """
    for label, value in (("mean", mean_at_T), ("sigma", sigma_at_T), ("T", T)):
        if value <= 0:
            raise ValueError(f"{label} must be positive, got {value}")
    f_T = (mean_at_T / sigma_at_T) ** 2
    model = GammaProcessModel(beta=beta, lam=f_T / mean_at_T, c=f_T / T ** beta, horizon=T)
    logger.debug(f"伽马过程标定完成: f(T)={f_T:.6f}，λ={model.lam:.6f}，c={model.c:.6e}")
    return model


def sample_increment(model: GammaProcessModel, tau1: float, tau2: float,
                     rng: np.random.Generator, size=None):
    """
    抽样 [τ1, τ2] 内的截面损失增量

    Raises:
        ValueError: τ1 ≥ τ2 或 τ1 < 0
    """
    if tau1 < 0 or tau1 >= tau2:
        raise ValueError(f"need 0 <= tau1 < tau2, got tau1={tau1}, tau2={tau2}")
    shape = float(model.shape(tau2) - model.shape(tau1))
    return rng.gamma(shape, 1.0 / model.lam, size=size)


@dataclass
class DiscretizedDeterioration:
    """
    离散损伤状态模型

    Attributes:
        bin_width: 状态区间宽度（%）
        num_states: 状态数（含失效状态）
        failure_threshold: 失效阈值（%）
        matrices: 形状 (R, X, X) 的逐速率转移矩阵
    """

    bin_width: float = 2.5
    num_states: int = 25
    failure_threshold: float = 60.0
    matrices: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.bin_width <= 0 or self.num_states < 2:
            raise ValueError("bin_width must be positive and num_states at least 2")
        expected = self.failure_threshold / self.bin_width
        if abs(expected - (self.num_states - 1)) > 1e-9:
            raise ValueError(
                f"failure threshold {self.failure_threshold} and bin width {self.bin_width} "
                f"imply {expected:g} bins, but num_states - 1 = {self.num_states - 1}"
            )

    @property
    def failure_state(self) -> int:
        return self.num_states - 1

    def state_of(self, loss) -> np.ndarray:
        """截面损失（%）→ 离散状态"""
        loss = np.asarray(loss, dtype=float)
        states = np.minimum(np.floor(loss / self.bin_width).astype(int), self.num_states - 2)
        return np.where(loss > self.failure_threshold, self.failure_state, states)

    def section_loss_fractions(self) -> np.ndarray:
        """各状态代表截面损失比例：区间中点，失效状态为 1.0（杆件退出工作）"""
        fractions = (np.arange(self.num_states) + 0.5) * self.bin_width / 100.0
        fractions[-1] = 1.0
        return fractions

    def representative_losses(self) -> np.ndarray:
        """各状态代表损失（%），失效状态取阈值上方半个区间"""
        values = (np.arange(self.num_states) + 0.5) * self.bin_width
        values[-1] = self.failure_threshold + 0.5 * self.bin_width
        return values


def estimate_transition_matrices(model: GammaProcessModel,
                                 discretization: DiscretizedDeterioration,
                                 n_sims: int,
                                 rng: np.random.Generator,
                                 max_rate: Optional[int] = None,
                                 batch_size: int = 100_000) -> DiscretizedDeterioration:
    """
    蒙特卡洛估计逐速率转移矩阵

    模拟 n_sims 条从 d = 0 开始的年度增量路径，统计第 τ 年 bin(d) → bin(d + Δd) 的频数。
    各批次使用独立子随机流，频数先求和再归一化。未访问的源状态取"原地不动"行，
    失效状态吸收。

    Args:
        model: 伽马过程
        discretization: 离散规则（matrices 字段被忽略）
        n_sims: 模拟路径数（≥ 10^4）
        rng: 随机数生成器
        max_rate: 最大速率（缺省为标定年限）
        batch_size: 每批路径数

    Returns:
        带 matrices 的 DiscretizedDeterioration
    """
    if n_sims < MIN_SIMULATIONS:
        raise ValueError(f"n_sims must be at least {MIN_SIMULATIONS}, got {n_sims}")
    if max_rate is None:
        max_rate = int(round(model.horizon))
    X = discretization.num_states
    R = max_rate + 1

    increments = np.diff(model.shape(np.arange(R + 1)))
    scale = 1.0 / model.lam

    n_batches = -(-n_sims // batch_size)
    streams = rng.spawn(n_batches)
    counts = np.zeros((R, X, X), dtype=np.int64)

    remaining = n_sims
    for b, stream in enumerate(streams):
        size = min(batch_size, remaining)
        remaining -= size
        d = np.zeros(size)
        for tau in range(R):
            src = discretization.state_of(d)
            d = d + stream.gamma(increments[tau], scale, size=size)
            dst = discretization.state_of(d)
            counts[tau] += np.bincount(src * X + dst, minlength=X * X).reshape(X, X)
        logger.info(f"转移矩阵估计批次 {b + 1}/{n_batches}: {size} 条路径，{R} 个速率")

    matrices = counts.astype(float)
    totals = matrices.sum(axis=2)
    unvisited = totals == 0
    if unvisited.any():
        logger.warning(f"⚠ {int(unvisited.sum())} 个（速率, 状态）起点未被访问，使用原地不动行")
    rows = np.nonzero(unvisited)
    matrices[rows[0], rows[1], rows[1]] = 1.0
    totals[unvisited] = 1.0
    matrices /= totals[:, :, np.newaxis]

    failure = discretization.failure_state
    matrices[:, failure, :] = 0.0
    matrices[:, failure, failure] = 1.0

    return DiscretizedDeterioration(
        bin_width=discretization.bin_width,
        num_states=X,
        failure_threshold=discretization.failure_threshold,
        matrices=matrices,
    )


def analytic_fresh_row(model: GammaProcessModel, discretization: DiscretizedDeterioration,
                       tau: int = 0) -> np.ndarray:
    """
    d = 0 的构件在第 τ 年的精确转移行（伽马分布 CDF 区间概率）
    """
    shape = float(model.shape(tau + 1) - model.shape(tau))
    dist = stats.gamma(a=shape, scale=1.0 / model.lam)
    X = discretization.num_states
    edges = np.arange(X) * discretization.bin_width
    edges[-1] = discretization.failure_threshold
    cdf = dist.cdf(edges)
    row = np.empty(X)
    row[:-1] = np.diff(cdf)
    row[-1] = 1.0 - cdf[-1]
    return row


def chain_distribution(discretization: DiscretizedDeterioration, years: int) -> np.ndarray:
    """从完好状态按转移矩阵链式推进 years 年后的状态分布"""
    dist = np.zeros(discretization.num_states)
    dist[0] = 1.0
    for tau in range(years):
        dist = dist @ discretization.matrices[min(tau, discretization.matrices.shape[0] - 1)]
    return dist


def chain_moments(discretization: DiscretizedDeterioration, years: int) -> Tuple[float, float]:
    """链式推进后截面损失（%）的均值与标准差"""
    dist = chain_distribution(discretization, years)
    values = discretization.representative_losses()
    mean = float(dist @ values)
    std = float(np.sqrt(max(dist @ values ** 2 - mean ** 2, 0.0)))
    return mean, std


def cache_header(model: GammaProcessModel, discretization: DiscretizedDeterioration,
                 n_sims: int, seed: int, max_rate: int) -> Dict:
    return {
        "version": CACHE_VERSION,
        "beta": model.beta,
        "lam": model.lam,
        "c": model.c,
        "bin_width": discretization.bin_width,
        "num_states": discretization.num_states,
        "failure_threshold": discretization.failure_threshold,
        "n_sims": int(n_sims),
        "seed": int(seed),
        "max_rate": int(max_rate),
    }


def cache_path(header: Dict, cache_dir: Optional[str] = None) -> Path:
    """由参数头生成缓存文件路径"""
    cache_dir = Path(cache_dir or os.getenv("MATRIX_CACHE_DIR", "./data/cache"))
    digest = hashlib.sha256(json.dumps(header, sort_keys=True).encode("utf-8")).hexdigest()[:16]
    return cache_dir / f"gamma_matrices_{digest}.npz"


def save_matrices(path: Path, discretization: DiscretizedDeterioration, header: Dict) -> Path:
    """保存转移矩阵与参数头"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(path, matrices=discretization.matrices, header=json.dumps(header, sort_keys=True))
    logger.info(f"✓ 转移矩阵已缓存: {path}")
    return path


def load_matrices(path: Path, header: Dict) -> Optional[DiscretizedDeterioration]:
    """读取缓存；文件不存在或参数头不一致时返回 None"""
    path = Path(path)
    if not path.exists():
        logger.warning(f"⚠ 未找到转移矩阵缓存: {path}")
        return None
    with np.load(path, allow_pickle=False) as data:
        stored = json.loads(str(data["header"]))
        if stored != json.loads(json.dumps(header, sort_keys=True)):
            logger.warning(f"⚠ 缓存参数头不一致，重新估计: {path}")
            return None
        matrices = data["matrices"]
    logger.info(f"✓ 已读取转移矩阵缓存: {path}")
    return DiscretizedDeterioration(
        bin_width=header["bin_width"],
        num_states=header["num_states"],
        failure_threshold=header["failure_threshold"],
        matrices=matrices,
    )


def build_deterioration(calibration: Dict, discretization: Dict, n_sims: int, seed: int,
                        max_rate: int, cache_dir: Optional[str] = None,
                        use_cache: bool = True) -> Tuple[GammaProcessModel, DiscretizedDeterioration]:
    """
    标定并估计（或从缓存读取）转移矩阵

    Args:
        calibration: {"mean": 40, "sigma": 7.5, "horizon": 70, "beta": 1.5}
        discretization: {"bin_width": 2.5, "num_states": 25, "failure_threshold": 60}
        n_sims: 模拟路径数
        seed: 随机种子
        max_rate: 最大速率
        cache_dir: 缓存目录
        use_cache: 是否读写缓存
    """
    model = calibrate(calibration["mean"], calibration["sigma"], calibration["horizon"], calibration["beta"])
    disc = DiscretizedDeterioration(**discretization)
    header = cache_header(model, disc, n_sims, seed, max_rate)
    path = cache_path(header, cache_dir)

    if use_cache:
        cached = load_matrices(path, header)
        if cached is not None:
            return model, cached

    estimated = estimate_transition_matrices(model, disc, n_sims, np.random.default_rng(seed), max_rate=max_rate)
    if use_cache:
        save_matrices(path, estimated, header)
    return model, estimated


def main():
    """标定默认伽马过程、估计矩阵并报告链式推进矩"""
    n_sims = int(sys.argv[1]) if len(sys.argv) > 1 else 100_000
    try:
        calibration = {"mean": 40.0, "sigma": 7.5, "horizon": 70, "beta": 1.5}
        model, disc = build_deterioration(calibration, {}, n_sims, seed=0, max_rate=70)
        mean, std = chain_moments(disc, 70)
        logger.info(f"模型参数: {asdict(model)}")
        logger.success(f"✓ T=70 链式矩: 均值 {mean:.3f}%，标准差 {std:.3f}%")
        return 0
    except Exception as e:
        logger.error(f"转移矩阵估计失败: {e}")
        logger.exception("详细错误信息:")
        return 1


if __name__ == "__main__":
    sys.exit(main())
