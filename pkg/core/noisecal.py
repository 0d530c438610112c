"""
噪声标定模块

负责 Y 因子法提取 WJPA 附加噪声:
- 量子 Johnson 噪声 (光子数)
- Friis 级联
- 输出噪声按 WJPA 增益归一化
- 带增益压缩修正的线性回归
- 逐频点流水线 (泵浦保护带、可并行)

回归模型: N_out/G_WJPA = 2G_rest·(N_in + N_add,ex/2 + N_rest/(2G_WJPA))，
信号与闲频两个边带都按 N_in = N_in^i 处理。
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import linregress
from tqdm import tqdm

from core.constants import H, K_B, linear_to_db
from core.errors import (
    InsufficientSpan, NonPositiveGain, ValidationError, WJPAError,
)

logger = logging.getLogger(__name__)

CORRECTION_MODES = ("none", "mean", "per_point")


@dataclass(frozen=True)
class NoiseQuanta:
    """噪声光子数"""
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValidationError(f"光子数不能为负: {self.value}")

    @classmethod
    def thermal(cls, T: float, f: float) -> "NoiseQuanta":
        return cls(float(johnson_quanta(T, f)))

    def temperature(self, f: float) -> float:
        """等效噪声温度 N·hf/k_B"""
        return self.value * H * f / K_B


@dataclass(frozen=True)
class ChainStage:
    """级联中的一级 (增益为线性功率比，附加噪声折算到本级输入)"""
    name: str
    gain: float
    added_noise: float = 0.0

    def __post_init__(self):
        if not self.gain > 0:
            raise ValidationError(f"{self.name}: 增益必须为正: {self.gain}")
        if self.added_noise < 0:
            raise ValidationError(f"{self.name}: 附加噪声不能为负: {self.added_noise}")

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "gain": self.gain, "added_noise": self.added_noise}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ChainStage":
        if "gain_db" in data:
            gain = 10 ** (float(data["gain_db"]) / 10)
        else:
            gain = float(data["gain"])
        return cls(name=str(data.get("name", "stage")), gain=gain,
                   added_noise=float(data.get("added_noise", 0.0)))


@dataclass
class VTSSweepDataset:
    """可变温度源扫描数据 (行: 温度，列: 频率)"""
    freqs: np.ndarray
    temps: np.ndarray
    noise_spectra: np.ndarray       # W，分辨带宽内
    gain_traces: np.ndarray         # WJPA 增益，线性
    pump_freq_hz: Optional[float] = None
    rbw_hz: Optional[float] = None
    n_rest: Optional[float] = None  # 后级噪声 (光子)，数据集记录时可用于压缩修正

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.temps = np.asarray(self.temps, dtype=float)
        self.noise_spectra = np.atleast_2d(np.asarray(self.noise_spectra, dtype=float))
        self.gain_traces = np.atleast_2d(np.asarray(self.gain_traces, dtype=float))
        shape = (self.temps.size, self.freqs.size)
        if self.noise_spectra.shape != shape or self.gain_traces.shape != shape:
            raise ValidationError("数据矩阵维度与温度/频率不一致", {
                "expected": list(shape),
                "noise": list(self.noise_spectra.shape),
                "gain": list(self.gain_traces.shape),
            })
        if np.any(self.temps < 0):
            raise ValidationError("温度不能为负")
        if self.temps.size > 1 and np.any(np.diff(self.temps) <= 0):
            raise ValidationError("温度必须严格递增")
        if self.rbw_hz is not None and not self.rbw_hz > 0:
            raise ValidationError(f"rbw_hz 必须为正: {self.rbw_hz}")
        if self.n_rest is not None and not self.n_rest >= 0:
            raise ValidationError(f"n_rest 不能为负: {self.n_rest}")

    @property
    def bin_width(self) -> float:
        return float(np.median(np.diff(self.freqs))) if self.freqs.size > 1 else 0.0


@dataclass
class YFactorOptions:
    """Y 因子回归选项"""
    correction: str = "none"             # none / mean / per_point
    n_rest: Optional[float] = None       # 后级噪声 (光子)
    mean_gain: Optional[float] = None    # correction=mean 时的平均 WJPA 增益
    point_gains: Optional[Sequence[float]] = None  # correction=per_point 时的逐点增益
    weights: Optional[Sequence[float]] = None      # 方差权重 1/σ²，缺省为等权
    idler_band: bool = True              # WJPA 关闭时设为 False
    min_span: float = 0.5                # N_in 最小跨度 (光子)

    def __post_init__(self):
        if self.correction not in CORRECTION_MODES:
            raise ValidationError(f"未知的修正方式: {self.correction}",
                                  {"allowed": list(CORRECTION_MODES)})


@dataclass(frozen=True)
class YFactorFit:
    """单频点回归结果"""
    slope: float
    intercept: float
    g_rest: float
    n_add_ex: float
    n_add: float
    correction: float
    r2: float
    negative_intercept: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class NoiseResult:
    """逐频点附加噪声谱"""
    freqs: np.ndarray
    n_add: np.ndarray
    g_rest: np.ndarray
    fit_r2: np.ndarray
    n_add_ex: np.ndarray
    min_gain: np.ndarray
    status: List[str] = field(default_factory=list)

    @property
    def valid(self) -> np.ndarray:
        return np.array([s == "ok" for s in self.status])

    def band_mean(self, r2_threshold: float = 0.9) -> float:
        """拟合质量达标频点的平均 N_add"""
        mask = self.valid & (self.fit_r2 >= r2_threshold)
        return float(np.mean(self.n_add[mask])) if np.any(mask) else math.nan

    def to_frame(self) -> pd.DataFrame:
        with np.errstate(divide="ignore", invalid="ignore"):
            return pd.DataFrame({
                "freq_hz": self.freqs,
                "n_add": self.n_add,
                "n_add_ex": self.n_add_ex,
                "g_rest_db": linear_to_db(self.g_rest),
                "r2": self.fit_r2,
                "min_gain_db": linear_to_db(self.min_gain),
                "status": self.status,
            })


def johnson_quanta(T, f):
    """量子 Johnson 噪声 ½coth(hf/2k_BT) = 1/(e^{hf/k_BT}−1) + ½

    T = 0 时严格返回 0.5。支持数组广播。
    """
    Ta = np.asarray(T, dtype=float)
    fa = np.asarray(f, dtype=float)
    if np.any(Ta < 0):
        raise ValidationError("温度不能为负")
    if np.any(fa <= 0):
        raise ValidationError("频率必须为正")
    with np.errstate(divide="ignore", over="ignore"):
        x = H * fa / (K_B * Ta)
        n = 0.5 + 1.0 / np.expm1(x)
    n = np.where(Ta > 0, n, 0.5)
    return float(n) if n.ndim == 0 else n


def friis_chain(stages: Sequence[ChainStage]) -> Tuple[float, float]:
    """级联总增益与折算到输入的总附加噪声

    N_total = N1 + N2/G1 + N3/(G1·G2) + …
    """
    if not stages:
        raise ValidationError("级联至少需要一级")
    gain, noise = 1.0, 0.0
    for stage in stages:
        noise += stage.added_noise / gain
        gain *= stage.gain
    return gain, noise


def renormalize_noise(dataset: VTSSweepDataset) -> np.ndarray:
    """N_out/G_WJPA，逐元素"""
    gains = dataset.gain_traces
    bad = ~np.isfinite(gains) | (gains <= 0)
    if np.any(bad):
        t_idx, f_idx = np.argwhere(bad)[0]
        raise NonPositiveGain("增益轨迹中出现非正值", {
            "temp_k": float(dataset.temps[t_idx]),
            "freq_hz": float(dataset.freqs[f_idx]),
            "count": int(np.count_nonzero(bad)),
        })
    return dataset.noise_spectra / gains


def yfactor_regression(points: Sequence[Tuple[float, float]],
                       options: Optional[YFactorOptions] = None) -> YFactorFit:
    """对 (N_in, 归一化输出噪声) 做线性回归

    Args:
        points: (N_in 光子数, y) 序列，y 以光子为单位时 G_rest 为无量纲增益
        options: 修正与加权选项

    Returns:
        YFactorFit
    """
    options = options or YFactorOptions()
    if len(points) < 3:
        raise InsufficientSpan(f"回归至少需要 3 个温度点: {len(points)}",
                               {"points": len(points)})
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if np.ptp(x) < options.min_span:
        raise InsufficientSpan(f"N_in 跨度不足 {options.min_span} 光子",
                               {"span": float(np.ptp(x))})

    bands = 2.0 if options.idler_band else 1.0
    correction = 0.0
    if options.correction != "none":
        if options.n_rest is None:
            raise ValidationError("压缩修正需要 n_rest")
        if options.correction == "mean":
            if options.mean_gain is None or not options.mean_gain > 0:
                raise ValidationError("correction=mean 需要正的 mean_gain")
            correction = options.n_rest / (bands * options.mean_gain)
        else:
            gains = np.asarray(options.point_gains, dtype=float) if options.point_gains is not None else None
            if gains is None or gains.shape != x.shape or np.any(gains <= 0):
                raise ValidationError("correction=per_point 需要与点数一致的正增益")
            # 逐点 Friis 项移入横坐标
            x = x + options.n_rest / (bands * gains)

    if options.weights is None:
        reg = linregress(x, y)
        slope, intercept = float(reg.slope), float(reg.intercept)
        r2 = float(reg.rvalue ** 2)
    else:
        w = np.asarray(options.weights, dtype=float)
        slope, intercept = (float(c) for c in np.polyfit(x, y, 1, w=np.sqrt(w)))
        fitted = slope * x + intercept
        y_mean = np.average(y, weights=w)
        ss_tot = float(np.sum(w * (y - y_mean) ** 2))
        r2 = 1.0 - float(np.sum(w * (y - fitted) ** 2)) / ss_tot if ss_tot > 0 else math.nan

    if not slope > 0:
        raise InsufficientSpan("回归斜率非正，输出噪声未随 N_in 增加",
                               {"slope": slope, "intercept": intercept})

    ratio = intercept / slope - correction
    n_add_ex = bands * ratio
    n_add = n_add_ex + (0.5 if options.idler_band else 0.0)
    negative = intercept < 0
    if negative:
        logger.warning(f"[WARNING] 回归截距为负 ({intercept:.4g})，N_add={n_add:.4g} 低于量子极限")
    return YFactorFit(
        slope=slope, intercept=intercept, g_rest=slope / bands,
        n_add_ex=n_add_ex, n_add=n_add,
        correction=bands * correction if options.correction == "mean" else 0.0,
        r2=r2, negative_intercept=negative,
    )


@dataclass
class PipelineOptions:
    """逐频点流水线选项"""
    guard_bins: int = 3
    correction: str = "none"
    n_rest: Optional[float] = None
    weighted: bool = False
    idler_band: bool = True
    workers: int = 1
    progress: bool = False


def _guard_mask(dataset: VTSSweepDataset, guard_bins: int) -> np.ndarray:
    if dataset.pump_freq_hz is None or guard_bins <= 0:
        return np.zeros(dataset.freqs.size, dtype=bool)
    half = guard_bins * dataset.bin_width * (1 + 1e-9)
    return np.abs(dataset.freqs - dataset.pump_freq_hz) <= half


def yfactor_pipeline(dataset: VTSSweepDataset,
                     options: Optional[PipelineOptions] = None) -> NoiseResult:
    """逐频点 Y 因子提取

    泵浦附近 ±guard_bins 个频点被标记为 guard 而不拟合；单频点失败时记录错误码，
    对应 n_add 与 r2 为 nan。结果与 workers 数无关。
    """
    options = options or PipelineOptions()
    renorm = renormalize_noise(dataset)
    guard = _guard_mask(dataset, options.guard_bins)

    def solve(j: int) -> Tuple[str, Optional[YFactorFit]]:
        if guard[j]:
            return "guard", None
        f = dataset.freqs[j]
        n_in = johnson_quanta(dataset.temps, f)
        y = renorm[:, j]
        if dataset.rbw_hz is not None:
            y = y / (H * f * dataset.rbw_hz)
        gains = dataset.gain_traces[:, j]
        reg_opts = YFactorOptions(
            correction=options.correction,
            n_rest=options.n_rest,
            mean_gain=float(np.mean(gains)),
            point_gains=gains,
            weights=1.0 / y ** 2 if options.weighted else None,
            idler_band=options.idler_band,
        )
        try:
            return "ok", yfactor_regression(list(zip(n_in, y)), reg_opts)
        except WJPAError as e:
            return e.code, None

    indices = range(dataset.freqs.size)
    if options.workers > 1:
        with ThreadPoolExecutor(max_workers=options.workers) as pool:
            results = list(tqdm(pool.map(solve, indices), total=len(indices),
                                disable=not options.progress, desc="yfactor"))
    else:
        results = [solve(j) for j in tqdm(indices, disable=not options.progress, desc="yfactor")]

    nan = np.full(dataset.freqs.size, np.nan)
    n_add, g_rest, r2, n_add_ex = nan.copy(), nan.copy(), nan.copy(), nan.copy()
    status = []
    for j, (code, fit) in enumerate(results):
        status.append(code)
        if fit is not None:
            n_add[j], g_rest[j], r2[j], n_add_ex[j] = fit.n_add, fit.g_rest, fit.r2, fit.n_add_ex

    failed = [s for s in status if s not in ("ok", "guard")]
    if failed:
        logger.warning(f"[WARNING] {len(failed)} 个频点回归失败")
    return NoiseResult(
        freqs=dataset.freqs, n_add=n_add, g_rest=g_rest, fit_r2=r2, n_add_ex=n_add_ex,
        min_gain=np.min(dataset.gain_traces, axis=0), status=status,
    )
