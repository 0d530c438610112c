"""
参量放大模块

负责 WJPA 的线性响应与单泵浦四波混频增益:
- 单端口线性反射模型与带背景的复数拟合 (lmfit)
- 磁通扫描下的谐振频率映射
- Kerr 腔泵浦稳态 (三次方程，双稳分支选择)
- 线性化小信号增益、增益曲线与 3 dB 带宽
- 平均场饱和模型下的 P_1dB 及其随泵浦功率的斜率

约定: LinearMode 中频率和 κ 均为 Hz (κ/2π)，K 与失谐为 rad/s。
"""

import logging
import math
from dataclasses import dataclass, asdict
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import lmfit
import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.stats import linregress

from core.circuit import (
    ComplexTrace, DeviceCircuit, ModeParams, analyze_mode, reflection_from_circuit,
    squid_inductance,
)
from core.constants import HBAR, watts_to_dbm
from core.errors import (
    FitDiverged, InsufficientPoints, InsufficientSpan, NoCompressionFound,
    NoPhysicalRoot, UnstableOperatingPoint, ValidationError, WJPAError,
)

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
MIN_FIT_POINTS = 50
FIT_RESIDUAL_THRESHOLD = 0.1
ROOT_RESIDUAL_TOL = 1e-9


class Branch(Enum):
    """Kerr 双稳分支"""
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class LinearMode:
    """线性模式: 频率与耦合速率 (Hz)"""
    f_res: float
    kappa_ext: float
    kappa_int: float = 0.0

    def __post_init__(self):
        if not self.f_res > 0:
            raise ValidationError(f"f_res 必须为正: {self.f_res}")
        if not self.kappa_ext > 0:
            raise ValidationError(f"kappa_ext 必须为正: {self.kappa_ext}")
        if self.kappa_int < 0:
            raise ValidationError(f"kappa_int 不能为负: {self.kappa_int}")

    @property
    def kappa(self) -> float:
        return self.kappa_ext + self.kappa_int

    @property
    def omega0(self) -> float:
        return TWO_PI * self.f_res

    @property
    def kappa_rad(self) -> float:
        return TWO_PI * self.kappa

    @property
    def kappa_ext_rad(self) -> float:
        return TWO_PI * self.kappa_ext

    @classmethod
    def from_mode_params(cls, mode: ModeParams) -> "LinearMode":
        return cls(f_res=mode.f_res, kappa_ext=mode.kappa_ext, kappa_int=mode.kappa_int)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "f_res_hz": self.f_res,
            "kappa_ext_hz": self.kappa_ext,
            "kappa_int_hz": self.kappa_int,
        }


@dataclass(frozen=True)
class BackgroundModel:
    """线路背景: 幅度仿射、相位线性 (以 f_center 为参考)"""
    amp0: float
    amp_slope: float = 0.0     # 1/Hz
    phase0: float = 0.0        # rad
    phase_slope: float = 0.0   # rad/Hz
    f_center: float = 0.0      # Hz

    def __post_init__(self):
        if not self.amp0 > 0:
            raise ValidationError(f"amp0 必须为正: {self.amp0}")

    def evaluate(self, f) -> np.ndarray:
        df = np.asarray(f, dtype=float) - self.f_center
        return (self.amp0 + self.amp_slope * df) * np.exp(1j * (self.phase0 + self.phase_slope * df))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class PumpOperatingPoint:
    """泵浦工作点"""
    f_pump: float            # Hz
    P_pump: float            # W (器件端口)
    n_p: float               # 腔内泵浦光子数
    delta_p: float           # ω_p − ω0，rad/s
    branch: Branch = Branch.LOW

    @property
    def P_pump_dbm(self) -> float:
        return float(watts_to_dbm(self.P_pump))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "f_pump_hz": self.f_pump,
            "p_pump_w": self.P_pump,
            "p_pump_dbm": self.P_pump_dbm,
            "n_p": self.n_p,
            "delta_p_rad_s": self.delta_p,
            "branch": self.branch.value,
        }


@dataclass
class GainResult:
    """增益曲线 (线性功率单位) 与其峰值/带宽"""
    freqs: np.ndarray
    gain: np.ndarray
    peak_gain: float
    f_peak: float
    bandwidth_3db: float

    @property
    def gain_db(self) -> np.ndarray:
        return 10 * np.log10(self.gain)

    @property
    def peak_gain_db(self) -> float:
        return 10 * math.log10(self.peak_gain)

    def summary(self) -> Dict[str, Any]:
        return {
            "peak_gain_db": self.peak_gain_db,
            "f_peak_hz": self.f_peak,
            "bandwidth_3db_hz": self.bandwidth_3db,
            "gain_bandwidth_hz": gain_bandwidth_product(self),
        }


class ReflectionFit(NamedTuple):
    mode: LinearMode
    background: BackgroundModel
    residual: float
    conjugated: bool = False  # 拟合在共轭后的数据上进行

    def evaluate(self, f) -> np.ndarray:
        """按输入迹线的相位约定给出拟合模型"""
        model = linear_s11(self.mode, f) * self.background.evaluate(f)
        return np.conj(model) if self.conjugated else model


class FluxPoint(NamedTuple):
    phi_ext: float
    L_J: float
    mode: LinearMode
    residual: float


@dataclass
class FluxMap:
    """磁通扫描结果，失败点记录在 errors 中"""
    points: List[FluxPoint]
    errors: List[Dict[str, Any]]

    def __iter__(self):
        return iter((p.phi_ext, p.mode) for p in self.points)


# ---------------------------------------------------------------------------
# 线性反射

def linear_s11(mode: LinearMode, f):
    """单端口反射 Γ = [(κe−κi)/2 + iΔ] / [κ/2 − iΔ]，Δ = ω − ω0"""
    fa = np.asarray(f, dtype=float)
    detuning = TWO_PI * (fa - mode.f_res)
    ke, ki = mode.kappa_ext_rad, TWO_PI * mode.kappa_int
    gamma = (0.5 * (ke - ki) + 1j * detuning) / (0.5 * (ke + ki) - 1j * detuning)
    return complex(gamma) if np.ndim(gamma) == 0 else gamma


def _reflection_model(f, f_res, kappa_ext, kappa_int, amp0, amp_slope, phase0,
                      phase_slope, f_center):
    """拟合用模型，全部频率量以 GHz 计"""
    detuning = f - f_res
    gamma = (0.5 * (kappa_ext - kappa_int) + 1j * detuning) / (0.5 * (kappa_ext + kappa_int) - 1j * detuning)
    df = f - f_center
    return (amp0 + amp_slope * df) * np.exp(1j * (phase0 + phase_slope * df)) * gamma


class ReflectionModel(lmfit.model.Model):
    """带线路背景的单端口反射模型"""

    def __init__(self, *args, **kwargs):
        super().__init__(_reflection_model, *args, **kwargs)
        self.set_param_hint("kappa_ext", min=0)
        self.set_param_hint("kappa_int", min=0)
        self.set_param_hint("amp0", min=0)
        self.set_param_hint("f_center", vary=False)

    def guess(self, data, f=None, **kwargs):
        """由相位斜率最大值估计谐振 (f 以 GHz 计)"""
        if f is None:
            return None
        f_center = 0.5 * (f[0] + f[-1])
        span = f[-1] - f[0]
        edge = max(3, f.size // 10)
        phase = np.unwrap(np.angle(data))
        amp0 = float(np.median(np.abs(np.concatenate([data[:edge], data[-edge:]]))))

        # 过耦合谐振贡献 +2π 相位缠绕
        total = phase[-1] - phase[0]
        winding = TWO_PI if total > math.pi else 0.0
        phase_slope = (total - winding) / span

        resonant = phase - phase_slope * (f - f_center)
        slope = np.gradient(resonant, f)
        i0 = int(np.argmax(np.abs(slope)))
        max_slope = abs(float(slope[i0]))
        if not max_slope > 0:
            raise FitDiverged("反射相位没有可分辨的谐振特征", {"max_phase_slope": max_slope})

        depth = float(np.clip(np.abs(data[i0]) / amp0, 0.05, 0.999)) if amp0 > 0 else 0.999
        if winding:
            kappa = 2.0 * (1.0 + 1.0 / depth) / max_slope
            phase0 = resonant[i0]
        else:
            kappa = 2.0 * (1.0 / depth - 1.0) / max_slope
            phase0 = resonant[i0] - math.pi
        if not np.isfinite(kappa) or kappa <= 0 or kappa >= span:
            raise FitDiverged("反射相位没有可分辨的谐振特征",
                              {"kappa_guess_ghz": float(kappa), "span_ghz": float(span)})

        sign = 1.0 if winding else -1.0
        params = self.make_params(
            f_res=float(f[i0]),
            kappa_ext=0.5 * kappa * (1 + sign * depth),
            kappa_int=0.5 * kappa * (1 - sign * depth),
            amp0=amp0, amp_slope=0.0,
            phase0=float(phase0), phase_slope=float(phase_slope),
            f_center=float(f_center),
        )
        params["f_res"].set(min=float(f[0]), max=float(f[-1]))
        return lmfit.models.update_param_vals(params, self.prefix, **kwargs)


def fit_reflection(trace: ComplexTrace, guess: Optional[LinearMode] = None,
                   threshold: float = FIT_RESIDUAL_THRESHOLD) -> ReflectionFit:
    """复数最小二乘拟合 BackgroundModel × linear_s11

    Args:
        trace: 反射迹线
        guess: 初值 (缺省时由相位斜率自动估计)
        threshold: 相对 RMS 残差上限

    Returns:
        ReflectionFit(mode, background, residual, conjugated)，residual 为复数残差的 RMS；
        输入若为 e^{jωt} 约定，conjugated 为 True，背景参数对应取共轭后的数据
    """
    if len(trace) < MIN_FIT_POINTS:
        raise InsufficientSpan(f"拟合至少需要 {MIN_FIT_POINTS} 个点",
                               {"points": len(trace)})

    f = trace.freqs * 1e-9
    data = trace.values
    # e^{jωt} 约定的迹线 (如电路模型) 呈 −2π 缠绕，先取共轭
    unwrapped = np.unwrap(np.angle(data))
    conjugated = bool(unwrapped[-1] - unwrapped[0] < -math.pi)
    if conjugated:
        data = np.conj(data)
    model = ReflectionModel()
    params = model.guess(data, f=f)
    if guess is not None:
        params["f_res"].set(value=guess.f_res * 1e-9)
        params["kappa_ext"].set(value=guess.kappa_ext * 1e-9)
        params["kappa_int"].set(value=max(guess.kappa_int, 1e-4 * guess.kappa_ext) * 1e-9)
    kappa0 = params["kappa_ext"].value + params["kappa_int"].value
    span = f[-1] - f[0]
    if span < 3 * kappa0:
        raise InsufficientSpan("频率跨度不足 3 个线宽",
                               {"span_hz": span * 1e9, "kappa_hz": kappa0 * 1e9})

    result = model.fit(data, params, f=f)
    values = result.params.valuesdict()
    fitted = model.eval(result.params, f=f)
    residual = float(np.sqrt(np.mean(np.abs(fitted - data) ** 2)))
    scale = float(np.sqrt(np.mean(np.abs(data) ** 2)))
    kappa_fit = values["kappa_ext"] + values["kappa_int"]

    if not all(np.isfinite(v) for v in values.values()):
        raise FitDiverged("拟合参数非有限", {"params": {k: float(v) for k, v in values.items()}})
    if not (f[0] <= values["f_res"] <= f[-1]) or kappa_fit >= span or values["kappa_ext"] <= 0:
        raise FitDiverged("拟合结果超出迹线范围",
                          {"f_res_hz": values["f_res"] * 1e9, "kappa_hz": kappa_fit * 1e9})
    if residual > threshold * scale:
        raise FitDiverged(f"拟合残差过大: {residual / scale:.3g}",
                          {"relative_residual": residual / scale, "threshold": threshold})

    mode = LinearMode(f_res=values["f_res"] * 1e9,
                      kappa_ext=values["kappa_ext"] * 1e9,
                      kappa_int=values["kappa_int"] * 1e9)
    background = BackgroundModel(
        amp0=values["amp0"],
        amp_slope=values["amp_slope"] * 1e-9,
        phase0=values["phase0"],
        phase_slope=values["phase_slope"] * 1e-9,
        f_center=values["f_center"] * 1e9,
    )
    return ReflectionFit(mode, background, residual, conjugated)


def flux_map(circuit: DeviceCircuit, flux_grid: Sequence[float], points: int = 801,
             min_window: float = 50e6) -> FluxMap:
    """磁通扫描: squid_inductance → reflection_from_circuit → fit_reflection

    每个磁通点的拟合窗口取 f_res ± max(6κ, min_window)，单点失败不影响其他点。
    """
    result = FluxMap(points=[], errors=[])
    for phi in flux_grid:
        phi = float(phi)
        try:
            L_J = squid_inductance(circuit.L_J0, phi)
            tuned = circuit.with_inductance(L_J)
            est = analyze_mode(tuned)
            half = max(6 * (est.kappa_ext + est.kappa_int), min_window)
            grid = np.linspace(est.f_res - half, est.f_res + half, points)
            trace = reflection_from_circuit(tuned, grid)
            fit = fit_reflection(trace, guess=LinearMode.from_mode_params(est))
            result.points.append(FluxPoint(phi, L_J, fit.mode, fit.residual))
        except WJPAError as e:
            logger.warning(f"[WARNING] 磁通点 φ={phi} 失败: {e.code}: {e.message}")
            result.errors.append({"phi_ext": phi, **e.to_dict()})
    return result


# ---------------------------------------------------------------------------
# 泵浦稳态

def _cubic_residual(mode: LinearMode, K: float, delta_p: float, n: float, drive: float) -> float:
    half = 0.5 * mode.kappa_rad
    return n * (half * half + (delta_p + K * n) ** 2) - drive


def _steady_state_roots(mode: LinearMode, K: float, delta_p: float, drive: float) -> List[float]:
    """n·[(κ/2)² + (Δ+Kn)²] = drive 的全部非负实根 (升序)"""
    half = 0.5 * mode.kappa_rad
    if drive == 0:
        return [0.0]
    if K == 0:
        return [drive / (half * half + delta_p * delta_p)]

    # 无量纲化: s = |K|n/(κ/2)，d = Δ/(κ/2)
    sigma = math.copysign(1.0, K)
    d = delta_p / half
    xi = drive * abs(K) / half ** 3
    coeffs = [1.0, 2 * sigma * d, 1 + d * d, -xi]

    roots = []
    for z in np.roots(coeffs):
        if abs(z.imag) > 1e-6 * max(1.0, abs(z)):
            continue
        s = max(float(z.real), 0.0)
        for _ in range(8):
            f = ((s + 2 * sigma * d) * s + 1 + d * d) * s - xi
            df = (3 * s + 4 * sigma * d) * s + 1 + d * d
            if df == 0:
                break
            step = f / df
            s -= step
            if abs(step) <= 1e-15 * max(1.0, abs(s)):
                break
        if s >= 0 and not any(abs(s - r) <= 1e-9 * max(1.0, s) for r in roots):
            roots.append(s)
    return sorted(r * half / abs(K) for r in roots)


def _pump_drive(mode: LinearMode, f_pump: float, P_pump: float) -> float:
    return mode.kappa_ext_rad * P_pump / (HBAR * TWO_PI * f_pump)


def pump_steady_state(mode: LinearMode, K: float, f_pump: float, P_pump: float,
                      branch: Branch = Branch.LOW) -> PumpOperatingPoint:
    """求解泵浦稳态三次方程

    Args:
        mode: 线性模式
        K: 自 Kerr 系数 rad/s
        f_pump: 泵浦频率 Hz
        P_pump: 器件端口泵浦功率 W
        branch: 双稳区选择的分支 (缺省低分支，即由 P=0 连续延拓)

    Returns:
        PumpOperatingPoint
    """
    if P_pump < 0:
        raise ValidationError(f"泵浦功率不能为负: {P_pump}")
    if not f_pump > 0:
        raise ValidationError(f"泵浦频率必须为正: {f_pump}")
    branch = Branch(branch)
    delta_p = TWO_PI * (f_pump - mode.f_res)
    drive = _pump_drive(mode, f_pump, P_pump)
    roots = _steady_state_roots(mode, K, delta_p, drive)
    if not roots:
        raise NoPhysicalRoot("三次方程未找到非负实根",
                             {"delta_p": delta_p, "drive": drive, "K": K})

    n = roots[-1] if branch is Branch.HIGH else roots[0]
    tag = Branch.HIGH if (branch is Branch.HIGH and len(roots) > 1) else Branch.LOW
    residual = _cubic_residual(mode, K, delta_p, n, drive)
    if abs(residual) > ROOT_RESIDUAL_TOL * max(drive, 1e-300):
        raise NoPhysicalRoot("三次方程根的残差过大",
                             {"residual": residual, "drive": drive})
    return PumpOperatingPoint(f_pump=f_pump, P_pump=P_pump, n_p=n,
                              delta_p=delta_p, branch=tag)


def steady_state_root_count(mode: LinearMode, K: float, delta_p: float, P_pump: float) -> int:
    """给定失谐和泵浦功率下的非负实根个数 (1 或 3)"""
    f_pump = mode.f_res + delta_p / TWO_PI
    return len(_steady_state_roots(mode, K, delta_p, _pump_drive(mode, f_pump, P_pump)))


def _operating_point_from_photons(mode: LinearMode, K: float, n_p: float,
                                  delta_p: float) -> PumpOperatingPoint:
    """由 (n_p, Δ_p) 反推泵浦功率并标记分支"""
    half = 0.5 * mode.kappa_rad
    f_pump = mode.f_res + delta_p / TWO_PI
    drive = n_p * (half * half + (delta_p + K * n_p) ** 2)
    P_pump = drive * HBAR * TWO_PI * f_pump / mode.kappa_ext_rad

    roots = _steady_state_roots(mode, K, delta_p, drive)
    nearest = min(range(len(roots)), key=lambda i: abs(roots[i] - n_p))
    branch = Branch.HIGH if (len(roots) > 1 and nearest == len(roots) - 1) else Branch.LOW
    return PumpOperatingPoint(f_pump=f_pump, P_pump=P_pump, n_p=roots[nearest],
                              delta_p=delta_p, branch=branch)


# ---------------------------------------------------------------------------
# 小信号增益

def _dressed_detuning(K: float, op: PumpOperatingPoint, extra_photons: float = 0.0) -> float:
    return op.delta_p + 2 * K * (op.n_p + extra_photons)


def _inverse_elements(mode: LinearMode, K: float, n_p: float, dressed: float, delta):
    """线性化矩阵 M(δ) 的逆的 (1,1)、(1,2)、(2,1) 元"""
    half = 0.5 * mode.kappa_rad
    delta = np.asarray(delta, dtype=float)
    m11 = half - 1j * (delta + dressed)
    m22 = half - 1j * (delta - dressed)
    coupling = K * n_p
    det = m11 * m22 - coupling * coupling
    return m22 / det, 1j * coupling / det, -1j * coupling / det


def max_growth_rate(mode: LinearMode, K: float, n_p: float, dressed: float) -> float:
    """线性化系统本征值实部的最大值 −κ/2 + Re√(K²n²−Δ̃²)"""
    root = np.sqrt(complex((K * n_p) ** 2 - dressed * dressed))
    return -0.5 * mode.kappa_rad + root.real


def _check_stability(mode: LinearMode, K: float, op: PumpOperatingPoint, dressed: float):
    rate = max_growth_rate(mode, K, op.n_p, dressed)
    if rate > 0:
        raise UnstableOperatingPoint(
            "线性化系统存在正实部本征值，超过参量振荡阈值",
            {"growth_rate": rate, "n_p": op.n_p, "delta_p": op.delta_p},
        )


def small_signal_gain(mode: LinearMode, K: float, op: PumpOperatingPoint, delta):
    """线性化 Bogoliubov 增益

    Args:
        delta: 信号相对泵浦的失谐 rad/s (标量或数组)

    Returns:
        (G_signal, G_idler)，线性功率单位
    """
    dressed = _dressed_detuning(K, op)
    _check_stability(mode, K, op, dressed)
    inv11, inv12, _ = _inverse_elements(mode, K, op.n_p, dressed, delta)
    ke = mode.kappa_ext_rad
    g_s = np.abs(ke * inv11 - 1.0) ** 2
    g_i = np.abs(ke * inv12) ** 2
    if g_s.ndim == 0:
        return float(g_s), float(g_i)
    return g_s, g_i


def _bandwidth(freqs: np.ndarray, gain: np.ndarray, i_peak: int) -> float:
    half = 0.5 * gain[i_peak]

    def crossing(indices) -> Optional[float]:
        prev = i_peak
        for i in indices:
            if gain[i] < half:
                g0, g1 = gain[prev], gain[i]
                return freqs[prev] + (half - g0) * (freqs[i] - freqs[prev]) / (g1 - g0)
            prev = i
        return None

    lo = crossing(range(i_peak - 1, -1, -1))
    hi = crossing(range(i_peak + 1, freqs.size))
    if lo is None or hi is None:
        return math.nan
    return float(hi - lo)


def gain_profile(mode: LinearMode, K: float, op: PumpOperatingPoint,
                 grid: Sequence[float]) -> GainResult:
    """信号增益随频率的曲线，线性插值提取 3 dB 带宽 (未跨过半峰时为 nan)"""
    freqs = np.asarray(grid, dtype=float)
    delta = TWO_PI * (freqs - op.f_pump)
    gain, _ = small_signal_gain(mode, K, op, delta)
    gain = np.atleast_1d(gain)
    i_peak = int(np.argmax(gain))
    return GainResult(
        freqs=freqs,
        gain=gain,
        peak_gain=float(gain[i_peak]),
        f_peak=float(freqs[i_peak]),
        bandwidth_3db=_bandwidth(freqs, gain, i_peak),
    )


def gain_bandwidth_product(result: GainResult) -> float:
    """B·√G (Hz)"""
    return result.bandwidth_3db * math.sqrt(result.peak_gain)


def design_operating_point(mode: LinearMode, K: float, target_gain: float) -> PumpOperatingPoint:
    """泵浦置于 Kerr 修正后的谐振 (Δ̃ = 0)，达到给定峰值增益

    Args:
        target_gain: 线性功率增益 (>1)
    """
    if K == 0:
        raise ValidationError("K = 0 时无法获得参量增益")
    if not target_gain > 1:
        raise ValidationError(f"目标增益必须大于 1: {target_gain}")
    kappa, ke = mode.kappa_rad, mode.kappa_ext_rad
    y2 = 1.0 - 2.0 * ke / (kappa * (1.0 + math.sqrt(target_gain)))
    if not 0 < y2 < 1:
        raise ValidationError("该耦合条件下无法达到目标增益",
                              {"target_gain": target_gain, "kappa_ext": mode.kappa_ext,
                               "kappa_int": mode.kappa_int})
    # |K|n = y·κ/2，Δ_p = −2Kn
    n_p = math.sqrt(y2) * 0.5 * kappa / abs(K)
    delta_p = -2 * K * n_p
    return _operating_point_from_photons(mode, K, n_p, delta_p)


def _center_gain(mode: LinearMode, K: float, n_p: float, dressed: float) -> float:
    inv11, _, _ = _inverse_elements(mode, K, n_p, dressed, 0.0)
    return float(np.abs(mode.kappa_ext_rad * inv11 - 1.0) ** 2)


def operating_point_for_gain(mode: LinearMode, K: float, n_p: float,
                             target_gain: float) -> PumpOperatingPoint:
    """固定泵浦光子数，重新调谐泵浦失谐使 δ=0 处增益等于目标值

    Δ̃ 取与 K 同号的一侧。
    """
    if K == 0 or not n_p > 0:
        raise ValidationError("需要非零 Kerr 系数和正的泵浦光子数")
    half = 0.5 * mode.kappa_rad
    coupling = abs(K * n_p)
    if coupling >= half:
        raise UnstableOperatingPoint("Δ̃ = 0 处已超过振荡阈值",
                                     {"K_n": coupling, "kappa_half": half})
    if _center_gain(mode, K, n_p, 0.0) < target_gain:
        raise ValidationError("该泵浦光子数下无法达到目标增益",
                              {"n_p": n_p, "target_gain": target_gain})

    sign = math.copysign(1.0, K)
    t_hi = math.sqrt(coupling ** 2 + half ** 2 * (1 + target_gain))
    while _center_gain(mode, K, n_p, sign * t_hi) > target_gain:
        t_hi *= 2
    t = brentq(lambda x: _center_gain(mode, K, n_p, sign * x) - target_gain,
               0.0, t_hi, xtol=1e-12 * half, rtol=1e-14, maxiter=200)
    dressed = sign * t
    delta_p = dressed - 2 * K * n_p
    return _operating_point_from_photons(mode, K, n_p, delta_p)


# ---------------------------------------------------------------------------
# 饱和与 P_1dB

def _signal_photons(mode: LinearMode, K: float, op: PumpOperatingPoint, delta: float,
                    P_signal: float) -> float:
    """平均场自洽: 信号 + 闲频腔内光子数"""
    flux = P_signal / (HBAR * (TWO_PI * op.f_pump + delta))
    ke = mode.kappa_ext_rad

    def excess(n_s: float) -> float:
        inv11, _, inv21 = _inverse_elements(mode, K, op.n_p, _dressed_detuning(K, op, n_s), delta)
        return n_s - ke * (abs(inv11) ** 2 + abs(inv21) ** 2) * flux

    n0 = -excess(0.0)
    if n0 <= 0:
        return 0.0
    lo, hi = 0.0, n0
    for _ in range(200):
        if excess(hi) >= 0:
            break
        lo, hi = hi, 2 * hi
    else:
        raise NoCompressionFound("信号光子数自洽求解未收敛", {"P_signal": P_signal})
    return brentq(excess, lo, hi, rtol=1e-12, maxiter=200)


def compressed_gain(mode: LinearMode, K: float, op: PumpOperatingPoint, delta: float,
                    P_signal: float) -> float:
    """有限信号功率下的信号增益 (线性)"""
    n_s = _signal_photons(mode, K, op, delta, P_signal) if P_signal > 0 else 0.0
    inv11, _, _ = _inverse_elements(mode, K, op.n_p, _dressed_detuning(K, op, n_s), delta)
    return float(abs(mode.kappa_ext_rad * inv11 - 1.0) ** 2)


def p1db(mode: LinearMode, K: float, op: PumpOperatingPoint,
         small_signal_ref: Optional[float] = None, delta: Optional[float] = None,
         p_range: Tuple[float, float] = (1e-21, 1e-6), step_db: float = 0.25) -> float:
    """1 dB 压缩点的信号输入功率 (W)

    Args:
        small_signal_ref: 小信号增益参考 (线性)，缺省取 P→0 的增益
        delta: 信号失谐 rad/s，缺省 1e-3·κ
        p_range: 功率扫描范围 W
        step_db: 对数扫描步长
    """
    delta = 1e-3 * mode.kappa_rad if delta is None else float(delta)
    if small_signal_ref is None:
        small_signal_ref = small_signal_gain(mode, K, op, delta)[0]
    else:
        _check_stability(mode, K, op, _dressed_detuning(K, op))
    target_db = 10 * math.log10(small_signal_ref) - 1.0

    def drop(log_p: float) -> float:
        return 10 * math.log10(compressed_gain(mode, K, op, delta, 10 ** log_p)) - target_db

    log_lo, log_hi = math.log10(p_range[0]), math.log10(p_range[1])
    grid = np.arange(log_lo, log_hi + step_db / 10, step_db / 10)
    prev = grid[0]
    if drop(prev) <= 0:
        raise NoCompressionFound("扫描起点已压缩，请降低 p_range 下限",
                                 {"p_min_w": p_range[0]})
    for log_p in grid[1:]:
        if drop(log_p) <= 0:
            return 10 ** brentq(drop, prev, log_p, xtol=1e-9, maxiter=200)
        prev = log_p
    raise NoCompressionFound("扫描范围内增益未压缩 1 dB",
                             {"p_range_w": list(p_range), "ref_gain": small_signal_ref})


def p1db_slope(series: Sequence[Tuple[float, float]]) -> float:
    """P_1dB (dBm) 对泵浦功率 (dBm) 的最小二乘斜率"""
    if len(series) < 4:
        raise InsufficientPoints(f"斜率拟合至少需要 4 个点: {len(series)}",
                                 {"points": len(series)})
    x = np.array([s[0] for s in series], dtype=float)
    y = np.array([s[1] for s in series], dtype=float)
    if np.ptp(x) == 0:
        raise InsufficientPoints("泵浦功率没有变化")
    return float(linregress(x, y).slope)


def compression_series(mode: LinearMode, K: float, target_gain: float,
                       span_db: float = 3.0, points: int = 7) -> List[Tuple[float, float]]:
    """沿等增益工作点族的 (泵浦功率 dBm, P_1dB dBm) 序列

    从达到目标增益所需的最低泵浦功率开始，泵浦功率步进 span_db。
    """
    if points < 2:
        raise ValidationError("points 至少为 2")
    n_min = design_operating_point(mode, K, target_gain).n_p * (1 + 1e-9)

    def pump_power(n: float) -> float:
        return operating_point_for_gain(mode, K, n, target_gain).P_pump

    # 振荡阈值 |K|n < κ/2
    n_max = 0.5 * mode.kappa_rad / abs(K) * (1 - 1e-9)
    best = minimize_scalar(pump_power, bounds=(n_min, n_max), method="bounded",
                           options={"xatol": 1e-9 * n_min})
    n_start, p_start = float(best.x), float(best.fun)

    series = []
    for k in range(points):
        p_target = p_start * 10 ** (span_db * k / (points - 1) / 10)
        if k == 0:
            n = n_start
        else:
            if pump_power(n_max) < p_target:
                break
            n = brentq(lambda x: pump_power(x) - p_target, n_start, n_max, rtol=1e-12)
        op = operating_point_for_gain(mode, K, n, target_gain)
        series.append((op.P_pump_dbm, float(watts_to_dbm(p1db(mode, K, op)))))
    return series


def fixed_pump_series(mode: LinearMode, K: float, target_gain: float, gain_span_db: float = 6.0,
                      points: int = 7) -> List[Tuple[float, float, float]]:
    """固定泵浦频率、只改变泵浦功率的 (泵浦功率 dBm, P_1dB dBm, 中心增益 dB) 序列

    泵浦频率取目标增益的设计工作点；功率沿低分支从中心增益为
    target − gain_span_db 处对数步进到设计功率。
    """
    if points < 2:
        raise ValidationError("points 至少为 2")
    if not gain_span_db > 0:
        raise ValidationError(f"gain_span_db 必须为正: {gain_span_db}")
    design = design_operating_point(mode, K, target_gain)
    target_db = 10 * math.log10(target_gain)
    floor_db = target_db - gain_span_db
    if floor_db <= 0:
        raise ValidationError("增益下限必须高于 0 dB",
                              {"target_gain_db": target_db, "gain_span_db": gain_span_db})

    def center_gain_db(log_p: float) -> float:
        op = pump_steady_state(mode, K, design.f_pump, 10 ** log_p, Branch.LOW)
        return 10 * math.log10(_center_gain(mode, K, op.n_p, _dressed_detuning(K, op)))

    log_hi = math.log10(design.P_pump)
    log_lo = log_hi - 3.0
    if center_gain_db(log_lo) >= floor_db:
        raise NoCompressionFound("固定泵浦频率下未找到增益下限对应的泵浦功率",
                                 {"gain_floor_db": floor_db})
    log_start = brentq(lambda x: center_gain_db(x) - floor_db, log_lo, log_hi, xtol=1e-12)

    series = []
    for log_p in np.linspace(log_start, log_hi, points):
        op = pump_steady_state(mode, K, design.f_pump, 10 ** log_p, Branch.LOW)
        gain = _center_gain(mode, K, op.n_p, _dressed_detuning(K, op))
        series.append((op.P_pump_dbm, float(watts_to_dbm(p1db(mode, K, op))),
                       10 * math.log10(gain)))
    return series


def tune_over_flux(circuit: DeviceCircuit, flux_grid: Sequence[float], target_gain: float,
                   points: int = 801, span_factor: float = 5.0) -> List[Tuple[float, GainResult]]:
    """各磁通点重新设计泵浦后的增益曲线"""
    profiles = []
    for phi in flux_grid:
        tuned = circuit.with_inductance(squid_inductance(circuit.L_J0, float(phi)))
        params = analyze_mode(tuned)
        mode = LinearMode.from_mode_params(params)
        op = design_operating_point(mode, params.K, target_gain)
        half = span_factor * mode.kappa / math.sqrt(target_gain)
        grid = np.linspace(op.f_pump - half, op.f_pump + half, points)
        profiles.append((float(phi), gain_profile(mode, params.K, op, grid)))
    return profiles
