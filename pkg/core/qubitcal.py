"""
量子比特功率计标定模块

负责以量子比特的 AC Stark 位移作为功率计:
- 色散读出腔的稳态腔场振幅与 Stark 位移
- Ramsey 条纹相位提取
- 由 Stark 位移-功率斜率反推腔端功率比例与系统增益
- 频谱分析仪功率 ↔ 光子数换算
- 系统噪声温度与测量效率
"""

import logging
import math
from dataclasses import dataclass, asdict
from typing import Any, Dict, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import linregress

from core.constants import HBAR, H, K_B, db_to_linear, watts_to_dbm
from core.errors import LowContrast, NonlinearStark, ValidationError, require_positive

logger = logging.getLogger(__name__)

MIN_FRINGE_POINTS = 8
FAR_DETUNING_FACTOR = 10.0


@dataclass(frozen=True)
class DispersiveDevice:
    """色散耦合的比特-读出腔参数 (角频率，rad/s)"""
    omega_r: float
    omega_d: float
    chi: float
    kappa: float
    tau: float       # Ramsey 间隔 s

    def __post_init__(self):
        require_positive("kappa", self.kappa)
        require_positive("tau", self.tau)
        require_positive("omega_r", self.omega_r)
        require_positive("omega_d", self.omega_d)

    @property
    def delta_r(self) -> float:
        """Δ_r = ω_r − ω_d"""
        return self.omega_r - self.omega_d

    @classmethod
    def from_hz(cls, f_r: float, f_d: float, chi_hz: float, kappa_hz: float,
                tau: float) -> "DispersiveDevice":
        two_pi = 2 * math.pi
        return cls(omega_r=two_pi * f_r, omega_d=two_pi * f_d, chi=two_pi * chi_hz,
                   kappa=two_pi * kappa_hz, tau=tau)

    @classmethod
    def from_config(cls, section: Dict[str, Any]) -> "DispersiveDevice":
        return cls.from_hz(
            f_r=float(section["f_r_hz"]),
            f_d=float(section["f_d_hz"]),
            chi_hz=float(section["chi_hz"]),
            kappa_hz=float(section["kappa_hz"]),
            tau=float(section["tau_s"]),
        )

    def is_far_detuned(self) -> bool:
        return abs(self.delta_r) > FAR_DETUNING_FACTOR * max(self.kappa, abs(self.chi))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class RamseyFringe:
    """Ramsey 条纹: 第二个 π/2 脉冲相位 θ 与读出信号"""
    theta: np.ndarray
    signal: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        signal = np.asarray(self.signal, dtype=float)
        if theta.shape != signal.shape or theta.ndim != 1:
            raise ValidationError("theta 与 signal 长度不一致")
        if theta.size < MIN_FRINGE_POINTS:
            raise ValidationError(f"条纹至少需要 {MIN_FRINGE_POINTS} 个点: {theta.size}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "signal", signal)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"theta_rad": self.theta, "signal": self.signal})


class RamseyFit(NamedTuple):
    dphi: float
    contrast: float
    offset: float


@dataclass
class StarkCalibration:
    """Stark 功率计标定结果"""
    dphase_dP: float           # rad/W (室温驱动功率)
    P_ratio: float             # 腔端功率 / 室温功率
    g_sys_db: float            # 系统增益 dB，无参考输出时为 nan
    stark_per_eps2: float = math.nan   # Δω/|ε_d|²
    eps2_per_watt: float = math.nan    # |ε_d|² / P_RT
    relative_residual: float = 0.0
    flagged: bool = False
    reason: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class Spectrum:
    """频谱分析仪迹线 (相对驱动频率的偏移)"""
    offsets: np.ndarray
    power_w: np.ndarray

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=float)
        self.power_w = np.asarray(self.power_w, dtype=float)
        if self.offsets.shape != self.power_w.shape:
            raise ValidationError("频谱偏移与功率长度不一致")

    @property
    def power_dbm(self) -> np.ndarray:
        return watts_to_dbm(self.power_w)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"offset_hz": self.offsets, "p_dbm": self.power_dbm})


# ---------------------------------------------------------------------------
# Stark 位移

def cavity_amplitudes(dev: DispersiveDevice, eps_d: complex) -> Tuple[complex, complex]:
    """比特处于 |g⟩、|e⟩ 时的稳态腔场

    α_g = −jε/(κ/2 + jΔ_r)，α_e = −jε/(κ/2 + j(Δ_r − χ))
    """
    half = 0.5 * dev.kappa
    alpha_g = -1j * eps_d / (half + 1j * dev.delta_r)
    alpha_e = -1j * eps_d / (half + 1j * (dev.delta_r - dev.chi))
    return complex(alpha_g), complex(alpha_e)


def stark_coefficient(dev: DispersiveDevice) -> float:
    """Δω/|ε_d|² = χ·Re{1/((κ/2 − j(Δ_r−χ))(κ/2 + jΔ_r))}"""
    half = 0.5 * dev.kappa
    return dev.chi * (1.0 / ((half - 1j * (dev.delta_r - dev.chi)) * (half + 1j * dev.delta_r))).real


def stark_shift(dev: DispersiveDevice, eps_d: complex) -> float:
    """Δω = χ·Re{α_e*·α_g}，rad/s"""
    alpha_g, alpha_e = cavity_amplitudes(dev, eps_d)
    return float(dev.chi * (alpha_e.conjugate() * alpha_g).real)


def drive_from_power(dev: DispersiveDevice, P_cavity: float) -> float:
    """腔端功率对应的 |ε_d|，P = ħω_d|ε_d|²/κ"""
    if P_cavity < 0:
        raise ValidationError(f"功率不能为负: {P_cavity}")
    return math.sqrt(dev.kappa * P_cavity / (HBAR * dev.omega_d))


# ---------------------------------------------------------------------------
# Ramsey

def ramsey_phase(fringe: RamseyFringe) -> RamseyFit:
    """线性最小二乘拟合 A·cos(θ + Δφ) + B

    Returns:
        RamseyFit(dphi ∈ (−π, π], contrast A, offset B)
    """
    theta, signal = fringe.theta, fringe.signal
    X = np.column_stack([np.cos(theta), np.sin(theta), np.ones_like(theta)])
    coef, _, _, _ = np.linalg.lstsq(X, signal, rcond=None)
    c1, c2, offset = (float(c) for c in coef)
    contrast = math.hypot(c1, c2)

    residual = signal - X @ coef
    dof = max(theta.size - 3, 1)
    sigma = math.sqrt(float(np.sum(residual ** 2)) / dof)
    floor = max(5.0 * sigma * math.sqrt(2.0 / theta.size),
                1e-12 * max(1.0, float(np.max(np.abs(signal)))))
    if contrast <= floor:
        raise LowContrast(f"条纹幅度 {contrast:.3g} 低于噪声底 {floor:.3g}",
                          {"contrast": contrast, "noise_floor": floor})

    dphi = math.atan2(-c2, c1)
    if dphi <= -math.pi:
        dphi = math.pi
    return RamseyFit(dphi=dphi, contrast=contrast, offset=offset)


def unwrap_phase_series(powers: Sequence[float], dphis: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """按功率排序并以 (0, 0) 为起点做最近分支延拓"""
    order = np.argsort(np.asarray(powers, dtype=float), kind="stable")
    p = np.concatenate([[0.0], np.asarray(powers, dtype=float)[order]])
    phi = np.concatenate([[0.0], np.asarray(dphis, dtype=float)[order]])
    return p, np.unwrap(phi)


def stark_power_calibration(dev: DispersiveDevice,
                            series: Sequence[Tuple[float, float]],
                            output_reference: Optional[Tuple[float, float]] = None,
                            rel_tol: float = 0.05) -> StarkCalibration:
    """由 (室温驱动功率 W, Ramsey 相移 rad) 序列标定腔端功率

    Args:
        dev: 色散器件参数
        series: 至少 3 个功率点
        output_reference: (室温驱动功率 W, 分析仪处测得功率 W)，用于计算系统增益
        rel_tol: 线性拟合相对残差上限

    Returns:
        StarkCalibration
    """
    if len(series) < 3:
        raise ValidationError(f"至少需要 3 个功率点: {len(series)}")
    powers = [float(s[0]) for s in series]
    if any(p < 0 for p in powers):
        raise ValidationError("驱动功率不能为负")
    if not dev.is_far_detuned():
        logger.warning(f"[WARNING] |Δ_r| 未远大于 κ 和 |χ|，色散近似可能失效 "
                       f"(Δ_r/2π={dev.delta_r / (2 * math.pi):.4g} Hz)")

    p, phi = unwrap_phase_series(powers, [s[1] for s in series])
    shift = phi / dev.tau
    reg = linregress(p, shift)
    slope = float(reg.slope)
    coeff = stark_coefficient(dev)

    if slope == 0 or not np.any(shift):
        logger.warning("[WARNING] Stark 位移斜率为零，无法标定功率")
        return StarkCalibration(dphase_dP=0.0, P_ratio=math.nan, g_sys_db=math.nan,
                                stark_per_eps2=coeff, flagged=True, reason="zero_slope")

    fitted = reg.intercept + slope * p
    rel = float(np.sqrt(np.mean((shift - fitted) ** 2)) / np.max(np.abs(shift)))
    if rel > rel_tol:
        raise NonlinearStark(f"Stark 位移偏离线性: 相对残差 {rel:.3g}",
                             {"relative_residual": rel, "tolerance": rel_tol})

    eps2_per_watt = slope / coeff
    flagged, reason = False, ""
    if eps2_per_watt <= 0:
        flagged, reason = True, "slope_sign_mismatch"
        logger.warning("[WARNING] Stark 斜率符号与 χ 不一致")
    p_ratio = HBAR * dev.omega_d * eps2_per_watt / dev.kappa

    g_sys_db = math.nan
    if output_reference is not None and p_ratio > 0:
        p_rt_in, p_out = output_reference
        g_sys_db = system_gain(p_out, p_ratio * p_rt_in)

    return StarkCalibration(
        dphase_dP=slope * dev.tau,
        P_ratio=p_ratio,
        g_sys_db=g_sys_db,
        stark_per_eps2=coeff,
        eps2_per_watt=eps2_per_watt,
        relative_residual=rel,
        flagged=flagged,
        reason=reason,
    )


# ---------------------------------------------------------------------------
# 增益、光子数与效率

def system_gain(P_RT_out: float, P_cavity: float) -> float:
    """G_sys = P_RT/P_cavity，单位 dB"""
    require_positive("P_RT_out", P_RT_out)
    require_positive("P_cavity", P_cavity)
    return 10 * math.log10(P_RT_out / P_cavity)


SpectrumLike = Union[Spectrum, Sequence[Tuple[float, float]]]


def _as_spectrum(spectrum: SpectrumLike) -> Spectrum:
    if isinstance(spectrum, Spectrum):
        return spectrum
    rows = list(spectrum)
    return Spectrum(offsets=[r[0] for r in rows], power_w=[r[1] for r in rows])


def spectrum_to_quanta(spectrum: SpectrumLike, g_sys_db: float, omega_d: float,
                       r_bw: float) -> np.ndarray:
    """N(Δf) = P_SA/(G_sys·ħω_d·r_BW)"""
    require_positive("r_bw", r_bw)
    spec = _as_spectrum(spectrum)
    return spec.power_w / (db_to_linear(g_sys_db) * HBAR * omega_d * r_bw)


def quanta_to_spectrum(offsets: Sequence[float], quanta: Sequence[float], g_sys_db: float,
                       omega_d: float, r_bw: float) -> Spectrum:
    """spectrum_to_quanta 的逆变换"""
    require_positive("r_bw", r_bw)
    power = np.asarray(quanta, dtype=float) * db_to_linear(g_sys_db) * HBAR * omega_d * r_bw
    return Spectrum(offsets=offsets, power_w=power)


def noise_temperature(N_sys, f: float):
    """T_sys = N·hf/k_B"""
    require_positive("f", f)
    return np.asarray(N_sys, dtype=float) * H * f / K_B if np.ndim(N_sys) else float(N_sys) * H * f / K_B


def efficiency(T_sys: float, f: float) -> float:
    """η = hf/(k_B·T_sys)，不截断，大于 1 时告警"""
    require_positive("T_sys", T_sys)
    require_positive("f", f)
    eta = H * f / (K_B * T_sys)
    if eta > 1:
        logger.warning(f"[WARNING] 效率 η={eta:.3f} > 1 (N_sys < 1)")
    return eta


def noise_report(N_sys: float, f: float) -> Dict[str, float]:
    """{n_sys, t_sys_k, eta}"""
    t_sys = noise_temperature(N_sys, f)
    return {"n_sys": float(N_sys), "t_sys_k": t_sys, "eta": efficiency(t_sys, f)}
