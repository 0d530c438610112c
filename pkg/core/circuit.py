"""
器件电路模块

负责 WJPA 电路模型 (磁通可调 SQUID 谐振腔 + 短路槽线短截线):
- SQUID 电感随外磁通的调谐
- 由工艺参数得到结参数与等离子体频率
- 波导-槽线渐变段的几何曲线
- 端口输入导纳与反射系数
- 黑箱量子化 (BBQ) 提取 C_p、L_p、参与比 p 与 Kerr 系数

内部统一使用角频率 (rad/s)，对外接口一律使用 Hz。
"""

import logging
import math
from dataclasses import dataclass, asdict, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from core.constants import C_LIGHT, HBAR, PHI0
from core.errors import (
    DivergentInductance, InsufficientSamples, NonPositiveSlope, NoRootInBracket,
    OutOfRange, StubResonance, ValidationError, require_positive,
)

logger = logging.getLogger(__name__)

# 半磁通量子附近 |cos(πφ)| 的截断
FLUX_CUTOFF = 1e-3
# |sin(βl)| 低于该值视为短截线谐振
STUB_TOLERANCE = 1e-9
# BBQ 差分模板: 在 f_res 两侧 ±0.5% 内取 5 个等距点
BBQ_SPAN = 0.005
ROOT_MAXITER = 200


@dataclass(frozen=True)
class ComplexTrace:
    """频率网格 + 复数响应 (反射系数或导纳)"""
    freqs: np.ndarray               # Hz，升序
    values: np.ndarray              # 复数样本
    kind: str = "reflection"        # reflection / admittance

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if freqs.ndim != 1 or freqs.shape != values.shape:
            raise ValidationError("频率与样本长度不一致",
                                  {"freqs": freqs.shape, "values": values.shape})
        if freqs.size > 1 and np.any(np.diff(freqs) <= 0):
            raise ValidationError("频率网格必须严格升序")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.freqs.size

    @property
    def span(self) -> float:
        return float(self.freqs[-1] - self.freqs[0]) if len(self) else 0.0

    @property
    def magnitude_db(self) -> np.ndarray:
        return 20 * np.log10(np.abs(self.values))

    @property
    def phase_deg(self) -> np.ndarray:
        return np.degrees(np.angle(self.values))

    def to_frame(self) -> pd.DataFrame:
        """导出为 freq_hz,re,im 表"""
        return pd.DataFrame({
            "freq_hz": self.freqs,
            "re": self.values.real,
            "im": self.values.imag,
        })


@dataclass(frozen=True)
class JunctionProcess:
    """约瑟夫森结工艺参数"""
    critical_current_density: float  # A/cm²
    specific_capacitance: float      # fF/µm²
    area: float                      # µm²

    def __post_init__(self):
        require_positive("critical_current_density", self.critical_current_density)
        require_positive("specific_capacitance", self.specific_capacitance)
        require_positive("area", self.area)


@dataclass(frozen=True)
class JunctionParams:
    """结参数 (SI 单位)"""
    I_c: float   # A
    L_J: float   # H
    C_J: float   # F

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ParasiticMode:
    """端口处的寄生低 Q 模式 (串联 RLC 并联到端口)"""
    f_hz: float            # 谐振频率
    linewidth_hz: float    # 线宽
    resistance: float = 5.0  # 串联电阻 Ω


@dataclass(frozen=True)
class DeviceCircuit:
    """WJPA 集总/分布参数"""
    L_J0: float                  # 零磁通 SQUID 电感 H
    C_J: float                   # 结电容 F
    C_S: float                   # 并联电容 F
    C_c: float                   # 等效耦合电容 F (可为 inf，表示直连)
    Z_slot: float                # 槽线特征阻抗 Ω
    stub_length: float           # 短截线长度 m
    eff_index: float = 1.0       # 槽线有效折射率
    port_impedance: Optional[float] = None  # 端口源阻抗 Ω，缺省取 Z_slot
    shunt_conductance: float = 0.0          # 内部损耗电导 S
    stub_enabled: bool = True
    parasitic: Optional[ParasiticMode] = None

    def __post_init__(self):
        for name in ("L_J0", "C_J", "C_S", "C_c", "Z_slot", "stub_length"):
            require_positive(name, getattr(self, name))
        if self.eff_index < 1:
            raise ValidationError(f"eff_index 必须 ≥ 1: {self.eff_index}")
        if self.port_impedance is not None:
            require_positive("port_impedance", self.port_impedance)
        if self.shunt_conductance < 0:
            raise ValidationError("shunt_conductance 不能为负")

    @property
    def z_port(self) -> float:
        return self.port_impedance if self.port_impedance is not None else self.Z_slot

    @property
    def C_total(self) -> float:
        return self.C_J + self.C_S

    def with_inductance(self, L_J: float) -> "DeviceCircuit":
        """返回替换了结电感的新电路"""
        return replace(self, L_J0=L_J)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["port_impedance"] = self.z_port
        return data

    @classmethod
    def from_config(cls, section: Dict[str, Any]) -> "DeviceCircuit":
        """从带单位后缀的配置段创建

        Args:
            section: 如 {'l_j0_pH': 120, 'c_j_fF': 220, 'stub_length_mm': 1.3, ...}
        """
        eff_index = float(section.get("eff_index", 1.0))
        if section.get("stub_length_mm") is not None:
            stub_length = float(section["stub_length_mm"]) * 1e-3
        elif section.get("stub_quarter_wave_hz") is not None:
            stub_length = quarter_wave_length(float(section["stub_quarter_wave_hz"]), eff_index)
        else:
            raise ValidationError("缺少 stub_length_mm 或 stub_quarter_wave_hz")

        parasitic = None
        par = section.get("parasitic") or {}
        if par.get("enabled"):
            parasitic = ParasiticMode(
                f_hz=float(par["f_hz"]),
                linewidth_hz=float(par["linewidth_hz"]),
                resistance=float(par.get("resistance_ohm", 5.0)),
            )

        port = section.get("port_impedance_ohm")
        return cls(
            L_J0=float(section["l_j0_pH"]) * 1e-12,
            C_J=float(section["c_j_fF"]) * 1e-15,
            C_S=float(section["c_s_fF"]) * 1e-15,
            C_c=float(section["c_c_fF"]) * 1e-15,
            Z_slot=float(section["z_slot_ohm"]),
            stub_length=stub_length,
            eff_index=eff_index,
            port_impedance=float(port) if port else None,
            shunt_conductance=float(section.get("shunt_conductance_s", 0.0)),
            stub_enabled=bool(section.get("stub_enabled", True)),
            parasitic=parasitic,
        )


@dataclass(frozen=True)
class TaperSpec:
    """波导到槽线的渐变段几何"""
    W_a: float   # 波导窄边尺寸 m
    S: float     # 槽宽 m
    A: float     # 渐变长度 m

    def __post_init__(self):
        require_positive("S", self.S)
        require_positive("A", self.A)
        if not self.W_a > self.S:
            raise ValidationError(f"需要 W_a > S: {self.W_a} <= {self.S}")

    @classmethod
    def wr42(cls, slot_gap: float = 200e-6, length: float = 4.5e-3) -> "TaperSpec":
        """WR42 波导 (窄边 4.32 mm)"""
        return cls(W_a=4.32e-3, S=slot_gap, A=length)


@dataclass(frozen=True)
class ModeParams:
    """提取出的模式参数 (频率与速率单位均为 Hz，K 为 rad/s)"""
    f_res: float
    kappa_ext: float
    kappa_int: float
    C_p: float
    L_p: float
    p: float
    K: float
    L_J: Optional[float] = None

    @property
    def kappa(self) -> float:
        return self.kappa_ext + self.kappa_int

    @property
    def q_loaded(self) -> float:
        return self.f_res / self.kappa if self.kappa > 0 else math.inf

    @property
    def q_times_p(self) -> float:
        """Q·p 诊断量 (经验上 ≈ 20 对应 > 20 dB 增益)"""
        return self.q_loaded * self.p

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.update(q_loaded=self.q_loaded, q_times_p=self.q_times_p)
        return data


# ---------------------------------------------------------------------------
# 结与 SQUID

def squid_inductance(L_J0: float, phi_ext: float, cutoff: float = FLUX_CUTOFF) -> float:
    """对称 SQUID 电感 L_J0/|cos(π·φ_ext)|

    Args:
        L_J0: 零磁通电感 H
        phi_ext: 外磁通 (以 Φ0 为单位)
        cutoff: |cos| 截断值

    Returns:
        电感 H
    """
    require_positive("L_J0", L_J0)
    c = abs(math.cos(math.pi * float(phi_ext)))
    if c <= cutoff:
        raise DivergentInductance(
            f"外磁通 φ={phi_ext} 接近半磁通量子，|cos(πφ)|={c:.2e}",
            {"phi_ext": float(phi_ext), "cos": c, "cutoff": cutoff},
        )
    return L_J0 / c


def junction_from_process(proc: JunctionProcess) -> JunctionParams:
    """由临界电流密度、比电容和面积计算结参数"""
    area_cm2 = proc.area * 1e-8
    I_c = proc.critical_current_density * area_cm2
    C_J = proc.specific_capacitance * proc.area * 1e-15
    L_J = PHI0 / (2 * math.pi * I_c)
    return JunctionParams(I_c=I_c, L_J=L_J, C_J=C_J)


def plasma_frequency(L_J: float, C_J: float) -> float:
    """结等离子体频率 1/(2π√(LC))，单位 Hz"""
    require_positive("L_J", L_J)
    require_positive("C_J", C_J)
    return 1.0 / (2 * math.pi * math.sqrt(L_J * C_J))


def josephson_energy(L_J: float) -> float:
    """E_J = (Φ0/2π)²/L_J，单位 J"""
    return (PHI0 / (2 * math.pi)) ** 2 / L_J


def quarter_wave_length(f_hz: float, eff_index: float = 1.0) -> float:
    """在 f 处为四分之一波长的线长 (m)"""
    require_positive("f_hz", f_hz)
    return C_LIGHT / (4 * f_hz * eff_index)


# ---------------------------------------------------------------------------
# 渐变段

def taper_profile(x, spec: TaperSpec):
    """渐变段半宽 y(x) = ((W_a−S)/2)(x/A)√(2−(x/A)²)

    Args:
        x: 沿渐变方向的位置 (m)，标量或数组，取值 [0, A]
        spec: 渐变段几何

    Returns:
        半宽 (m)，与 x 同形
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > spec.A):
        raise OutOfRange(f"x 超出 [0, {spec.A}]",
                         {"min": float(np.min(xa)), "max": float(np.max(xa)), "A": spec.A})
    u = xa / spec.A
    y = 0.5 * (spec.W_a - spec.S) * u * np.sqrt(2.0 - u * u)
    return float(y) if y.ndim == 0 else y


def taper_curve(spec: TaperSpec, points: int = 101) -> Tuple[np.ndarray, np.ndarray]:
    """整条渐变曲线 (x, y)"""
    x = np.linspace(0.0, spec.A, points)
    return x, taper_profile(x, spec)


# ---------------------------------------------------------------------------
# 导纳与反射

def _stub_admittance(circuit: DeviceCircuit, omega: np.ndarray, strict: bool) -> np.ndarray:
    """短路短截线导纳 −j·cot(βl)/Z_slot"""
    if not circuit.stub_enabled:
        return np.zeros_like(omega, dtype=complex)
    beta_l = omega * circuit.eff_index / C_LIGHT * circuit.stub_length
    s = np.sin(beta_l)
    singular = np.abs(s) < STUB_TOLERANCE
    if strict and np.any(singular):
        f_bad = float(omega[singular][0] / (2 * math.pi))
        raise StubResonance(f"短截线谐振: f={f_bad:.6e} Hz", {"freq_hz": f_bad})
    with np.errstate(divide="ignore", invalid="ignore"):
        y = -1j * np.cos(beta_l) / (s * circuit.Z_slot)
    return np.where(singular, np.nan + 1j * np.nan, y)


def _parasitic_admittance(circuit: DeviceCircuit, omega: np.ndarray) -> np.ndarray:
    par = circuit.parasitic
    if par is None:
        return np.zeros_like(omega, dtype=complex)
    w0 = 2 * math.pi * par.f_hz
    L = (par.resistance + circuit.z_port) / (2 * math.pi * par.linewidth_hz)
    C = 1.0 / (w0 * w0 * L)
    z = par.resistance + 1j * omega * L + 1.0 / (1j * omega * C)
    return 1.0 / z


def _tank_admittance(circuit: DeviceCircuit, omega: np.ndarray) -> np.ndarray:
    return (1j * omega * circuit.C_total + 1.0 / (1j * omega * circuit.L_J0)
            + circuit.shunt_conductance)


def _series_cap_impedance(circuit: DeviceCircuit, omega: np.ndarray) -> np.ndarray:
    if math.isinf(circuit.C_c):
        return np.zeros_like(omega, dtype=complex)
    return 1.0 / (1j * omega * circuit.C_c)


def _port_admittance(circuit: DeviceCircuit, omega: np.ndarray, strict: bool) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        y_branch = 1.0 / (_series_cap_impedance(circuit, omega)
                          + 1.0 / _tank_admittance(circuit, omega))
    return (y_branch + _stub_admittance(circuit, omega, strict)
            + _parasitic_admittance(circuit, omega))


def _as_omega(f) -> Tuple[np.ndarray, bool]:
    fa = np.asarray(f, dtype=float)
    if np.any(fa <= 0):
        raise ValidationError("频率必须为正")
    return 2 * math.pi * np.atleast_1d(fa), fa.ndim == 0


def input_admittance(circuit: DeviceCircuit, f):
    """耦合参考面上的总输入导纳 Y_branch + Y_stub

    Args:
        circuit: 器件电路
        f: 频率 Hz (标量或数组)

    Returns:
        复导纳 S
    """
    omega, scalar = _as_omega(f)
    y = _port_admittance(circuit, omega, strict=True)
    return complex(y[0]) if scalar else y


def junction_admittance(circuit: DeviceCircuit, f):
    """从结端口看进去的导纳 (外部端口负载经 C_c 串联接入)

    这是 BBQ 视角: Im(Y)=0 给出带载模式频率，Re(Y)/C_p 给出外部耗散率。
    """
    omega, scalar = _as_omega(f)
    with np.errstate(divide="ignore", invalid="ignore"):
        y_load = (1.0 / circuit.z_port + _stub_admittance(circuit, omega, strict=False)
                  + _parasitic_admittance(circuit, omega))
        z_load = np.where(np.isfinite(y_load), 1.0 / y_load, 0.0)
        y_ext = 1.0 / (_series_cap_impedance(circuit, omega) + z_load)
    y = _tank_admittance(circuit, omega) + y_ext
    return complex(y[0]) if scalar else y


def _external_admittance(circuit: DeviceCircuit, f: float) -> complex:
    omega = np.array([2 * math.pi * f])
    return complex(junction_admittance(circuit, f) - _tank_admittance(circuit, omega)[0])


def reflection_from_circuit(circuit: DeviceCircuit, grid: Sequence[float]) -> ComplexTrace:
    """端口反射系数 Γ = (1/Z − Y)/(1/Z + Y)"""
    freqs = np.asarray(grid, dtype=float)
    if freqs.size > 1 and np.any(np.diff(freqs) <= 0):
        raise ValidationError("频率网格必须升序")
    y = input_admittance(circuit, freqs)
    y0 = 1.0 / circuit.z_port
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = (y0 - y) / (y0 + y)
    gamma = np.where(np.isfinite(y), gamma, -1.0 + 0j)
    return ComplexTrace(freqs=freqs, values=gamma, kind="reflection")


# ---------------------------------------------------------------------------
# 谐振与 BBQ

def _upward_root(imag_of: Callable[[np.ndarray], np.ndarray], bracket: Tuple[float, float],
                 samples: int = 2001) -> float:
    """在区间内寻找 Im(Y) 由负到正的第一个零点 (跳过极点)

    Args:
        imag_of: ω 数组 → Im(Y) 数组 (奇点处返回 nan)
        bracket: (f_lo, f_hi) Hz

    Returns:
        零点频率 Hz
    """
    f_lo, f_hi = float(bracket[0]), float(bracket[1])
    if not 0 < f_lo < f_hi:
        raise ValidationError(f"无效的频率区间: {bracket}")
    w = np.linspace(2 * math.pi * f_lo, 2 * math.pi * f_hi, samples)
    b = imag_of(w)

    for i in range(samples - 1):
        b0, b1 = b[i], b[i + 1]
        if not (np.isfinite(b0) and np.isfinite(b1)):
            continue
        if b0 == 0.0 and (i == 0 or b[i - 1] < 0):
            return float(w[i] / (2 * math.pi))
        if b0 < 0.0 < b1:
            scalar = lambda x: float(imag_of(np.array([x]))[0])
            root = brentq(scalar, w[i], w[i + 1], xtol=1e-6, rtol=1e-13,
                          maxiter=ROOT_MAXITER)
            return float(root / (2 * math.pi))

    raise NoRootInBracket(f"区间 [{f_lo:.6e}, {f_hi:.6e}] Hz 内 Im(Y) 没有上升过零点",
                          {"bracket_hz": [f_lo, f_hi]})


def find_resonance(circuit: DeviceCircuit, bracket: Tuple[float, float]) -> float:
    """端口导纳 Im(Y)=0 的根 (Hz)，相对精度 1e-10 以内"""
    return _upward_root(lambda w: _port_admittance(circuit, w, strict=False).imag, bracket)


def _stencil_freqs(f_res: float, span: float) -> np.ndarray:
    return f_res * (1.0 + span * np.array([-1.0, -0.5, 0.0, 0.5, 1.0]))


def bbq_extract(Y_samples: ComplexTrace, f_res: float, L_J: float,
                span: float = BBQ_SPAN) -> Tuple[float, float, float]:
    """由导纳斜率提取模式电容、电感和参与比

    C_p = ½·∂Im(Y)/∂ω (并联 RLC 的斜率为 2C)，L_p = 1/(ω²C_p)，p = L_p/L_J。

    Args:
        Y_samples: 导纳样本，需覆盖 f_res·(1 ± span)
        f_res: 谐振频率 Hz
        L_J: 结电感 H
        span: 模板半宽 (相对 f_res)

    Returns:
        (C_p, L_p, p)
    """
    require_positive("f_res", f_res)
    require_positive("L_J", L_J)
    freqs = Y_samples.freqs
    lo, hi = f_res * (1.0 - span), f_res * (1.0 + span)
    inside = (freqs >= lo) & (freqs <= hi)
    if freqs.size < 5 or freqs[0] > lo or freqs[-1] < hi or np.count_nonzero(inside) < 5:
        raise InsufficientSamples(
            f"导纳样本未能以 ≥5 点覆盖 f_res·(1±{span})",
            {"points_inside": int(np.count_nonzero(inside)), "f_res_hz": f_res},
        )

    window = (freqs >= f_res * (1.0 - 4 * span)) & (freqs <= f_res * (1.0 + 4 * span))
    spline = CubicSpline(freqs[window], Y_samples.values[window].imag)
    y = spline(_stencil_freqs(f_res, span))

    h_omega = 2 * math.pi * f_res * span * 0.5
    slope = (y[0] - 8 * y[1] + 8 * y[3] - y[4]) / (12 * h_omega)
    if not slope > 0:
        raise NonPositiveSlope(f"∂Im(Y)/∂ω = {slope:.3e} ≤ 0，可能选错了谐振分支",
                               {"slope": float(slope), "f_res_hz": f_res})

    omega = 2 * math.pi * f_res
    C_p = 0.5 * slope
    L_p = 1.0 / (omega * omega * C_p)
    return C_p, L_p, L_p / L_J


def _check_participation(p: float) -> float:
    if not 0 < p <= 1 + 1e-9:
        raise ValidationError(f"参与比需在 (0, 1] 内: {p}", {"p": p})
    return min(p, 1.0)


def kerr_from_participation(p: float, f_res: float, L_J: float) -> float:
    """自 Kerr 系数 K = −p²ħω0²/(8E_J)，单位 rad/s (每光子)"""
    p = _check_participation(p)
    require_positive("f_res", f_res)
    omega = 2 * math.pi * f_res
    return -p * p * HBAR * omega * omega / (8 * josephson_energy(L_J))


def kerr_from_hamiltonian(p: float, f_res: float, L_J: float, levels: int = 30) -> float:
    """截断谐振子 + 四次项 −E_J·φ⁴/24 数值对角化得到的非谐性 (rad/s)

    φ_zpf² = p·ħω0/(2E_J)，返回 (E2−E1)−(E1−E0)。
    """
    p = _check_participation(p)
    omega = 2 * math.pi * f_res
    E_J = josephson_energy(L_J)
    phi_zpf2 = p * HBAR * omega / (2 * E_J)

    a = np.diag(np.sqrt(np.arange(1, levels, dtype=float)), k=1)
    x = a + a.T
    quartic = np.linalg.matrix_power(x, 4)
    # 以 ħω0 为能量单位
    coeff = E_J * phi_zpf2 ** 2 / (24 * HBAR * omega)
    H = np.diag(np.arange(levels, dtype=float)) - coeff * quartic
    E = np.linalg.eigvalsh(H)
    return float((E[2] - 2 * E[1] + E[0]) * omega)


def default_mode_bracket(circuit: DeviceCircuit) -> Tuple[float, float]:
    """结端口模式的默认搜索区间 [0.5, 1.2]·f_tank"""
    f_tank = plasma_frequency(circuit.L_J0, circuit.C_total)
    return 0.5 * f_tank, 1.2 * f_tank


def analyze_mode(circuit: DeviceCircuit,
                 bracket: Optional[Tuple[float, float]] = None) -> ModeParams:
    """结端口 BBQ 分析: 带载模式频率、C_p/L_p/p、κ_ext/κ_int 与 K"""
    bracket = bracket or default_mode_bracket(circuit)
    f_res = _upward_root(lambda w: junction_admittance(circuit, w / (2 * math.pi)).imag,
                         bracket)

    grid = f_res * (1.0 + np.linspace(-2 * BBQ_SPAN, 2 * BBQ_SPAN, 9))
    trace = ComplexTrace(grid, junction_admittance(circuit, grid), kind="admittance")
    C_p, L_p, p = bbq_extract(trace, f_res, circuit.L_J0)
    if p > 1:
        logger.warning(f"[WARNING] 参与比 p={p:.6f} > 1，按 1 处理")

    y_ext = _external_admittance(circuit, f_res)
    kappa_ext = y_ext.real / C_p / (2 * math.pi)
    kappa_int = circuit.shunt_conductance / C_p / (2 * math.pi)
    K = kerr_from_participation(min(p, 1.0), f_res, circuit.L_J0)
    return ModeParams(f_res=f_res, kappa_ext=kappa_ext, kappa_int=kappa_int,
                      C_p=C_p, L_p=L_p, p=p, K=K, L_J=circuit.L_J0)


def lj_sweep(circuit: DeviceCircuit, l_j_values: Sequence[float]) -> List[ModeParams]:
    """结电感扫描: 每个 L_J 下的带载模式参数"""
    modes = []
    for L_J in l_j_values:
        modes.append(analyze_mode(circuit.with_inductance(float(L_J))))
    return modes
