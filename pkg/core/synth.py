"""
合成数据模块

负责生成带已知真值的测量数据，作为各提取流程的独立验证:
- 可移植的 xorshift64* 随机数 (64 路并行，splitmix64 播种)
- VNA 反射迹线
- 可变温度源 (VTS) 噪声扫描，含 WJPA 增益压缩与辐射计涨落
- Ramsey 条纹序列
- 输出频谱 (泵浦/探测/闲频音 + 平坦噪声底)

固定种子时所有输出逐字节可复现。
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.circuit import ComplexTrace
from core.constants import H
from core.errors import ValidationError, require_positive
from core.noisecal import ChainStage, VTSSweepDataset, friis_chain, johnson_quanta
from core.paramp import BackgroundModel, LinearMode, linear_s11
from core.qubitcal import (
    DispersiveDevice, RamseyFringe, Spectrum, drive_from_power, quanta_to_spectrum, stark_shift,
)

logger = logging.getLogger(__name__)

LANES = 64
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_STAR = np.uint64(0x2545F4914F6CDD1D)


def splitmix64(seed: int, count: int) -> np.ndarray:
    """splitmix64 序列，用于初始化各路状态"""
    base = np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    steps = np.arange(1, count + 1, dtype=np.uint64)
    z = base + steps * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class XorShift64Star:
    """64 路并行 xorshift64* 生成器

    每次推进输出 64 个 uint64，按 (步, 路) 顺序展开成一维流。
    """

    def __init__(self, seed: int):
        state = splitmix64(int(seed), LANES)
        state[state == 0] = np.uint64(1)
        self._state = state

    def next_uint64(self, n: int) -> np.ndarray:
        steps = -(-n // LANES)
        out = np.empty((steps, LANES), dtype=np.uint64)
        x = self._state
        with np.errstate(over="ignore"):
            for k in range(steps):
                x = x ^ (x >> np.uint64(12))
                x = x ^ (x << np.uint64(25))
                x = x ^ (x >> np.uint64(27))
                out[k] = x * _STAR
        self._state = x
        return out.ravel()[:n]

    def uniform(self, n: int) -> np.ndarray:
        """[0, 1) 上的均匀分布 (53 位精度)"""
        return (self.next_uint64(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)

    def normal(self, n: int) -> np.ndarray:
        """Box-Muller 标准正态"""
        pairs = -(-n // 2)
        u = self.uniform(2 * pairs)
        u1 = 1.0 - u[0::2]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2 * np.pi * u2)
        z[1::2] = r * np.sin(2 * np.pi * u2)
        return z[:n]


@dataclass(frozen=True)
class CompressionLaw:
    """饱和增益: G(N_in) = 1 + (g0−1)/(1 + (N_in − floor)/n_sat)

    floor 默认取真空半光子，使压缩只作用于热激发。
    """
    g0: float
    n_sat: float = math.inf
    floor: float = 0.5

    def __post_init__(self):
        if self.g0 < 1:
            raise ValidationError(f"g0 必须 ≥ 1: {self.g0}")
        require_positive("n_sat", self.n_sat)

    def gain(self, n_in):
        n = np.maximum(np.asarray(n_in, dtype=float) - self.floor, 0.0)
        g = 1.0 + (self.g0 - 1.0) / (1.0 + n / self.n_sat)
        return float(g) if g.ndim == 0 else g

    @classmethod
    def from_endpoints(cls, g_lo: float, n_lo: float, g_hi: float, n_hi: float,
                       floor: float = 0.5) -> "CompressionLaw":
        """由两个 (增益, 输入光子数) 端点确定 g0 与 n_sat"""
        a, b = n_lo - floor, n_hi - floor
        r = (g_lo - 1.0) / (g_hi - 1.0)
        if not r > 1 or not b > a:
            raise ValidationError("端点必须满足增益随输入噪声下降")
        n_sat = (b - r * a) / (r - 1.0)
        require_positive("n_sat", n_sat)
        g0 = 1.0 + (g_lo - 1.0) * (1.0 + a / n_sat)
        return cls(g0=g0, n_sat=n_sat, floor=floor)

    def to_dict(self) -> Dict[str, Any]:
        return {"g0": self.g0, "n_sat": self.n_sat, "floor": self.floor}


@dataclass
class ChainScenario:
    """噪声测量链的合成场景 (stages 为 WJPA 之后的各级)"""
    stages: List[ChainStage]
    vts_temps: List[float]
    seed: int = 1
    radiometer_samples: Optional[float] = 1e6
    rbw_hz: float = 1e6
    pump_freq_hz: float = 22e9
    gain_bandwidth_hz: float = 20e6     # WJPA 增益洛伦兹线型 FWHM
    wjpa_enabled: bool = True

    def __post_init__(self):
        if not self.stages:
            raise ValidationError("场景至少需要一级放大")
        temps = np.asarray(self.vts_temps, dtype=float)
        if temps.size < 1 or np.any(np.diff(temps) <= 0) or np.any(temps < 0):
            raise ValidationError("vts_temps 必须非负且严格递增")
        require_positive("rbw_hz", self.rbw_hz)
        require_positive("gain_bandwidth_hz", self.gain_bandwidth_hz)
        if self.radiometer_samples is not None:
            require_positive("radiometer_samples", self.radiometer_samples)

    @property
    def rest(self) -> Tuple[float, float]:
        """后级 (G_rest, N_rest)"""
        return friis_chain(self.stages)

    @classmethod
    def hemt_dominated(cls, seed: int = 1, radiometer_samples: Optional[float] = 1e6) -> "ChainScenario":
        """HEMT 主导的后级，VTS 从 0.1 K 到 1.75 K"""
        return cls(
            stages=[
                ChainStage("hemt", 10 ** 4.0, 20.0),
                ChainStage("room_temp", 10 ** 3.0, 100.0),
            ],
            vts_temps=[0.1, 0.4, 0.7, 1.0, 1.3, 1.75],
            seed=seed,
            radiometer_samples=radiometer_samples,
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ChainScenario":
        return cls(
            stages=[ChainStage.from_dict(s) for s in data["stages"]],
            vts_temps=[float(t) for t in data["vts_temps"]],
            seed=int(data.get("seed", 1)),
            radiometer_samples=data.get("radiometer_samples", 1e6),
            rbw_hz=float(data.get("rbw_hz", 1e6)),
            pump_freq_hz=float(data.get("pump_freq_hz", 22e9)),
            gain_bandwidth_hz=float(data.get("gain_bandwidth_hz", 20e6)),
            wjpa_enabled=bool(data.get("wjpa_enabled", True)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stages": [s.to_dict() for s in self.stages],
            "vts_temps": list(self.vts_temps),
            "seed": self.seed,
            "radiometer_samples": self.radiometer_samples,
            "rbw_hz": self.rbw_hz,
            "pump_freq_hz": self.pump_freq_hz,
            "gain_bandwidth_hz": self.gain_bandwidth_hz,
            "wjpa_enabled": self.wjpa_enabled,
        }


def reference_compression(f: float = 22e9) -> CompressionLaw:
    """21.6 dB (0.1 K) → 12.9 dB (1.75 K) 的压缩律"""
    return CompressionLaw.from_endpoints(
        g_lo=10 ** 2.16, n_lo=johnson_quanta(0.1, f),
        g_hi=10 ** 1.29, n_hi=johnson_quanta(1.75, f),
    )


# ---------------------------------------------------------------------------
# 生成器

def simulate_vna_trace(mode: LinearMode, background: BackgroundModel,
                       noise_snr: Optional[float], grid: Sequence[float],
                       seed: int = 1) -> ComplexTrace:
    """linear_s11 × 背景 + 复高斯白噪声 (复噪声标准差 = amp0/snr)"""
    freqs = np.asarray(grid, dtype=float)
    values = linear_s11(mode, freqs) * background.evaluate(freqs)
    if noise_snr is not None and math.isfinite(noise_snr):
        require_positive("noise_snr", noise_snr)
        rng = XorShift64Star(seed)
        z = rng.normal(2 * freqs.size)
        sigma = background.amp0 / noise_snr / math.sqrt(2.0)
        values = values + sigma * (z[0::2] + 1j * z[1::2])
    return ComplexTrace(freqs=freqs, values=values, kind="reflection")


def wjpa_gain(law: CompressionLaw, n_in, f, center: float, fwhm: float):
    """压缩后的峰值增益按洛伦兹线型分布到各频点"""
    lorentz = 1.0 / (1.0 + ((np.asarray(f, dtype=float) - center) / (0.5 * fwhm)) ** 2)
    return 1.0 + (law.gain(n_in) - 1.0) * lorentz


def simulate_vts_sweep(scenario: ChainScenario, n_add_ex: float, compression: CompressionLaw,
                       freqs: Sequence[float]) -> VTSSweepDataset:
    """按输出噪声模型正向生成 VTS 扫描

    WJPA 开启时 N_out = 2G_rest·(G_W·(N_in + N_add,ex/2) + N_rest/2)；
    关闭时 N_out = G_rest·(N_in + N_rest)，增益记为 1。
    功率 P = N_out·hf·rbw，辐射计涨落为相对标准差 1/√M 的乘性高斯噪声。
    """
    freqs = np.asarray(freqs, dtype=float)
    temps = np.asarray(scenario.vts_temps, dtype=float)
    g_rest, n_rest = scenario.rest

    n_in = johnson_quanta(temps[:, None], freqs[None, :])
    if scenario.wjpa_enabled:
        gain = wjpa_gain(compression, n_in, freqs[None, :], scenario.pump_freq_hz,
                         scenario.gain_bandwidth_hz)
        n_out = 2 * g_rest * (gain * (n_in + 0.5 * n_add_ex) + 0.5 * n_rest)
    else:
        gain = np.ones_like(n_in)
        n_out = g_rest * (n_in + n_rest)

    power = n_out * H * freqs[None, :] * scenario.rbw_hz
    if scenario.radiometer_samples is not None:
        rng = XorShift64Star(scenario.seed)
        noise = rng.normal(power.size).reshape(power.shape)
        power = power * (1.0 + noise / math.sqrt(scenario.radiometer_samples))

    return VTSSweepDataset(
        freqs=freqs, temps=temps, noise_spectra=power, gain_traces=gain,
        pump_freq_hz=scenario.pump_freq_hz, rbw_hz=scenario.rbw_hz, n_rest=n_rest,
    )


def simulate_ramsey_series(dev: DispersiveDevice, powers: Sequence[float], attenuation: float,
                           snr: Optional[float], seed: int = 1, points: int = 4096,
                           amplitude: float = 1.0, offset: float = 0.0) -> List[RamseyFringe]:
    """各室温驱动功率下的 Ramsey 条纹

    腔端功率 = attenuation·P_RT，Δφ = τ·Δω；snr 为条纹幅度与逐点噪声标准差之比。
    """
    require_positive("attenuation", attenuation)
    rng = XorShift64Star(seed)
    theta = np.linspace(0.0, 2 * np.pi, points, endpoint=False)
    fringes = []
    for p_rt in powers:
        eps = drive_from_power(dev, attenuation * float(p_rt))
        dphi = dev.tau * stark_shift(dev, eps)
        signal = amplitude * np.cos(theta + dphi) + offset
        if snr is not None and math.isfinite(snr):
            signal = signal + (amplitude / snr) * rng.normal(points)
        fringes.append(RamseyFringe(theta=theta, signal=signal))
    return fringes


def simulate_output_spectrum(tones: Sequence[Tuple[float, float]], noise_floor_quanta: float,
                             g_sys_db: float, omega_d: float, r_bw: float, span: float,
                             seed: int = 1, points: int = 1001,
                             radiometer_samples: Optional[float] = None) -> Spectrum:
    """平坦噪声底上叠加若干音 (偏移 Hz, 光子数)，换算为分析仪功率

    tones 落在最近的频点上。
    """
    require_positive("span", span)
    if noise_floor_quanta < 0:
        raise ValidationError("噪声底不能为负")
    offsets = np.linspace(-0.5 * span, 0.5 * span, points)
    quanta = np.full(points, float(noise_floor_quanta))
    if radiometer_samples is not None:
        rng = XorShift64Star(seed)
        quanta = quanta * (1.0 + rng.normal(points) / math.sqrt(radiometer_samples))
    for offset, n in tones:
        idx = int(np.argmin(np.abs(offsets - float(offset))))
        quanta[idx] += float(n)
    return quanta_to_spectrum(offsets, quanta, g_sys_db, omega_d, r_bw)
