#!/usr/bin/env python3
"""
电路模型验证脚本

测试:
1. 结工艺换算与等离子体频率
2. SQUID 磁通调谐与发散截断
3. 渐变段几何
4. BBQ 提取 (合成并联 RLC)
5. 并联 LC 谐振根与 BBQ 往返
6. Kerr 公式与截断哈密顿量对角化
7. 器件电路: 谐振、无损反射、L_J 扫描、拟合 Q
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import math

import numpy as np
import pytest

from core.circuit import (
    ComplexTrace, DeviceCircuit, JunctionProcess, TaperSpec, analyze_mode, bbq_extract,
    find_resonance, input_admittance, junction_from_process, kerr_from_hamiltonian,
    kerr_from_participation, lj_sweep, plasma_frequency, quarter_wave_length,
    reflection_from_circuit, squid_inductance, taper_curve, taper_profile,
)
from core.errors import (
    DivergentInductance, InsufficientSamples, NoRootInBracket, NonPositiveSlope, OutOfRange, StubResonance,
    ValidationError,
)
from core.paramp import LinearMode, fit_reflection
from utils.config import Config


def target_device() -> DeviceCircuit:
    return DeviceCircuit.from_config(Config().get_device_config())


def rlc_admittance(L: float, C: float, f: np.ndarray) -> np.ndarray:
    w = 2 * math.pi * f
    return 1j * w * C + 1.0 / (1j * w * L)


def rlc_device(L: float, C: float) -> DeviceCircuit:
    """直连、无短截线的并联 LC"""
    return DeviceCircuit(L_J0=L, C_J=0.5 * C, C_S=0.5 * C, C_c=math.inf, Z_slot=50.0,
                         stub_length=1e-3, stub_enabled=False)


def test_junction_process():
    """70 A/cm², 55 fF/µm², 4 µm² → L_J ≈ 117.5 pH, C_J = 220 fF"""
    print("\n[1] 测试结工艺换算...")
    junction = junction_from_process(JunctionProcess(70.0, 55.0, 4.0))
    assert junction.L_J == pytest.approx(117.5e-12, rel=5e-3)
    assert junction.C_J == pytest.approx(220e-15, rel=1e-12)
    assert junction.I_c == pytest.approx(2.8e-6, rel=1e-12)
    assert abs(junction.L_J - 120e-12) / 120e-12 < 0.05
    print(f"  ✓ L_J={junction.L_J * 1e12:.2f} pH")

    with pytest.raises(ValidationError):
        JunctionProcess(70.0, 55.0, 0.0)


def test_plasma_frequency():
    print("\n[2] 测试等离子体频率...")
    f_p = plasma_frequency(120e-12, 220e-15)
    assert f_p == pytest.approx(30.98e9, rel=1e-3)
    assert abs(f_p - 31.3e9) / 31.3e9 < 0.02
    print(f"  ✓ f_p={f_p / 1e9:.2f} GHz")


def test_squid_inductance():
    print("\n[3] 测试 SQUID 调谐...")
    L0 = 120e-12
    assert squid_inductance(L0, 0.0) == pytest.approx(L0)
    assert squid_inductance(L0, 0.25) == pytest.approx(L0 * math.sqrt(2))
    # 周期性与对称性
    assert squid_inductance(L0, 1.1) == pytest.approx(squid_inductance(L0, 0.1))
    assert squid_inductance(L0, -0.2) == pytest.approx(squid_inductance(L0, 0.2))
    values = [squid_inductance(L0, phi) for phi in np.linspace(0, 0.45, 10)]
    assert all(b > a for a, b in zip(values, values[1:]))

    with pytest.raises(DivergentInductance):
        squid_inductance(L0, 0.5)
    with pytest.raises(ValidationError):
        squid_inductance(-1.0, 0.0)
    print("  ✓ L_J0/|cos(πφ)|")


def test_taper_profile():
    print("\n[4] 测试渐变段几何...")
    spec = TaperSpec.wr42()
    assert taper_profile(0.0, spec) == 0.0
    assert taper_profile(spec.A, spec) == pytest.approx(0.5 * (spec.W_a - spec.S))
    x, y = taper_curve(spec, 51)
    assert x.shape == y.shape == (51,)
    assert np.all(np.diff(y) > 0)
    assert taper_profile(spec.A / math.sqrt(2), spec) == pytest.approx(1.784e-3, abs=5e-7)

    # 一阶导数连续，且在 (0, A) 内为正
    half_width = 0.5 * (spec.W_a - spec.S)
    x, y = taper_curve(spec, 2001)
    dy = np.gradient(y, x)
    assert np.all(dy[1:-1] > 0)
    u = x / spec.A
    exact = half_width / spec.A * 2 * (1 - u * u) / np.sqrt(2 - u * u)
    np.testing.assert_allclose(dy[1:-1], exact[1:-1], rtol=0, atol=1e-4 * half_width / spec.A)

    # 端点斜率: y'(0) = √2·(W_a−S)/(2A)，y'(A) = 0
    h = spec.A * 1e-6
    slope_0 = (taper_profile(h, spec) - taper_profile(0.0, spec)) / h
    slope_a = (taper_profile(spec.A, spec) - taper_profile(spec.A - h, spec)) / h
    assert slope_0 == pytest.approx(math.sqrt(2) * half_width / spec.A, rel=1e-3)
    assert abs(slope_a) < 1e-5 * half_width / spec.A

    with pytest.raises(OutOfRange):
        taper_profile(spec.A * 1.01, spec)
    with pytest.raises(ValidationError):
        TaperSpec(W_a=1e-4, S=2e-4, A=1e-3)
    print("  ✓ y(0)=0, y(A)=(W_a−S)/2, 导数连续")


def test_bbq_synthetic_rlc():
    """L = 26 pH, C = 2.3 pF 的并联谐振: C_p、L_p 在 1% 内，p ≈ 0.217"""
    print("\n[5] 测试 BBQ 提取...")
    L, C = 26e-12, 2.3e-12
    f0 = 1.0 / (2 * math.pi * math.sqrt(L * C))
    f = f0 * (1.0 + np.linspace(-0.03, 0.03, 301))
    trace = ComplexTrace(f, rlc_admittance(L, C, f), kind="admittance")

    C_p, L_p, p = bbq_extract(trace, f0, 120e-12)
    assert C_p == pytest.approx(C, rel=1e-2)
    assert L_p == pytest.approx(L, rel=1e-2)
    assert p == pytest.approx(0.217, abs=5e-3)
    print(f"  ✓ C_p={C_p * 1e12:.4f} pF, L_p={L_p * 1e12:.3f} pH, p={p:.4f}")

    narrow = ComplexTrace(f[140:161], rlc_admittance(L, C, f[140:161]), kind="admittance")
    with pytest.raises(InsufficientSamples):
        bbq_extract(narrow, f0, 120e-12)

    flipped = ComplexTrace(f, -rlc_admittance(L, C, f), kind="admittance")
    with pytest.raises(NonPositiveSlope):
        bbq_extract(flipped, f0, 120e-12)


def test_parallel_rlc_resonance():
    """随机并联 LC: f = 1/(2π√LC)，BBQ 往返 ω²·L_p·C_p = 1"""
    print("\n[6] 测试并联 LC 谐振与 BBQ 往返...")
    f0 = 1.0 / (2 * math.pi * math.sqrt(26e-12 * 2.3e-12))
    assert find_resonance(rlc_device(26e-12, 2.3e-12), (0.8 * f0, 1.2 * f0)) == pytest.approx(20.58e9, rel=1e-3)

    rng = np.random.default_rng(11)
    for L, C in zip(rng.uniform(10e-12, 200e-12, 100), rng.uniform(0.2e-12, 5e-12, 100)):
        f0 = 1.0 / (2 * math.pi * math.sqrt(L * C))
        assert find_resonance(rlc_device(L, C), (0.7 * f0, 1.3 * f0)) == pytest.approx(f0, rel=1e-9)

    for L, C in zip(rng.uniform(10e-12, 200e-12, 20), rng.uniform(0.2e-12, 5e-12, 20)):
        f0 = 1.0 / (2 * math.pi * math.sqrt(L * C))
        f = f0 * (1.0 + np.linspace(-0.03, 0.03, 301))
        C_p, L_p, p = bbq_extract(ComplexTrace(f, rlc_admittance(L, C, f), kind="admittance"), f0, L)
        assert (2 * math.pi * f0) ** 2 * L_p * C_p == pytest.approx(1.0, abs=1e-6)
        assert C_p == pytest.approx(C, rel=1e-3)
        # L = L_J 时全参与
        assert p == pytest.approx(1.0, rel=1e-3)

    dev = rlc_device(26e-12, 2.3e-12)
    f0 = 1.0 / (2 * math.pi * math.sqrt(26e-12 * 2.3e-12))
    with pytest.raises(NoRootInBracket):
        find_resonance(dev, (1.2 * f0, 1.5 * f0))
    with pytest.raises(NoRootInBracket):
        find_resonance(dev, (0.5 * f0, 0.8 * f0))
    print("  ✓ 100 组随机 LC 相对误差 < 1e-9")


def test_kerr_formula_vs_hamiltonian():
    print("\n[7] 测试 Kerr 公式...")
    K = kerr_from_participation(0.2167, 20.58e9, 120e-12)
    assert K / (2 * math.pi) == pytest.approx(-1.825e6, rel=1e-2)

    for p in (0.05, 0.1, 0.15, 0.2, 0.25):
        analytic = kerr_from_participation(p, 22e9, 120e-12)
        numeric = kerr_from_hamiltonian(p, 22e9, 120e-12, levels=30)
        assert numeric < 0
        assert abs(numeric - analytic) / abs(analytic) < 0.05
    print(f"  ✓ K/2π={K / (2 * math.pi) / 1e6:.3f} MHz")

    with pytest.raises(ValidationError):
        kerr_from_participation(0.0, 22e9, 120e-12)


def test_quarter_wave_stub():
    print("\n[8] 测试四分之一波长短截线...")
    assert quarter_wave_length(21e9, 2.74535) == pytest.approx(1.3e-3, rel=1e-5)

    dev = target_device()
    # βl = π 处短截线导纳发散
    f_bad = 299792458.0 / (2 * dev.eff_index * dev.stub_length)
    with pytest.raises(StubResonance):
        input_admittance(dev, f_bad)
    print("  ✓ 短截线谐振被检出")


def test_device_resonance_and_q():
    """目标元件: f_res ∈ [20, 23] GHz，拟合带载 Q ∈ [60, 160]"""
    print("\n[9] 测试器件谐振与 Q...")
    dev = target_device()
    mode = analyze_mode(dev)
    assert 20e9 <= mode.f_res <= 23e9
    assert 0 < mode.p <= 1.0 + 1e-6
    assert mode.K < 0
    assert mode.kappa_int == 0.0

    f_port = find_resonance(dev, (0.99 * mode.f_res, 1.1 * mode.f_res))
    assert 20e9 <= f_port <= 23e9

    half = max(6 * mode.kappa, 50e6)
    trace = reflection_from_circuit(dev, np.linspace(mode.f_res - half, mode.f_res + half, 801))
    # 无损电路 |Γ| = 1
    assert np.allclose(np.abs(trace.values), 1.0, atol=1e-9)

    fit = fit_reflection(trace, guess=LinearMode.from_mode_params(mode))
    q_fit = fit.mode.f_res / fit.mode.kappa
    assert 60 <= q_fit <= 160
    assert fit.mode.f_res == pytest.approx(mode.f_res, rel=2e-3)
    print(f"  ✓ f_res={mode.f_res / 1e9:.3f} GHz, Q_bbq={mode.q_loaded:.1f}, Q_fit={q_fit:.1f}")


def test_lossy_reflection():
    print("\n[10] 测试内部损耗...")
    dev = DeviceCircuit.from_config({**Config().get_device_config(), "shunt_conductance_s": 2e-4})
    mode = analyze_mode(dev)
    assert mode.kappa_int > 0
    grid = np.linspace(mode.f_res - 5 * mode.kappa, mode.f_res + 5 * mode.kappa, 401)
    trace = reflection_from_circuit(dev, grid)
    assert np.all(np.abs(trace.values) <= 1.0 + 1e-12)
    assert np.min(np.abs(trace.values)) < 0.99
    print(f"  ✓ κ_int={mode.kappa_int / 1e6:.2f} MHz")


def test_lj_sweep():
    """f_res 随 L_J 增大而降低，Q 变化平缓"""
    print("\n[11] 测试 L_J 扫描...")
    modes = lj_sweep(target_device(), [100e-12, 120e-12, 140e-12])
    f_res = [m.f_res for m in modes]
    q = [m.q_loaded for m in modes]
    assert f_res[0] > f_res[1] > f_res[2]
    assert max(q) / min(q) < 2.0
    print(f"  ✓ f_res={[round(f / 1e9, 3) for f in f_res]} GHz")


def test_device_validation():
    print("\n[12] 测试参数校验...")
    section = Config().get_device_config()
    with pytest.raises(ValidationError):
        DeviceCircuit.from_config({**section, "c_s_fF": -1.0})
    with pytest.raises(ValidationError):
        DeviceCircuit.from_config({k: v for k, v in section.items() if k != "stub_length_mm"})
    quarter = DeviceCircuit.from_config({**section, "stub_length_mm": None,
                                         "stub_quarter_wave_hz": 21e9})
    assert quarter.stub_length == pytest.approx(1.3e-3, rel=1e-5)
    print("  ✓ 非法参数被拒绝")


def main():
    """运行所有测试"""
    print("=" * 60)
    print("WJPA 电路模型验证")
    print("=" * 60)

    tests = [
        ("结工艺换算", test_junction_process),
        ("等离子体频率", test_plasma_frequency),
        ("SQUID 调谐", test_squid_inductance),
        ("渐变段几何", test_taper_profile),
        ("BBQ 提取", test_bbq_synthetic_rlc),
        ("并联 LC 谐振", test_parallel_rlc_resonance),
        ("Kerr 公式", test_kerr_formula_vs_hamiltonian),
        ("短截线", test_quarter_wave_stub),
        ("器件谐振与 Q", test_device_resonance_and_q),
        ("内部损耗", test_lossy_reflection),
        ("L_J 扫描", test_lj_sweep),
        ("参数校验", test_device_validation),
    ]

    results = []
    for name, test_func in tests:
        try:
            test_func()
            results.append((name, True))
        except Exception as e:
            print(f"\n  ✗ 测试异常: {type(e).__name__}: {e}")
            results.append((name, False))

    # 汇总结果
    print("\n" + "=" * 60)
    print("测试结果汇总")
    print("=" * 60)

    passed_count = sum(1 for _, passed in results if passed)
    for name, passed in results:
        status = "✓ PASS" if passed else "✗ FAIL"
        print(f"  {status}: {name}")

    print()
    print(f"通过: {passed_count}/{len(results)}")
    if passed_count == len(results):
        print("\n🎉 所有测试通过!")
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
