#!/usr/bin/env python3
"""
量子比特功率计标定验证脚本

测试:
1. 腔场振幅与 Stark 位移
2. Ramsey 相位拟合
3. Stark 功率标定往返 (合成条纹序列)
4. 频谱 ↔ 光子数换算
5. 噪声温度与测量效率
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import math

import numpy as np
import pytest

from core.constants import HBAR, dbm_to_watts, watts_to_dbm
from core.errors import LowContrast, NonlinearStark, ValidationError
from core.qubitcal import (
    DispersiveDevice, RamseyFringe, Spectrum, cavity_amplitudes, efficiency, noise_report,
    noise_temperature, quanta_to_spectrum, ramsey_phase, spectrum_to_quanta,
    stark_coefficient, stark_power_calibration, stark_shift, system_gain,
)
from core.synth import XorShift64Star, simulate_ramsey_series

TWO_PI = 2 * math.pi
DEV = DispersiveDevice.from_hz(21.765e9, 22e9, -1e6, 20e6, 5e-6)
G_SYS_DB = 96.8
R_BW = 4700.0
OMEGA_D = TWO_PI * 22e9


def test_cavity_amplitudes():
    print("\n[1] 测试腔场振幅...")
    eps = TWO_PI * 50e6
    alpha_g, alpha_e = cavity_amplitudes(DEV, eps)
    assert abs(alpha_g) ** 2 == pytest.approx(2500.0 / (10.0 ** 2 + 235.0 ** 2), rel=1e-9)
    assert abs(alpha_g) ** 2 == pytest.approx(0.0451, abs=1e-4)
    assert abs(alpha_e) != pytest.approx(abs(alpha_g), rel=1e-6)

    assert cavity_amplitudes(DEV, 0.0) == (0j, 0j)
    no_chi = DispersiveDevice.from_hz(21.765e9, 22e9, 0.0, 20e6, 5e-6)
    g, e = cavity_amplitudes(no_chi, eps)
    assert g == e
    print(f"  ✓ |α_g|²={abs(alpha_g) ** 2:.6f}")


def test_stark_shift():
    print("\n[2] 测试 Stark 位移...")
    eps = TWO_PI * 50e6
    shift_hz = stark_shift(DEV, eps) / TWO_PI
    assert shift_hz == pytest.approx(-45.38e3, rel=1e-3)
    assert stark_shift(DEV, 0.0) == 0.0
    assert stark_shift(DEV, 2 * eps) == pytest.approx(4 * stark_shift(DEV, eps), rel=1e-12)

    # 四个数量级内 Δω/|ε|² 恒定
    coeff = stark_coefficient(DEV)
    for e in np.logspace(5, 9, 9):
        assert stark_shift(DEV, e) / e ** 2 == pytest.approx(coeff, rel=1e-12)

    no_chi = DispersiveDevice.from_hz(21.765e9, 22e9, 0.0, 20e6, 5e-6)
    assert stark_shift(no_chi, eps) == 0.0
    assert DEV.is_far_detuned()
    assert not DispersiveDevice.from_hz(22.005e9, 22e9, -1e6, 20e6, 5e-6).is_far_detuned()
    print(f"  ✓ Δω/2π={shift_hz / 1e3:.2f} kHz")


def test_ramsey_phase():
    print("\n[3] 测试 Ramsey 相位拟合...")
    theta = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
    rng = XorShift64Star(3)
    fringe = RamseyFringe(theta=theta, signal=np.cos(theta + 0.7) + 0.01 * rng.normal(theta.size))
    fit = ramsey_phase(fringe)
    assert fit.dphi == pytest.approx(0.7, abs=1e-3)
    assert fit.contrast == pytest.approx(1.0, abs=1e-2)

    # 200 个随机相位，SNR 100
    phases = (rng.uniform(200) - 0.5) * 2 * math.pi * 0.999
    for phi in phases:
        signal = 0.5 * np.cos(theta + phi) + 0.2 + 0.005 * rng.normal(theta.size)
        got = ramsey_phase(RamseyFringe(theta=theta, signal=signal)).dphi
        assert abs(math.remainder(got - phi, TWO_PI)) < 1e-3

    with pytest.raises(LowContrast):
        ramsey_phase(RamseyFringe(theta=theta, signal=np.full(theta.size, 0.3)))
    with pytest.raises(ValidationError):
        RamseyFringe(theta=theta[:5], signal=np.cos(theta[:5]))
    print("  ✓ 1 mrad 内恢复相位")


def test_stark_calibration_round_trip():
    """-80 dB 衰减，SNR 100"""
    print("\n[4] 测试 Stark 功率标定往返...")
    attenuation = 1e-8
    powers = dbm_to_watts(np.arange(-40.0, -29.0, 2.0))
    fringes = simulate_ramsey_series(DEV, powers, attenuation, snr=100.0, seed=2)
    series = []
    for p, fringe in zip(powers, fringes):
        dphi = ramsey_phase(fringe).dphi
        expected = DEV.tau * stark_shift(DEV, math.sqrt(
            DEV.kappa * attenuation * p / (HBAR * DEV.omega_d)))
        assert abs(dphi - expected) < 1e-3
        series.append((float(p), dphi))

    cal = stark_power_calibration(DEV, series)
    assert not cal.flagged
    assert cal.P_ratio == pytest.approx(attenuation, rel=0.02)
    assert math.isnan(cal.g_sys_db)
    # 斜率符号与 χ 的 Re 因子一致
    assert math.copysign(1.0, cal.dphase_dP) == math.copysign(1.0, stark_coefficient(DEV))

    # 参考输出: 分析仪处 P_out = G_sys·P_cavity
    p_ref = float(powers[0])
    p_out = 10 ** (G_SYS_DB / 10) * attenuation * p_ref
    with_ref = stark_power_calibration(DEV, series, output_reference=(p_ref, p_out))
    assert with_ref.g_sys_db == pytest.approx(G_SYS_DB, abs=0.1)
    print(f"  ✓ P_ratio={cal.P_ratio:.4e}，G_sys={with_ref.g_sys_db:.2f} dB")


def test_stark_calibration_errors():
    print("\n[5] 测试 Stark 标定错误路径...")
    with pytest.raises(ValidationError):
        stark_power_calibration(DEV, [(1e-7, 0.1), (2e-7, 0.2)])

    zero = stark_power_calibration(DEV, [(1e-7, 0.0), (2e-7, 0.0), (3e-7, 0.0)])
    assert zero.flagged
    assert zero.reason == "zero_slope"
    assert math.isnan(zero.P_ratio)

    powers = [1e-7, 2e-7, 3e-7, 4e-7, 5e-7]
    with pytest.raises(NonlinearStark):
        stark_power_calibration(DEV, list(zip(powers, [-0.01, -0.01, -0.01, -0.01, -1.0])))
    print("  ✓ 点数不足、零斜率、非线性")


def test_system_gain():
    print("\n[6] 测试系统增益...")
    assert system_gain(1e-9, 1e-9) == pytest.approx(0.0)
    assert system_gain(10 ** 9.68, 1.0) == pytest.approx(96.8)
    assert system_gain(10 ** 7.55, 1.0) == pytest.approx(75.5)
    with pytest.raises(ValidationError):
        system_gain(0.0, 1.0)
    print("  ✓ 96.8 dB / 75.5 dB")


def test_spectrum_quanta():
    print("\n[7] 测试频谱光子数换算...")
    one = quanta_to_spectrum([0.0], [1.0], G_SYS_DB, OMEGA_D, R_BW)
    assert one.power_dbm[0] == pytest.approx(-64.84, abs=0.01)
    floor = quanta_to_spectrum([0.0], [2.3], G_SYS_DB, OMEGA_D, R_BW)
    assert floor.power_dbm[0] == pytest.approx(-61.22, abs=0.01)

    back = spectrum_to_quanta([(0.0, float(dbm_to_watts(-61.22)))], G_SYS_DB, OMEGA_D, R_BW)
    assert back[0] == pytest.approx(2.3, abs=0.05)

    offsets = np.linspace(-5e5, 5e5, 11)
    quanta = np.linspace(0.0, 10.0, 11)
    spectrum = quanta_to_spectrum(offsets, quanta, G_SYS_DB, OMEGA_D, R_BW)
    np.testing.assert_allclose(spectrum_to_quanta(spectrum, G_SYS_DB, OMEGA_D, R_BW),
                               quanta, rtol=1e-12, atol=0.0)
    assert spectrum_to_quanta(spectrum, G_SYS_DB, OMEGA_D, 2 * R_BW)[5] == pytest.approx(quanta[5] / 2)

    assert watts_to_dbm(spectrum.power_w[1]) == pytest.approx(spectrum.power_dbm[1])
    frame = spectrum.to_frame()
    assert list(frame.columns) == ["offset_hz", "p_dbm"]
    with pytest.raises(ValidationError):
        Spectrum(offsets=[0.0, 1.0], power_w=[1.0])
    with pytest.raises(ValidationError):
        spectrum_to_quanta(spectrum, G_SYS_DB, OMEGA_D, 0.0)
    print("  ✓ 1 光子 = −64.84 dBm，2.3 光子 = −61.22 dBm")


def test_efficiency():
    print("\n[8] 测试噪声温度与效率...")
    assert noise_temperature(2.3, 22e9) == pytest.approx(2.43, abs=0.005)
    assert noise_temperature(10.3, 22e9) == pytest.approx(10.87, abs=0.01)
    assert efficiency(2.4, 22e9) == pytest.approx(0.440, abs=0.002)
    assert efficiency(10.9, 22e9) == pytest.approx(0.097, abs=0.002)
    assert efficiency(noise_temperature(1.0, 22e9), 22e9) == pytest.approx(1.0)

    for n in (0.3, 1.0, 2.3, 10.3, 57.0):
        assert efficiency(noise_temperature(n, 22e9), 22e9) == pytest.approx(1.0 / n, rel=1e-12)

    # N_sys < 1 不截断
    assert efficiency(noise_temperature(0.5, 22e9), 22e9) == pytest.approx(2.0)

    report = noise_report(2.3, 22e9)
    assert set(report) == {"n_sys", "t_sys_k", "eta"}
    assert report["eta"] == pytest.approx(1 / 2.3)
    with pytest.raises(ValidationError):
        efficiency(0.0, 22e9)
    print(f"  ✓ T_sys={report['t_sys_k']:.3f} K，η={report['eta'] * 100:.1f}%")


def main():
    """运行所有测试"""
    print("=" * 60)
    print("WJPA 量子比特功率计标定验证")
    print("=" * 60)

    tests = [
        ("腔场振幅", test_cavity_amplitudes),
        ("Stark 位移", test_stark_shift),
        ("Ramsey 相位", test_ramsey_phase),
        ("Stark 标定往返", test_stark_calibration_round_trip),
        ("Stark 错误路径", test_stark_calibration_errors),
        ("系统增益", test_system_gain),
        ("频谱光子数", test_spectrum_quanta),
        ("噪声温度与效率", test_efficiency),
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
