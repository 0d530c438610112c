#!/usr/bin/env python3
"""
参量放大器验证脚本

测试:
1. 线性反射模型与复数拟合 (合成 VNA 迹线、无噪声随机复原、共轭约定、发散路径)
2. 磁通映射 (调谐范围)
3. 泵浦稳态三次方程: 双稳分支、残差、K→0 退化
4. 小信号增益: G_s − G_i = 1、K→0 退化、增益带宽积
5. 饱和: P_1dB 随增益单调、等增益与固定泵浦频率下的 P_1dB-泵浦功率斜率
6. 磁通可调谐性
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import math

import numpy as np
import pytest

from core.circuit import ComplexTrace, DeviceCircuit, kerr_from_participation
from core.constants import HBAR, db_to_linear, watts_to_dbm
from core.errors import (
    FitDiverged, InsufficientPoints, InsufficientSpan, UnstableOperatingPoint, ValidationError,
)
from core.paramp import (
    BackgroundModel, Branch, LinearMode, PumpOperatingPoint, compressed_gain,
    compression_series, design_operating_point, fit_reflection, fixed_pump_series, flux_map,
    gain_bandwidth_product, gain_profile, linear_s11, max_growth_rate,
    operating_point_for_gain, p1db, p1db_slope, pump_steady_state, small_signal_gain,
    steady_state_root_count, tune_over_flux,
)
from core.synth import simulate_vna_trace
from utils.config import Config

TWO_PI = 2 * math.pi

# 参与比 0.2167、20.58 GHz、120 pH 的模式
MODE = LinearMode(f_res=20.58e9, kappa_ext=200e6)
K = kerr_from_participation(0.2167, 20.58e9, 120e-12)


def profile_at(target_db: float, points: int = 4001):
    op = design_operating_point(MODE, K, db_to_linear(target_db))
    half = 5 * MODE.kappa / math.sqrt(db_to_linear(target_db))
    grid = np.linspace(op.f_pump - half, op.f_pump + half, points)
    return op, gain_profile(MODE, K, op, grid)


def test_linear_reflection():
    print("\n[1] 测试线性反射模型...")
    lossless = LinearMode(22e9, 200e6)
    f = np.linspace(21e9, 23e9, 101)
    assert np.allclose(np.abs(linear_s11(lossless, f)), 1.0, atol=1e-12)

    lossy = LinearMode(22e9, 200e6, 50e6)
    assert linear_s11(lossy, 22e9) == pytest.approx((200e6 - 50e6) / (250e6))
    critical = LinearMode(22e9, 100e6, 100e6)
    assert abs(linear_s11(critical, 22e9)) < 1e-12
    print("  ✓ 无损 |Γ|=1，共振处 Γ=(κe−κi)/κ")


def test_fit_reflection_round_trip():
    print("\n[2] 测试反射拟合...")
    truth = LinearMode(22e9, 200e6, 10e6)
    background = BackgroundModel(amp0=0.8, amp_slope=1e-11, phase0=0.3,
                                 phase_slope=1e-9, f_center=22e9)
    grid = np.linspace(22e9 - 6 * truth.kappa, 22e9 + 6 * truth.kappa, 801)
    trace = simulate_vna_trace(truth, background, 100.0, grid, seed=7)

    fit = fit_reflection(trace)
    assert fit.mode.f_res == pytest.approx(truth.f_res, abs=1e6)
    assert fit.mode.kappa_ext == pytest.approx(truth.kappa_ext, rel=0.02)
    assert abs(fit.mode.kappa_int - truth.kappa_int) < 3e6
    assert fit.background.amp0 == pytest.approx(0.8, rel=0.02)
    print(f"  ✓ κ_ext={fit.mode.kappa_ext / 1e6:.2f} MHz, κ_int={fit.mode.kappa_int / 1e6:.2f} MHz")


def test_fit_reflection_noiseless_random():
    """无噪声迹线上拟合精确复原模式参数"""
    print("\n[3] 测试无噪声随机拟合...")
    rng = np.random.default_rng(21)
    for _ in range(50):
        f_res = rng.uniform(20e9, 24e9)
        kappa_ext = rng.uniform(50e6, 300e6)
        truth = LinearMode(f_res, kappa_ext, kappa_ext * rng.uniform(0.02, 0.5))
        background = BackgroundModel(amp0=rng.uniform(0.5, 1.2), phase0=rng.uniform(-math.pi, math.pi),
                                     phase_slope=rng.uniform(-2e-10, 2e-10), f_center=f_res)
        grid = np.linspace(f_res - 6 * truth.kappa, f_res + 6 * truth.kappa, 801)
        fit = fit_reflection(simulate_vna_trace(truth, background, None, grid))
        assert fit.mode.f_res == pytest.approx(truth.f_res, rel=1e-3)
        assert fit.mode.kappa_ext == pytest.approx(truth.kappa_ext, rel=1e-3)
        assert fit.mode.kappa_int == pytest.approx(truth.kappa_int, rel=1e-3)
        assert not fit.conjugated
    print("  ✓ 50 个随机模式，相对误差 < 0.1%")

    # e^{jωt} 约定的迹线: 拟合在共轭数据上进行，evaluate 按输入约定返回
    trace = simulate_vna_trace(truth, background, None, grid)
    flipped = ComplexTrace(freqs=trace.freqs, values=np.conj(trace.values), kind="reflection")
    fit = fit_reflection(flipped)
    assert fit.conjugated
    assert fit.mode.kappa_ext == pytest.approx(truth.kappa_ext, rel=1e-3)
    np.testing.assert_allclose(fit.evaluate(flipped.freqs), flipped.values, atol=1e-6)
    print("  ✓ 共轭迹线标记 conjugated，模型与输入一致")


def test_fit_reflection_errors():
    print("\n[4] 测试拟合错误路径...")
    truth = LinearMode(22e9, 200e6)
    bg = BackgroundModel(amp0=1.0, f_center=22e9)
    few = simulate_vna_trace(truth, bg, None, np.linspace(21e9, 23e9, 20))
    with pytest.raises(InsufficientSpan):
        fit_reflection(few)

    narrow = simulate_vna_trace(truth, bg, None, np.linspace(22e9 - 200e6, 22e9 + 200e6, 201))
    with pytest.raises(InsufficientSpan):
        fit_reflection(narrow, guess=truth)
    print("  ✓ 点数不足 / 跨度不足")

    flat_freqs = np.linspace(21e9, 23e9, 201)
    flat = ComplexTrace(freqs=flat_freqs, values=np.full(201, 0.8 * np.exp(0.3j)), kind="reflection")
    with pytest.raises(FitDiverged):
        fit_reflection(flat)
    ramp = ComplexTrace(freqs=flat_freqs, values=0.8 * np.exp(1j * 2.0 * (flat_freqs - 22e9) / 2e9),
                        kind="reflection")
    with pytest.raises(FitDiverged):
        fit_reflection(ramp)
    print("  ✓ 平坦迹线 / 纯线性相位 → fit_diverged")


def test_flux_map():
    print("\n[5] 测试磁通映射...")
    dev = DeviceCircuit.from_config(Config().get_device_config())
    result = flux_map(dev, [0.0, 0.1, 0.2, 0.3], points=801)
    assert not result.errors
    f_res = [mode.f_res for _, mode in result]
    assert all(b < a for a, b in zip(f_res, f_res[1:]))
    assert all(p.residual < 1e-3 for p in result.points)
    assert f_res[0] - f_res[-1] >= 2e9

    partial = flux_map(dev, [0.0, 0.5])
    assert len(partial.points) == 1
    assert partial.errors[0]["error"] == "divergent_inductance"
    print(f"  ✓ f_res={[round(f / 1e9, 3) for f in f_res]} GHz")


def test_pump_steady_state_bistability():
    print("\n[6] 测试泵浦稳态...")
    kappa = MODE.kappa_rad
    # 与 K 异号一侧、|Δ| > √3·κ/2 才出现双稳
    delta_p = -math.copysign(1.0, K) * 2.0 * kappa
    f_pump = MODE.f_res + delta_p / TWO_PI
    powers = np.logspace(-16, -8, 400)
    counts = [steady_state_root_count(MODE, K, delta_p, p) for p in powers]
    assert max(counts) == 3
    assert counts[0] == 1 and counts[-1] == 1

    p_bi = powers[counts.index(3)]
    low = pump_steady_state(MODE, K, f_pump, p_bi, Branch.LOW)
    high = pump_steady_state(MODE, K, f_pump, p_bi, Branch.HIGH)
    assert low.n_p < high.n_p
    assert low.branch is Branch.LOW and high.branch is Branch.HIGH

    same_side = math.copysign(1.0, K) * 2.0 * kappa
    assert all(steady_state_root_count(MODE, K, same_side, p) == 1 for p in powers[::20])

    with pytest.raises(ValidationError):
        pump_steady_state(MODE, K, f_pump, -1.0)
    print(f"  ✓ 双稳区 n_low={low.n_p:.2f}, n_high={high.n_p:.2f}")


def test_pump_steady_state_residual():
    """两个分支的根都满足三次方程，K=0 退化为线性响应"""
    print("\n[7] 测试泵浦稳态残差...")
    half = 0.5 * MODE.kappa_rad
    powers = np.logspace(-16, -8, 40)
    for scale in (-4.0, -2.0, -0.5, 0.5, 2.0, 4.0):
        f_pump = MODE.f_res + scale * MODE.kappa_rad / TWO_PI
        for p in powers:
            for branch in (Branch.LOW, Branch.HIGH):
                op = pump_steady_state(MODE, K, f_pump, p, branch)
                drive = MODE.kappa_ext_rad * p / (HBAR * TWO_PI * f_pump)
                lhs = op.n_p * (half ** 2 + (op.delta_p + K * op.n_p) ** 2)
                assert abs(lhs - drive) <= 1e-9 * drive
    print("  ✓ 6 个失谐 × 40 个功率 × 2 个分支，相对残差 ≤ 1e-9")

    f_pump = MODE.f_res + 0.7 * MODE.kappa_rad / TWO_PI
    delta_p = TWO_PI * (f_pump - MODE.f_res)
    for p in (1e-14, 1e-12, 1e-10):
        linear = MODE.kappa_ext_rad * p / (HBAR * TWO_PI * f_pump) / (half ** 2 + delta_p ** 2)
        assert pump_steady_state(MODE, 0.0, f_pump, p).n_p == pytest.approx(linear, rel=1e-12)
        assert pump_steady_state(MODE, K * 1e-9, f_pump, p).n_p == pytest.approx(linear, rel=1e-6)
    print("  ✓ K→0 时 n_p = 驱动/((κ/2)² + Δ²)")


def test_gain_invariant_signal_minus_idler():
    """无损稳定工作点 G_s − G_i = 1"""
    print("\n[8] 测试 G_s − G_i = 1...")
    rng = np.random.default_rng(3)
    half = 0.5 * MODE.kappa_rad
    for _ in range(100):
        n_p = rng.uniform(0.0, 0.95) * half / abs(K)
        dressed = rng.uniform(-2.0, 2.0) * half
        op = PumpOperatingPoint(f_pump=MODE.f_res, P_pump=0.0, n_p=n_p,
                                delta_p=dressed - 2 * K * n_p)
        assert max_growth_rate(MODE, K, n_p, dressed) < 0
        delta = rng.uniform(-3.0, 3.0) * half
        g_s, g_i = small_signal_gain(MODE, K, op, delta)
        assert abs(g_s - g_i - 1.0) < 1e-9
    print("  ✓ 100 个随机工作点")


def test_gain_linear_limit():
    """K→0 时增益退化为 |linear_s11|²"""
    print("\n[9] 测试 K→0 退化...")
    mode = LinearMode(22e9, 200e6, 20e6)
    op = pump_steady_state(mode, -1e-3, 22e9, 1e-15)
    f = np.linspace(21.5e9, 22.5e9, 201)
    g_s, _ = small_signal_gain(mode, -1e-3, op, TWO_PI * (f - op.f_pump))
    assert np.max(np.abs(g_s - np.abs(linear_s11(mode, f)) ** 2)) < 1e-10
    print("  ✓ 与线性反射一致")


def test_design_operating_point_and_gbw():
    print("\n[10] 测试工作点设计与增益带宽积...")
    products = []
    for target_db in (15.0, 20.0, 25.0):
        op, result = profile_at(target_db)
        assert result.peak_gain == pytest.approx(db_to_linear(target_db), rel=1e-6)
        assert result.f_peak == pytest.approx(op.f_pump, abs=1.0)
        products.append(gain_bandwidth_product(result))
    assert max(products) / min(products) < 1.15
    assert 0.8 < products[1] / MODE.kappa < 1.1
    print(f"  ✓ B·√G/κ = {[round(p / MODE.kappa, 3) for p in products]}")

    with pytest.raises(ValidationError):
        design_operating_point(MODE, 0.0, 100.0)


def test_operating_point_for_gain():
    print("\n[11] 测试等增益工作点...")
    target = db_to_linear(20.0)
    n_min = design_operating_point(MODE, K, target).n_p
    n_max = 0.5 * MODE.kappa_rad / abs(K)
    for n in np.linspace(n_min * 1.01, n_max * 0.99, 5):
        op = operating_point_for_gain(MODE, K, n, target)
        g_s, _ = small_signal_gain(MODE, K, op, 0.0)
        assert g_s == pytest.approx(target, rel=1e-6)
    with pytest.raises(UnstableOperatingPoint):
        operating_point_for_gain(MODE, K, n_max * 1.01, target)
    print("  ✓ δ=0 增益保持 20 dB")


def test_compression():
    print("\n[12] 测试饱和与 P_1dB...")
    op, _ = profile_at(20.0)
    small = small_signal_gain(MODE, K, op, 1e-3 * MODE.kappa_rad)[0]
    assert compressed_gain(MODE, K, op, 1e-3 * MODE.kappa_rad, 1e-22) == pytest.approx(small, rel=1e-4)

    levels = []
    for target_db in (15.0, 20.0, 25.0):
        op, _ = profile_at(target_db, points=101)
        levels.append(float(watts_to_dbm(p1db(MODE, K, op))))
    assert levels[0] > levels[1] > levels[2]
    assert -150 < levels[1] < -100
    print(f"  ✓ P_1dB={[round(p, 2) for p in levels]} dBm")


def test_p1db_slope():
    print("\n[13] 测试 P_1dB-泵浦功率斜率...")
    series = compression_series(MODE, K, db_to_linear(20.0), span_db=3.0, points=7)
    assert len(series) >= 4
    pumps = [s[0] for s in series]
    assert all(b > a for a, b in zip(pumps, pumps[1:]))
    slope = p1db_slope(series)
    assert slope < 0
    assert 0.4 <= abs(slope) <= 0.9
    print(f"  ✓ 斜率 {slope:.3f}")

    with pytest.raises(InsufficientPoints):
        p1db_slope(series[:3])


def test_fixed_pump_series():
    """固定泵浦频率只扫功率: 增益随泵浦升高，P_1dB 下降"""
    print("\n[14] 测试固定泵浦频率压缩序列...")
    series = fixed_pump_series(MODE, K, db_to_linear(20.0), gain_span_db=6.0, points=7)
    assert len(series) == 7
    pumps = [s[0] for s in series]
    levels = [s[1] for s in series]
    gains = [s[2] for s in series]
    assert all(b > a for a, b in zip(pumps, pumps[1:]))
    assert all(b > a for a, b in zip(gains, gains[1:]))
    assert gains[0] == pytest.approx(14.0, abs=0.01)
    assert gains[-1] == pytest.approx(20.0, abs=0.01)
    assert all(b < a for a, b in zip(levels, levels[1:]))
    slope = p1db_slope(series)
    assert slope < 0
    print(f"  ✓ 增益 {gains[0]:.2f}→{gains[-1]:.2f} dB，斜率 {slope:.3f}")

    with pytest.raises(ValidationError):
        fixed_pump_series(MODE, K, db_to_linear(20.0), gain_span_db=0.0)
    with pytest.raises(ValidationError):
        fixed_pump_series(MODE, K, db_to_linear(20.0), points=1)


def test_tunability():
    print("\n[15] 测试磁通可调谐性...")
    dev = DeviceCircuit.from_config(Config().get_device_config())
    profiles = tune_over_flux(dev, [0.0, 0.1, 0.2], db_to_linear(20.0), points=401)
    peaks = [r.f_peak for _, r in profiles]
    assert all(b < a for a, b in zip(peaks, peaks[1:]))
    for _, r in profiles:
        assert r.peak_gain_db == pytest.approx(20.0, abs=0.1)
    print(f"  ✓ 增益中心 {[round(p / 1e9, 3) for p in peaks]} GHz")


def main():
    """运行所有测试"""
    print("=" * 60)
    print("WJPA 参量放大器验证")
    print("=" * 60)

    tests = [
        ("线性反射", test_linear_reflection),
        ("反射拟合", test_fit_reflection_round_trip),
        ("无噪声随机拟合", test_fit_reflection_noiseless_random),
        ("拟合错误路径", test_fit_reflection_errors),
        ("磁通映射", test_flux_map),
        ("泵浦稳态", test_pump_steady_state_bistability),
        ("稳态残差", test_pump_steady_state_residual),
        ("G_s − G_i = 1", test_gain_invariant_signal_minus_idler),
        ("K→0 退化", test_gain_linear_limit),
        ("增益带宽积", test_design_operating_point_and_gbw),
        ("等增益工作点", test_operating_point_for_gain),
        ("饱和", test_compression),
        ("压缩斜率", test_p1db_slope),
        ("固定泵浦频率序列", test_fixed_pump_series),
        ("可调谐性", test_tunability),
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
