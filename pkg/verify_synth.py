#!/usr/bin/env python3
"""
合成数据生成器验证脚本

测试:
1. xorshift64* 随机数的确定性
2. 增益压缩律 (端点 21.6 dB / 12.9 dB)
3. VTS 扫描正向模型与辐射计涨落
4. VNA 迹线、Ramsey 条纹与输出频谱
5. 场景序列化与校验
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import math

import numpy as np
import pytest

from core.constants import H
from core.errors import ValidationError
from core.noisecal import ChainStage, johnson_quanta
from core.paramp import BackgroundModel, LinearMode, linear_s11
from core.qubitcal import DispersiveDevice, spectrum_to_quanta
from core.synth import (
    ChainScenario, CompressionLaw, XorShift64Star, reference_compression, simulate_output_spectrum,
    simulate_ramsey_series, simulate_vna_trace, simulate_vts_sweep, splitmix64,
)

FREQS = np.linspace(22e9 - 20e6, 22e9 + 20e6, 201)


def test_rng_determinism():
    print("\n[1] 测试随机数确定性...")
    assert int(splitmix64(0, 1)[0]) == 0xE220A8397B1DCDAF

    a = XorShift64Star(42).uniform(1000)
    b = XorShift64Star(42).uniform(1000)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, XorShift64Star(43).uniform(1000))
    assert np.all((a >= 0.0) & (a < 1.0))

    z = XorShift64Star(7).normal(100_000)
    assert abs(np.mean(z)) < 0.02
    assert np.std(z) == pytest.approx(1.0, abs=0.02)
    print("  ✓ 固定种子逐位一致")


def test_compression_law():
    print("\n[2] 测试增益压缩律...")
    law = reference_compression()
    n_lo, n_hi = johnson_quanta(0.1, 22e9), johnson_quanta(1.75, 22e9)
    assert 10 * math.log10(law.gain(n_lo)) == pytest.approx(21.6, abs=1e-9)
    assert 10 * math.log10(law.gain(n_hi)) == pytest.approx(12.9, abs=1e-9)
    assert law.n_sat == pytest.approx(0.17858, rel=1e-3)
    assert law.g0 == pytest.approx(144.56, rel=1e-3)
    assert law.gain(0.5) == pytest.approx(law.g0)

    flat = CompressionLaw(g0=100.0)
    assert flat.gain(5.0) == 100.0
    np.testing.assert_array_equal(flat.gain(np.array([0.5, 1.0])), [100.0, 100.0])

    with pytest.raises(ValidationError):
        CompressionLaw(g0=0.5)
    with pytest.raises(ValidationError):
        CompressionLaw.from_endpoints(g_lo=10.0, n_lo=0.6, g_hi=100.0, n_hi=1.7)
    assert set(law.to_dict()) == {"g0", "n_sat", "floor"}
    print(f"  ✓ g0={law.g0:.2f}，n_sat={law.n_sat:.5f}")


def test_vts_forward_model():
    print("\n[3] 测试 VTS 正向模型...")
    scenario = ChainScenario.hemt_dominated(radiometer_samples=None)
    g_rest, n_rest = scenario.rest
    dataset = simulate_vts_sweep(scenario, 1.5, CompressionLaw(g0=100.0), FREQS)

    center = int(np.argmin(np.abs(FREQS - 22e9)))
    np.testing.assert_allclose(dataset.gain_traces[:, center], 100.0, rtol=1e-12)
    # 洛伦兹半高处增益减半 (扣除 1)
    half = int(np.argmin(np.abs(FREQS - (22e9 + 10e6))))
    np.testing.assert_allclose(dataset.gain_traces[:, half], 50.5, rtol=1e-9)

    n_in = johnson_quanta(dataset.temps, 22e9)
    expected = 2 * g_rest * (100.0 * (n_in + 0.75) + 0.5 * n_rest) * H * 22e9 * scenario.rbw_hz
    np.testing.assert_allclose(dataset.noise_spectra[:, center], expected, rtol=1e-12)

    assert dataset.pump_freq_hz == 22e9
    assert dataset.rbw_hz == scenario.rbw_hz
    assert dataset.n_rest == pytest.approx(n_rest)
    np.testing.assert_array_equal(dataset.temps, scenario.vts_temps)

    scenario.wjpa_enabled = False
    off = simulate_vts_sweep(scenario, 1.5, CompressionLaw(g0=100.0), FREQS)
    assert np.all(off.gain_traces == 1.0)
    np.testing.assert_allclose(off.noise_spectra[:, center],
                               g_rest * (n_in + n_rest) * H * 22e9 * scenario.rbw_hz, rtol=1e-12)
    print("  ✓ N_out = 2G_rest(G_W(N_in + N_ex/2) + N_rest/2)")


def test_radiometer_noise():
    """相对涨落 1/√M"""
    print("\n[4] 测试辐射计涨落...")
    law = reference_compression()
    clean = simulate_vts_sweep(ChainScenario.hemt_dominated(radiometer_samples=None), 1.5, law, FREQS)
    for samples in (1e4, 1e6):
        noisy = simulate_vts_sweep(ChainScenario.hemt_dominated(seed=9, radiometer_samples=samples),
                                   1.5, law, FREQS)
        rel = noisy.noise_spectra / clean.noise_spectra - 1.0
        assert np.std(rel) * math.sqrt(samples) == pytest.approx(1.0, rel=0.1)

    again = simulate_vts_sweep(ChainScenario.hemt_dominated(seed=9), 1.5, law, FREQS)
    repeat = simulate_vts_sweep(ChainScenario.hemt_dominated(seed=9), 1.5, law, FREQS)
    np.testing.assert_array_equal(again.noise_spectra, repeat.noise_spectra)
    print("  ✓ 标准差 ∝ 1/√M，同种子可复现")


def test_vna_trace():
    print("\n[5] 测试 VNA 迹线...")
    mode = LinearMode(22e9, 200e6, 10e6)
    background = BackgroundModel(amp0=0.8, phase0=0.3, f_center=22e9)
    grid = np.linspace(21e9, 23e9, 401)

    clean = simulate_vna_trace(mode, background, None, grid)
    np.testing.assert_allclose(clean.values, linear_s11(mode, grid) * background.evaluate(grid),
                               rtol=1e-12)
    assert clean.kind == "reflection"

    a = simulate_vna_trace(mode, background, 100.0, grid, seed=4)
    b = simulate_vna_trace(mode, background, 100.0, grid, seed=4)
    np.testing.assert_array_equal(a.values, b.values)
    residual = a.values - clean.values
    assert np.std(residual) == pytest.approx(0.8 / 100.0, rel=0.15)
    print("  ✓ 无噪声精确，噪声幅度 amp0/snr")


def test_ramsey_series():
    print("\n[6] 测试 Ramsey 条纹序列...")
    dev = DispersiveDevice.from_hz(21.765e9, 22e9, -1e6, 20e6, 5e-6)
    powers = [1e-7, 1e-6]
    clean = simulate_ramsey_series(dev, powers, 1e-8, snr=None, points=64)
    assert len(clean) == 2
    assert clean[0].theta.size == 64
    assert np.max(np.abs(clean[0].signal)) <= 1.0 + 1e-12

    noisy_a = simulate_ramsey_series(dev, powers, 1e-8, snr=100.0, seed=5)
    noisy_b = simulate_ramsey_series(dev, powers, 1e-8, snr=100.0, seed=5)
    np.testing.assert_array_equal(noisy_a[1].signal, noisy_b[1].signal)
    assert noisy_a[0].theta.size == 4096

    with pytest.raises(ValidationError):
        simulate_ramsey_series(dev, powers, 0.0, snr=None)
    print("  ✓ 4096 点，同种子可复现")


def test_output_spectrum():
    print("\n[7] 测试输出频谱...")
    omega_d = 2 * math.pi * 22e9
    tones = [(0.0, 1e6), (2e5, 5e3), (-2e5, 5e3)]
    spectrum = simulate_output_spectrum(tones, 2.3, 96.8, omega_d, 4700.0, span=1e6, points=1001)
    quanta = spectrum_to_quanta(spectrum, 96.8, omega_d, 4700.0)

    assert np.median(quanta) == pytest.approx(2.3, rel=1e-12)
    assert quanta[500] == pytest.approx(1e6 + 2.3, rel=1e-12)
    assert quanta[700] == pytest.approx(5e3 + 2.3, rel=1e-12)
    assert quanta[300] == pytest.approx(5e3 + 2.3, rel=1e-12)
    assert np.sum(quanta > 3.0) == 3

    with pytest.raises(ValidationError):
        simulate_output_spectrum(tones, -1.0, 96.8, omega_d, 4700.0, span=1e6)
    print("  ✓ 噪声底 2.3 光子，三个音落在对应频点")


def test_scenario_serialization():
    print("\n[8] 测试场景序列化与校验...")
    scenario = ChainScenario.hemt_dominated(seed=3)
    restored = ChainScenario.from_dict(scenario.to_dict())
    assert restored == scenario
    assert scenario.rest[0] == pytest.approx(1e7)
    assert scenario.rest[1] == pytest.approx(20.01)

    config_style = ChainScenario.from_dict({
        "stages": [{"name": "hemt", "gain_db": 40.0, "added_noise": 20.0}],
        "vts_temps": [0.1, 1.0, 2.0],
    })
    assert config_style.stages[0].gain == pytest.approx(1e4)

    stages = [ChainStage("hemt", 1e4, 20.0)]
    with pytest.raises(ValidationError):
        ChainScenario(stages=[], vts_temps=[0.1, 0.2])
    with pytest.raises(ValidationError):
        ChainScenario(stages=stages, vts_temps=[0.2, 0.1])
    with pytest.raises(ValidationError):
        ChainScenario(stages=stages, vts_temps=[0.1, 0.2], radiometer_samples=0.0)
    print("  ✓ to_dict/from_dict，非法场景被拒绝")


def main():
    """运行所有测试"""
    print("=" * 60)
    print("WJPA 合成数据验证")
    print("=" * 60)

    tests = [
        ("随机数确定性", test_rng_determinism),
        ("增益压缩律", test_compression_law),
        ("VTS 正向模型", test_vts_forward_model),
        ("辐射计涨落", test_radiometer_noise),
        ("VNA 迹线", test_vna_trace),
        ("Ramsey 条纹", test_ramsey_series),
        ("输出频谱", test_output_spectrum),
        ("场景序列化", test_scenario_serialization),
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
