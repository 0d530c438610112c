#!/usr/bin/env python3
"""
Y 因子噪声标定验证脚本

测试:
1. 量子 Johnson 噪声
2. Friis 级联
3. 单频点回归 (示例值、压缩修正、WJPA 关闭)
4. 逐频点流水线: 合成数据往返、压缩偏差、线程数无关性
5. 辐射计噪声随平均次数的缩放
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import math

import numpy as np
import pytest

from core.constants import H, K_B
from core.errors import InsufficientSpan, NonPositiveGain, ValidationError
from core.noisecal import (
    ChainStage, PipelineOptions, VTSSweepDataset, YFactorOptions, friis_chain, johnson_quanta,
    renormalize_noise, yfactor_pipeline, yfactor_regression,
)
from core.synth import ChainScenario, CompressionLaw, reference_compression, simulate_vts_sweep

FREQS = np.linspace(22e9 - 20e6, 22e9 + 20e6, 201)


def line(slope: float, intercept: float, xs=(0.5, 1.0, 1.5, 2.0)):
    return [(x, slope * x + intercept) for x in xs]


def test_johnson_quanta():
    print("\n[1] 测试 Johnson 噪声...")
    assert johnson_quanta(0.0, 22e9) == 0.5
    oracle = 0.5 / math.tanh(H * 22e9 / (2 * K_B * 1.75))
    assert johnson_quanta(1.75, 22e9) == pytest.approx(oracle, rel=1e-12)
    assert johnson_quanta(1.75, 22e9) == pytest.approx(1.70743, abs=1e-4)
    # 高温极限 k_BT/hf
    assert johnson_quanta(300.0, 22e9) == pytest.approx(K_B * 300.0 / (H * 22e9), rel=1e-3)

    # 与 Bose-Einstein 占据数 + ½ 一致
    rng = np.random.default_rng(5)
    temps = rng.uniform(0.01, 10.0, 500)
    freqs = rng.uniform(1e9, 40e9, 500)
    x = H * freqs / (K_B * temps)
    np.testing.assert_allclose(johnson_quanta(temps, freqs), 1.0 / (np.exp(x) - 1.0) + 0.5, rtol=1e-12)
    np.testing.assert_allclose(johnson_quanta(temps, freqs), 0.5 / np.tanh(x / 2), rtol=1e-12)

    grid = johnson_quanta(np.array([[0.0], [1.0]]), np.array([20e9, 22e9]))
    assert grid.shape == (2, 2)
    assert np.all(grid[0] == 0.5)

    with pytest.raises(ValidationError):
        johnson_quanta(-1.0, 22e9)
    with pytest.raises(ValidationError):
        johnson_quanta(1.0, 0.0)
    print(f"  ✓ N(1.75 K, 22 GHz)={johnson_quanta(1.75, 22e9):.5f}")


def test_friis_chain():
    print("\n[2] 测试 Friis 级联...")
    gain, noise = friis_chain([ChainStage("hemt", 1e4, 20.0), ChainStage("rt", 1e3, 100.0)])
    assert gain == pytest.approx(1e7)
    assert noise == pytest.approx(20.01)

    stage = ChainStage.from_dict({"name": "hemt", "gain_db": 40.0, "added_noise": 20.0})
    assert stage.gain == pytest.approx(1e4)
    with pytest.raises(ValidationError):
        friis_chain([])
    print("  ✓ N = N1 + N2/G1")


def test_regression_example():
    """斜率 200、截距 150 → N_add = 2.0"""
    print("\n[3] 测试回归示例...")
    fit = yfactor_regression(line(200.0, 150.0))
    assert fit.n_add == pytest.approx(2.0, abs=1e-12)
    assert fit.n_add_ex == pytest.approx(1.5, abs=1e-12)
    assert fit.g_rest == pytest.approx(100.0)
    assert fit.r2 == pytest.approx(1.0)
    assert not fit.negative_intercept

    # N_rest = 20, Ḡ = 100: b/a 降低 0.1，N_add,ex 降低 0.2
    corrected = yfactor_regression(line(200.0, 150.0), YFactorOptions(
        correction="mean", n_rest=20.0, mean_gain=100.0))
    assert corrected.n_add_ex == pytest.approx(1.3, abs=1e-12)
    assert corrected.correction == pytest.approx(0.2)

    off = yfactor_regression(line(200.0, 150.0), YFactorOptions(idler_band=False))
    assert off.g_rest == pytest.approx(200.0)
    assert off.n_add == pytest.approx(0.75)

    weighted = yfactor_regression(line(200.0, 150.0), YFactorOptions(weights=[1.0] * 4))
    assert weighted.n_add == pytest.approx(fit.n_add, abs=1e-9)
    print("  ✓ N_add=2.0，均值修正 −0.2")


def test_regression_errors():
    print("\n[4] 测试回归错误路径...")
    with pytest.raises(InsufficientSpan):
        yfactor_regression(line(200.0, 150.0, xs=(0.5, 1.0)))
    with pytest.raises(InsufficientSpan):
        yfactor_regression(line(200.0, 150.0, xs=(0.5, 0.6, 0.7)))
    with pytest.raises(ValidationError):
        yfactor_regression(line(200.0, 150.0), YFactorOptions(correction="mean"))
    with pytest.raises(ValidationError):
        YFactorOptions(correction="median")

    negative = yfactor_regression(line(200.0, -10.0))
    assert negative.negative_intercept
    assert negative.n_add < 0.5
    print("  ✓ 点数/跨度不足、缺少 n_rest、负截距")


def test_pipeline_hemt_dominated_round_trip():
    """0.1–1.75 K，21.6→12.9 dB 压缩，真值 N_add = 2.0"""
    print("\n[5] 测试合成数据往返...")
    scenario = ChainScenario.hemt_dominated(seed=1)
    dataset = simulate_vts_sweep(scenario, 1.5, reference_compression(), FREQS)
    n_rest = scenario.rest[1]

    result = yfactor_pipeline(dataset, PipelineOptions(correction="per_point", n_rest=n_rest))
    assert result.status.count("guard") == 7
    assert all(s in ("ok", "guard") for s in result.status)
    band = result.band_mean()
    assert band == pytest.approx(2.0, abs=0.1)
    valid = result.n_add[result.valid]
    assert np.all(np.abs(valid - 2.0) < 0.1)

    biased = yfactor_pipeline(dataset, PipelineOptions())
    assert biased.band_mean() < 1.8
    print(f"  ✓ N_add={band:.4f} (未修正 {biased.band_mean():.3f})")

    frame = result.to_frame()
    assert list(frame.columns) == ["freq_hz", "n_add", "n_add_ex", "g_rest_db", "r2",
                                   "min_gain_db", "status"]


def test_pipeline_workers_independent():
    print("\n[6] 测试线程数无关性...")
    scenario = ChainScenario.hemt_dominated(seed=5)
    dataset = simulate_vts_sweep(scenario, 1.5, reference_compression(), FREQS)
    serial = yfactor_pipeline(dataset, PipelineOptions(workers=1))
    parallel = yfactor_pipeline(dataset, PipelineOptions(workers=4))
    np.testing.assert_array_equal(serial.n_add, parallel.n_add)
    assert serial.status == parallel.status
    print("  ✓ workers=1 与 workers=4 结果一致")


def test_uncompressed_exact():
    """无压缩、无辐射计噪声时均值修正精确恢复真值"""
    print("\n[7] 测试无压缩精确解...")
    scenario = ChainScenario.hemt_dominated(seed=1, radiometer_samples=None)
    law = CompressionLaw(g0=100.0)
    dataset = simulate_vts_sweep(scenario, 1.5, law, FREQS)
    result = yfactor_pipeline(dataset, PipelineOptions(guard_bins=0, correction="mean",
                                                       n_rest=scenario.rest[1]))
    assert np.allclose(result.n_add, 2.0, atol=1e-9)
    assert np.allclose(result.g_rest, scenario.rest[0], rtol=1e-9)
    print("  ✓ 误差 < 1e-9")


def test_wjpa_off_chain_calibration():
    print("\n[8] 测试 WJPA 关闭的链路标定...")
    scenario = ChainScenario.hemt_dominated(seed=1, radiometer_samples=None)
    scenario.wjpa_enabled = False
    dataset = simulate_vts_sweep(scenario, 1.5, CompressionLaw(g0=1.0), FREQS)
    result = yfactor_pipeline(dataset, PipelineOptions(guard_bins=0, idler_band=False))
    assert np.allclose(result.n_add, scenario.rest[1], rtol=1e-9)
    assert np.allclose(result.g_rest, scenario.rest[0], rtol=1e-9)
    print(f"  ✓ N_rest={scenario.rest[1]:.3f}")


def test_radiometer_scaling():
    """逐频点误差 ∝ 1/√M"""
    print("\n[9] 测试辐射计噪声缩放...")
    errors = []
    for samples in (1e4, 1e6):
        scenario = ChainScenario.hemt_dominated(seed=11, radiometer_samples=samples)
        dataset = simulate_vts_sweep(scenario, 1.5, reference_compression(), FREQS)
        result = yfactor_pipeline(dataset, PipelineOptions(correction="per_point",
                                                           n_rest=scenario.rest[1]))
        valid = result.n_add[result.valid]
        errors.append(float(np.sqrt(np.mean((valid - 2.0) ** 2))))
    ratio = errors[0] / errors[1]
    assert 5.0 <= ratio <= 20.0
    print(f"  ✓ RMS 误差比 {ratio:.2f}")


def test_dataset_validation():
    print("\n[10] 测试数据集校验...")
    ones = np.ones((3, 4))
    with pytest.raises(ValidationError):
        VTSSweepDataset(freqs=np.arange(4) + 1.0, temps=[0.1, 0.05, 0.2],
                        noise_spectra=ones, gain_traces=ones)
    with pytest.raises(ValidationError):
        VTSSweepDataset(freqs=np.arange(5) + 1.0, temps=[0.1, 0.2, 0.3],
                        noise_spectra=ones, gain_traces=ones)

    gains = ones.copy()
    gains[1, 2] = 0.0
    bad = VTSSweepDataset(freqs=np.arange(4) + 1.0, temps=[0.1, 0.2, 0.3],
                          noise_spectra=ones, gain_traces=gains)
    with pytest.raises(NonPositiveGain):
        renormalize_noise(bad)
    with pytest.raises(ValidationError):
        VTSSweepDataset(freqs=np.arange(4) + 1.0, temps=[0.1, 0.2, 0.3],
                        noise_spectra=ones, gain_traces=ones, n_rest=-1.0)
    print("  ✓ 非递增温度、维度不符、非正增益、负 N_rest")


def main():
    """运行所有测试"""
    print("=" * 60)
    print("WJPA Y 因子噪声标定验证")
    print("=" * 60)

    tests = [
        ("Johnson 噪声", test_johnson_quanta),
        ("Friis 级联", test_friis_chain),
        ("回归示例", test_regression_example),
        ("回归错误路径", test_regression_errors),
        ("合成数据往返", test_pipeline_hemt_dominated_round_trip),
        ("线程数无关", test_pipeline_workers_independent),
        ("无压缩精确解", test_uncompressed_exact),
        ("WJPA 关闭", test_wjpa_off_chain_calibration),
        ("辐射计缩放", test_radiometer_scaling),
        ("数据集校验", test_dataset_validation),
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
