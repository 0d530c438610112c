#!/usr/bin/env python3
"""
命令行与数据存储验证脚本

测试:
1. synth → yfactor 往返 (N_add ≈ 2.0)
2. yfactor 缺省修正取 manifest 中的 N_rest
3. synth → starkcal 往返 (η ≈ 1/2.3)
4. taper / circuit / fit / fluxmap / gain 子命令
5. 缺失输入: 退出码 2 与 error.json
6. 重复运行逐字节一致，--format json
7. 数据存储: 迹线读取、输出不得覆盖输入
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import contextlib
import io
import json
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from core.circuit import ComplexTrace
from core.errors import DataFormatError, InputFileMissing, ValidationError
from main import main
from utils.data_storage import DataStorage, read_json, read_trace, read_vts_dataset


def run_cli(*argv: str):
    """运行 main 并解析标准输出的 JSON"""
    buffer = io.StringIO()
    with contextlib.redirect_stdout(buffer):
        code = main(list(argv))
    lines = [line for line in buffer.getvalue().splitlines() if line.strip()]
    return code, json.loads(lines[-1]) if lines else None


def summary(out_dir: Path, command: str):
    kind, data = read_json(out_dir / f"{command}_summary.json")
    assert kind == f"{command}_summary"
    return data


def test_synth_yfactor_round_trip():
    print("\n[1] 测试 synth → yfactor...")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        code, out = run_cli("synth", "--kind", "vts", "--out-dir", str(tmp / "data"), "--seed", "3")
        assert code == 0
        assert "synth/vts/manifest.json" in out["outputs"]
        truth = summary(tmp / "data", "synth")["vts"]["n_add_truth"]
        assert truth == pytest.approx(2.0)

        code, out = run_cli("yfactor", "--input", str(tmp / "data" / "synth" / "vts"),
                            "--correction", "per_point", "--n-rest", "20.01",
                            "--out-dir", str(tmp / "noise"))
        assert code == 0
        result = summary(tmp / "noise", "yfactor")
        assert result["n_add"] == pytest.approx(truth, abs=0.1)
        assert result["status_counts"]["guard"] == 7
        assert result["frequencies"] == 201

        frame = pd.read_csv(tmp / "noise" / "noise_spectrum.csv")
        assert len(frame) == 201
        _, record = read_json(tmp / "noise" / "run_record.json")
        assert record["command"] == "yfactor"
        assert any(name.endswith("manifest.json") for name in record["inputs"])
        assert record["parameters"]["yfactor"]["correction"] == "per_point"
        print(f"  ✓ N_add={result['n_add']:.4f} (真值 {truth})")


def test_yfactor_default_correction():
    print("\n[2] 测试 yfactor 缺省修正 (取 manifest 中的 N_rest)...")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        assert run_cli("synth", "--kind", "vts", "--out-dir", str(tmp / "data"), "--seed", "1")[0] == 0
        vts_dir = tmp / "data" / "synth" / "vts"
        dataset = read_vts_dataset(vts_dir)
        assert dataset.n_rest == pytest.approx(20.01)

        assert run_cli("yfactor", "--input", str(vts_dir), "--out-dir", str(tmp / "auto"))[0] == 0
        result = summary(tmp / "auto", "yfactor")
        assert result["correction"] == "per_point"
        assert result["n_rest_used"] == pytest.approx(20.01)
        assert result["n_add"] == pytest.approx(2.0, abs=0.1)

        # 显式关闭修正时压缩使结果明显偏低
        assert run_cli("yfactor", "--input", str(vts_dir), "--correction", "none",
                       "--out-dir", str(tmp / "none"))[0] == 0
        uncorrected = summary(tmp / "none", "yfactor")
        assert uncorrected["correction"] == "none"
        assert uncorrected["n_rest_used"] is None
        assert uncorrected["n_add"] < 1.8

        # WJPA 关闭的链路标定不做修正
        assert run_cli("yfactor", "--input", str(vts_dir), "--wjpa-off",
                       "--out-dir", str(tmp / "off"))[0] == 0
        assert summary(tmp / "off", "yfactor")["correction"] == "none"

        # manifest 未记录 N_rest 时，显式 mean 修正缺少 N_rest 报错
        manifest = json.loads((vts_dir / "manifest.json").read_text(encoding="utf-8"))
        manifest["data"].pop("n_rest")
        (vts_dir / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
        assert read_vts_dataset(vts_dir).n_rest is None
        code, out = run_cli("yfactor", "--input", str(vts_dir), "--correction", "mean",
                            "--out-dir", str(tmp / "mean"))
        assert code == 1
        assert out["error"] == "validation_error"
        assert run_cli("yfactor", "--input", str(vts_dir), "--out-dir", str(tmp / "bare"))[0] == 0
        assert summary(tmp / "bare", "yfactor")["correction"] == "none"
        print(f"  ✓ 缺省 N_add={result['n_add']:.4f}，未修正 {uncorrected['n_add']:.4f}")


def test_synth_starkcal_round_trip():
    print("\n[3] 测试 synth → starkcal...")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        assert run_cli("synth", "--kind", "ramsey", "--out-dir", str(tmp / "data"))[0] == 0
        assert run_cli("synth", "--kind", "spectrum", "--out-dir", str(tmp / "spec"))[0] == 0
        truth = summary(tmp / "data", "synth")["ramsey"]["p_ratio_truth"]

        code, _ = run_cli("starkcal", "--input", str(tmp / "data" / "synth" / "ramsey" / "series.json"),
                          "--spectrum", str(tmp / "spec" / "synth" / "spectrum.csv"),
                          "--out-dir", str(tmp / "cal"))
        assert code == 0
        result = summary(tmp / "cal", "starkcal")
        assert result["calibration"]["P_ratio"] == pytest.approx(truth, rel=0.02)
        assert result["g_sys_db_used"] == pytest.approx(96.8)
        assert result["noise"]["n_sys"] == pytest.approx(2.3, rel=1e-6)
        assert result["noise"]["eta"] == pytest.approx(1 / 2.3, rel=1e-6)
        assert result["noise"]["t_sys_k"] == pytest.approx(2.43, abs=0.005)
        assert (tmp / "cal" / "stark_series.csv").exists()
        assert (tmp / "cal" / "spectrum_quanta.csv").exists()
        print(f"  ✓ η={result['noise']['eta'] * 100:.1f}%")


def test_design_commands():
    print("\n[4] 测试设计类子命令...")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        assert run_cli("taper", "--out-dir", str(tmp))[0] == 0
        taper = pd.read_csv(tmp / "taper.csv")
        assert list(taper.columns) == ["x_m", "half_width_m", "slot_width_m"]
        assert summary(tmp, "taper")["end_half_width_m"] > 0

        assert run_cli("circuit", "--points", "801", "--out-dir", str(tmp))[0] == 0
        circuit = summary(tmp, "circuit")
        assert 20e9 <= circuit["mode"]["f_res"] <= 23e9
        assert circuit["kerr_hz"] < 0
        assert (tmp / "lj_sweep.csv").exists()

        # 并联 RLC 导纳 (26 pH, 2.3 pF) → p = 26/120
        f0 = 1 / (2 * np.pi * np.sqrt(26e-12 * 2.3e-12))
        freqs = np.linspace(0.97 * f0, 1.03 * f0, 301)
        omega = 2 * np.pi * freqs
        admittance = 1j * omega * 2.3e-12 + 1 / (1j * omega * 26e-12)
        pd.DataFrame({"freq_hz": freqs, "re": admittance.real, "im": admittance.imag}).to_csv(
            tmp / "admittance.csv", index=False)
        assert run_cli("circuit", "--points", "201", "--admittance", str(tmp / "admittance.csv"),
                       "--out-dir", str(tmp / "bbq"))[0] == 0
        measured = summary(tmp / "bbq", "circuit")["measured_bbq"]
        assert measured["f_res_hz"] == pytest.approx(f0, rel=1e-6)
        assert measured["l_p_h"] == pytest.approx(26e-12, rel=0.01)
        assert measured["p"] == pytest.approx(0.2167, abs=0.005)

        assert run_cli("synth", "--kind", "vna", "--out-dir", str(tmp))[0] == 0
        assert run_cli("fit", "--input", str(tmp / "synth" / "vna_trace.csv"), "--out-dir", str(tmp))[0] == 0
        fit = summary(tmp, "fit")
        assert fit["mode"]["f_res"] == pytest.approx(22e9, rel=1e-4)
        assert fit["mode"]["kappa_ext"] == pytest.approx(200e6, rel=0.05)
        trace = pd.read_csv(tmp / "fit_trace.csv")
        model = trace["model_re"] + 1j * trace["model_im"]
        data = trace["re"] + 1j * trace["im"]
        assert np.max(np.abs(model - data)) < 0.1 * np.max(np.abs(data))

        assert run_cli("fluxmap", "--phi-points", "3", "--points", "401", "--out-dir", str(tmp))[0] == 0
        fluxmap = summary(tmp, "fluxmap")
        assert fluxmap["points"] == 3
        assert fluxmap["tuning_range_hz"] >= 2e9
        assert fluxmap["monotone_decreasing"]

        code, out = run_cli("gain", "--target-gains-db", "20", "--points", "201", "--out-dir", str(tmp))
        assert code == 0
        assert "p1db.csv" in out["outputs"]
        gain = summary(tmp, "gain")
        assert gain["p1db_slope"] < 0
        assert gain["p1db_slope_fixed_pump"] < 0
        assert gain["fixed_pump_error"] is None
        fixed = pd.read_csv(tmp / "compression_series_fixed_pump.csv")
        assert list(fixed.columns) == ["p_pump_dbm", "p1db_dbm", "gain_db"]
        assert np.all(np.diff(fixed["gain_db"]) > 0)
        print("  ✓ taper/circuit/fit/fluxmap/gain 运行成功")


def test_missing_input():
    print("\n[5] 测试缺失输入...")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        code, out = run_cli("yfactor", "--input", str(tmp / "nope"), "--out-dir", str(tmp))
        assert code == 2
        assert out["error"] == "input_file_missing"
        error = json.loads((tmp / "error.json").read_text(encoding="utf-8"))
        assert error["command"] == "yfactor"
        assert error["error"] == "input_file_missing"

        code, out = run_cli("fit", "--out-dir", str(tmp))
        assert code == 1
        assert out["error"] == "validation_error"
        print("  ✓ 退出码 2，error.json 已写出")


def test_reproducible_reruns():
    print("\n[6] 测试重复运行一致性...")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for run in ("a", "b"):
            assert run_cli("synth", "--out-dir", str(tmp / run), "--seed", "11")[0] == 0
        files = sorted(p.relative_to(tmp / "a") for p in (tmp / "a").rglob("*") if p.is_file())
        assert len(files) > 10
        for rel in files:
            if rel.name == "run_record.json":
                continue
            assert (tmp / "a" / rel).read_bytes() == (tmp / "b" / rel).read_bytes(), rel

        _, rec_a = read_json(tmp / "a" / "run_record.json")
        _, rec_b = read_json(tmp / "b" / "run_record.json")
        rec_a.pop("created_at")
        rec_b.pop("created_at")
        assert rec_a == rec_b

        assert run_cli("taper", "--format", "json", "--out-dir", str(tmp / "j"))[0] == 0
        kind, rows = read_json(tmp / "j" / "taper.json")
        assert kind == "taper_curve"
        assert set(rows[0]) == {"x_m", "half_width_m", "slot_width_m"}
        print(f"  ✓ {len(files)} 个文件逐字节一致")


def test_data_storage():
    print("\n[7] 测试数据存储...")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        freqs = np.linspace(21e9, 23e9, 11)
        values = 0.5 * np.exp(1j * np.linspace(0.0, 3.0, 11))
        pd.DataFrame({
            "Freq_Hz": freqs,
            "mag_db": 20 * np.log10(np.abs(values)),
            "phase_deg": np.degrees(np.angle(values)),
        }).to_csv(tmp / "polar.csv", index=False)
        trace = read_trace(tmp / "polar.csv")
        np.testing.assert_allclose(trace.values, values, rtol=1e-12)

        pd.DataFrame({"freq_hz": freqs, "x": freqs}).to_csv(tmp / "bad.csv", index=False)
        with pytest.raises(DataFormatError):
            read_trace(tmp / "bad.csv")
        with pytest.raises(InputFileMissing):
            read_trace(tmp / "absent.csv")
        with pytest.raises(InputFileMissing):
            read_vts_dataset(tmp / "absent")

        storage = DataStorage(tmp)
        storage.write_trace("trace.csv", ComplexTrace(freqs=freqs, values=values))
        np.testing.assert_allclose(read_trace(tmp / "trace.csv").values, values, rtol=1e-10)
        storage.protect(tmp / "trace.csv")
        with pytest.raises(ValidationError):
            storage.write_trace("trace.csv", ComplexTrace(freqs=freqs, values=values))
        assert not list(tmp.glob("*.tmp"))

        (tmp / "plain.json").write_text(json.dumps({"a": 1}), encoding="utf-8")
        assert read_json(tmp / "plain.json") == (None, {"a": 1})
        storage.write_json("nan.json", "test", {"x": float("nan")})
        assert read_json(tmp / "nan.json") == ("test", {"x": None})
        print("  ✓ 极坐标迹线、表头校验、输入保护")


def main_tests():
    """运行所有测试"""
    print("=" * 60)
    print("WJPA 命令行与数据存储验证")
    print("=" * 60)

    tests = [
        ("synth → yfactor", test_synth_yfactor_round_trip),
        ("yfactor 缺省修正", test_yfactor_default_correction),
        ("synth → starkcal", test_synth_starkcal_round_trip),
        ("设计类子命令", test_design_commands),
        ("缺失输入", test_missing_input),
        ("重复运行一致", test_reproducible_reruns),
        ("数据存储", test_data_storage),
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
    sys.exit(main_tests())
