"""
合成数据流水线

负责生成分析子命令可直接读取的数据:
- vna: 带背景与噪声的反射迹线
- vts: VTS 扫描数据集目录
- ramsey: Stark 功率序列 (清单 + 条纹)
- spectrum: 输出频谱
"""

import logging
import math
from typing import Any, Dict

import numpy as np

from core.constants import db_to_linear, dbm_to_watts
from core.errors import ValidationError
from core.noisecal import johnson_quanta
from core.paramp import BackgroundModel, LinearMode
from core.qubitcal import DispersiveDevice
from core.synth import (
    ChainScenario, CompressionLaw, simulate_output_spectrum, simulate_ramsey_series,
    simulate_vna_trace, simulate_vts_sweep,
)
from core.pipelines.base_pipeline import BasePipeline, RunContext

logger = logging.getLogger(__name__)

KINDS = ("all", "vna", "vts", "ramsey", "spectrum")


class SynthPipeline(BasePipeline):
    overrides = {
        "kind": "synth.kind",
        "n_add_ex": "synth.n_add_ex",
    }
    sections = ["starkcal"]

    @property
    def name(self) -> str:
        return "synth"

    @property
    def help(self) -> str:
        return "生成可复现的合成测量数据"

    def add_arguments(self, parser):
        parser.add_argument("--kind", choices=KINDS, help="生成的数据类型")
        parser.add_argument("--n-add-ex", dest="n_add_ex", type=float,
                            help="WJPA 额外附加噪声真值 (光子)")

    def run(self, ctx: RunContext) -> Dict[str, Any]:
        section = ctx.config.get_section("synth")
        kind = section["kind"]
        if kind not in KINDS:
            raise ValidationError(f"未知的合成类型: {kind}", {"allowed": list(KINDS)})
        summary: Dict[str, Any] = {"seed": ctx.seed}
        for name in KINDS[1:]:
            if kind in ("all", name):
                summary[name] = getattr(self, f"_{name}")(ctx, section)
                logger.info(f"[OK] 已生成 {name}")
        return summary

    def _vna(self, ctx: RunContext, section: Dict[str, Any]) -> Dict[str, Any]:
        vna = section["vna"]
        mode = LinearMode(f_res=float(vna["f_res_hz"]), kappa_ext=float(vna["kappa_ext_hz"]),
                          kappa_int=float(vna["kappa_int_hz"]))
        background = BackgroundModel(amp0=1.0, f_center=mode.f_res)
        half = 0.5 * float(vna["span_kappas"]) * mode.kappa
        grid = np.linspace(mode.f_res - half, mode.f_res + half, int(vna["points"]))
        trace = simulate_vna_trace(mode, background, float(vna["snr"]), grid, seed=ctx.seed)
        ctx.storage.write_trace("synth/vna_trace.csv", trace)
        return {"mode": mode.to_dict(), "snr": float(vna["snr"])}

    def _vts(self, ctx: RunContext, section: Dict[str, Any]) -> Dict[str, Any]:
        scenario = ChainScenario.from_dict({**section["scenario"], "seed": ctx.seed})
        comp = section["compression"]
        f0 = scenario.pump_freq_hz
        law = CompressionLaw.from_endpoints(
            g_lo=db_to_linear(float(comp["g_lo_db"])), n_lo=johnson_quanta(float(comp["t_lo_k"]), f0),
            g_hi=db_to_linear(float(comp["g_hi_db"])), n_hi=johnson_quanta(float(comp["t_hi_k"]), f0),
        )
        half = 0.5 * float(section["freq_span_hz"])
        freqs = np.linspace(f0 - half, f0 + half, int(section["freq_points"]))
        n_add_ex = float(section["n_add_ex"])
        dataset = simulate_vts_sweep(scenario, n_add_ex, law, freqs)
        ctx.storage.write_vts_dataset("synth/vts", dataset)
        return {
            "scenario": scenario.to_dict(),
            "compression": law.to_dict(),
            "n_add_ex": n_add_ex,
            "n_add_truth": n_add_ex + 0.5 if scenario.wjpa_enabled else n_add_ex,
        }

    def _ramsey(self, ctx: RunContext, section: Dict[str, Any]) -> Dict[str, Any]:
        ramsey = section["ramsey"]
        dev = DispersiveDevice.from_config(ctx.config.get_section("starkcal"))
        powers_dbm = [float(p) for p in ramsey["p_rt_dbm"]]
        attenuation = db_to_linear(float(ramsey["attenuation_db"]))
        fringes = simulate_ramsey_series(dev, [float(dbm_to_watts(p)) for p in powers_dbm],
                                         attenuation, float(ramsey["snr"]), seed=ctx.seed,
                                         points=int(ramsey["points"]))
        ctx.storage.write_power_series("synth/ramsey", powers_dbm, fringes)
        return {"p_ratio_truth": attenuation, "points": int(ramsey["points"])}

    def _spectrum(self, ctx: RunContext, section: Dict[str, Any]) -> Dict[str, Any]:
        spec = section["spectrum"]
        stark = ctx.config.get_section("starkcal")
        spectrum = simulate_output_spectrum(
            tones=[(float(o), float(n)) for o, n in spec["tones"]],
            noise_floor_quanta=float(spec["floor_quanta"]),
            g_sys_db=float(stark["g_sys_db"]),
            omega_d=2 * math.pi * float(stark["f_d_hz"]),
            r_bw=float(stark["r_bw_hz"]),
            span=float(spec["span_hz"]),
            seed=ctx.seed,
            points=int(spec["points"]),
        )
        ctx.storage.write_spectrum("synth/spectrum.csv", spectrum)
        return {"floor_quanta": float(spec["floor_quanta"]), "g_sys_db": float(stark["g_sys_db"])}
