"""
Stark 功率标定流水线

负责:
- 读取功率序列清单与各功率下的 Ramsey 条纹，拟合相移
- 线性 Stark 标定得到腔端/室温功率比与系统增益
- 可选: 将输出频谱换算为光子数，给出 N_sys、T_sys 与测量效率
"""

import logging
import math
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from core.constants import dbm_to_watts
from core.qubitcal import (
    DispersiveDevice, noise_report, ramsey_phase, spectrum_to_quanta, stark_power_calibration,
)
from core.pipelines.base_pipeline import BasePipeline, RunContext
from utils.data_storage import read_power_series, read_spectrum

logger = logging.getLogger(__name__)


class StarkCalPipeline(BasePipeline):
    overrides = {
        "input": "starkcal.input",
        "spectrum": "starkcal.spectrum",
        "g_sys_db": "starkcal.g_sys_db",
        "r_bw_hz": "starkcal.r_bw_hz",
        "rel_tol": "starkcal.rel_tol",
    }

    @property
    def name(self) -> str:
        return "starkcal"

    @property
    def help(self) -> str:
        return "交流 Stark 功率标定与 G_sys/N_sys/T_sys/η 报告"

    def add_arguments(self, parser):
        parser.add_argument("--input", help="功率序列清单 JSON [{p_rt_dbm, fringe_file}]")
        parser.add_argument("--spectrum", help="输出频谱 CSV (offset_hz,p_dbm)")
        parser.add_argument("--g-sys-db", dest="g_sys_db", type=float,
                            help="系统增益 (dB)，标定未给出时使用")
        parser.add_argument("--r-bw-hz", dest="r_bw_hz", type=float, help="分析仪分辨带宽")
        parser.add_argument("--rel-tol", dest="rel_tol", type=float, help="Stark 线性相对残差上限")

    @staticmethod
    def _output_reference(section: Dict[str, Any]) -> Optional[Tuple[float, float]]:
        p_in, p_out = float(section["reference_p_rt_dbm"]), float(section["reference_p_sa_dbm"])
        if p_in == 0.0 or p_out == 0.0:
            return None
        return float(dbm_to_watts(p_in)), float(dbm_to_watts(p_out))

    def run(self, ctx: RunContext) -> Dict[str, Any]:
        section = ctx.config.get_section("starkcal")
        dev = DispersiveDevice.from_config(section)

        series = read_power_series(ctx.require_input("starkcal.input"))
        rows = []
        for p_w, fringe, path in series:
            ctx.add_input(path)
            fit = ramsey_phase(fringe)
            rows.append({"p_rt_w": p_w, "dphi_rad": fit.dphi, "contrast": fit.contrast,
                         "offset": fit.offset})
        frame = pd.DataFrame(rows)
        ctx.write_table("stark_series", "stark_series", frame)

        cal = stark_power_calibration(dev, list(zip(frame["p_rt_w"], frame["dphi_rad"])),
                                      output_reference=self._output_reference(section),
                                      rel_tol=float(section["rel_tol"]))
        logger.info(f"[OK] 腔端/室温功率比 {cal.P_ratio:.4g}")

        g_sys_db = cal.g_sys_db if math.isfinite(cal.g_sys_db) else float(section["g_sys_db"])
        summary: Dict[str, Any] = {
            "device": dev.to_dict(),
            "calibration": cal.to_dict(),
            "g_sys_db_used": g_sys_db,
        }
        if section.get("spectrum"):
            summary["noise"] = self._spectrum_report(ctx, dev, section, g_sys_db)
        return summary

    def _spectrum_report(self, ctx: RunContext, dev: DispersiveDevice,
                         section: Dict[str, Any], g_sys_db: float) -> Dict[str, Any]:
        spectrum = read_spectrum(ctx.require_input("starkcal.spectrum"))
        quanta = spectrum_to_quanta(spectrum, g_sys_db, dev.omega_d, float(section["r_bw_hz"]))
        ctx.write_table("spectrum_quanta", "spectrum_quanta", pd.DataFrame({
            "offset_hz": spectrum.offsets, "p_dbm": spectrum.power_dbm, "quanta": quanta}))

        # 噪声底取远离载波的频点中位数
        window = float(section["floor_window_hz"])
        mask = np.abs(spectrum.offsets) > window if window > 0 else np.ones(quanta.size, dtype=bool)
        n_sys = float(np.median(quanta[mask]))
        report = noise_report(n_sys, dev.omega_d / (2 * math.pi))
        logger.info(f"[OK] N_sys={n_sys:.3f}, T_sys={report['t_sys_k']:.3f} K, η={report['eta']:.3f}")
        return report
