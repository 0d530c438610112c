"""
电路模型流水线

负责由器件参数计算:
- 结参数 (工艺换算) 与等离子体频率
- 端口反射迹线
- 结端口 BBQ 分析 (f_res、Q、p、K) 与 Kerr 的对角化校验
- 反射拟合得到的带载 Q
- L_J 扫描表
- 可选: 对实测/仿真导纳迹线做 BBQ 提取
"""

import logging
import math
from typing import Any, Dict

import numpy as np
import pandas as pd

from core.circuit import (
    ComplexTrace, JunctionProcess, analyze_mode, bbq_extract, junction_from_process,
    kerr_from_hamiltonian, kerr_from_participation, lj_sweep, plasma_frequency,
    reflection_from_circuit,
)
from core.errors import NoRootInBracket, WJPAError
from core.paramp import LinearMode, fit_reflection
from core.pipelines.base_pipeline import BasePipeline, RunContext
from utils.data_storage import read_trace

logger = logging.getLogger(__name__)


class CircuitPipeline(BasePipeline):
    overrides = {
        "l_j0_ph": "device.l_j0_pH",
        "f_min_hz": "circuit.f_min_hz",
        "f_max_hz": "circuit.f_max_hz",
        "points": "circuit.points",
        "admittance": "circuit.admittance_input",
    }
    sections = ["device", "junction"]

    @property
    def name(self) -> str:
        return "circuit"

    @property
    def help(self) -> str:
        return "电路模型: 谐振频率、Q 与 BBQ 报告"

    def add_arguments(self, parser):
        parser.add_argument("--l-j0-ph", dest="l_j0_ph", type=float, help="零磁通结电感 (pH)")
        parser.add_argument("--f-min-hz", dest="f_min_hz", type=float, help="反射迹线起始频率")
        parser.add_argument("--f-max-hz", dest="f_max_hz", type=float, help="反射迹线终止频率")
        parser.add_argument("--points", type=int, help="反射迹线点数")
        parser.add_argument("--admittance", help="导纳迹线 CSV (freq_hz,re,im)，对其做 BBQ 提取")

    def run(self, ctx: RunContext) -> Dict[str, Any]:
        dev = self.device(ctx.config)
        section = ctx.config.get_section("circuit")
        junc = ctx.config.get_section("junction")

        junction = junction_from_process(JunctionProcess(
            critical_current_density=float(junc["jc_a_per_cm2"]),
            specific_capacitance=float(junc["c_spec_fF_per_um2"]),
            area=float(junc["area_um2"]),
        ))

        grid = np.linspace(float(section["f_min_hz"]), float(section["f_max_hz"]),
                           int(section["points"]))
        trace = reflection_from_circuit(dev, grid)
        frame = trace.to_frame()
        frame["mag_db"] = trace.magnitude_db
        frame["phase_deg"] = trace.phase_deg
        ctx.write_table("reflection", "reflection_trace", frame)

        mode = analyze_mode(dev)
        logger.info(f"[OK] f_res={mode.f_res / 1e9:.4f} GHz, Q={mode.q_loaded:.1f}, p={mode.p:.4f}")

        fit_report: Dict[str, Any] = {}
        half = max(6 * mode.kappa, 50e6)
        try:
            fit = fit_reflection(
                reflection_from_circuit(dev, np.linspace(mode.f_res - half, mode.f_res + half, 801)),
                guess=LinearMode.from_mode_params(mode),
            )
            fit_report = {**fit.mode.to_dict(),
                          "q_loaded": fit.mode.f_res / fit.mode.kappa,
                          "residual": fit.residual}
        except WJPAError as e:
            logger.warning(f"[WARNING] 反射拟合失败: {e.code}: {e.message}")
            fit_report = e.to_dict()

        sweep = lj_sweep(dev, [v * 1e-12 for v in section["lj_sweep_pH"]])
        ctx.write_table("lj_sweep", "lj_sweep", pd.DataFrame({
            "l_j_ph": [m.L_J * 1e12 for m in sweep],
            "f_res_hz": [m.f_res for m in sweep],
            "q_loaded": [m.q_loaded for m in sweep],
            "p": [m.p for m in sweep],
            "kerr_hz": [m.K / (2 * math.pi) for m in sweep],
            "q_times_p": [m.q_times_p for m in sweep],
        }))

        summary = {
            "device": dev.to_dict(),
            "junction": junction.to_dict(),
            "plasma_frequency_hz": plasma_frequency(dev.L_J0, dev.C_J),
            "mode": mode.to_dict(),
            "kerr_hz": mode.K / (2 * math.pi),
            "kerr_hamiltonian_hz": kerr_from_hamiltonian(min(mode.p, 1.0), mode.f_res, dev.L_J0)
                                   / (2 * math.pi),
            "fit": fit_report,
        }
        if section.get("admittance_input"):
            summary["measured_bbq"] = self._measured_bbq(ctx, section, dev.L_J0)
        return summary

    @staticmethod
    def _upward_zero(trace: ComplexTrace) -> float:
        """Im(Y) 的首个上升过零点 (线性插值)"""
        im = trace.values.imag
        idx = np.flatnonzero((im[:-1] < 0) & (im[1:] >= 0))
        if idx.size == 0:
            raise NoRootInBracket("导纳迹线中没有 Im(Y) 的上升过零点",
                                  {"f_min_hz": float(trace.freqs[0]), "f_max_hz": float(trace.freqs[-1])})
        i = int(idx[0])
        f0, f1 = trace.freqs[i], trace.freqs[i + 1]
        return float(f0 - im[i] * (f1 - f0) / (im[i + 1] - im[i]))

    def _measured_bbq(self, ctx: RunContext, section: Dict[str, Any], L_J: float) -> Dict[str, Any]:
        trace = read_trace(ctx.require_input("circuit.admittance_input"), kind="admittance")
        f_res = float(section.get("admittance_f_res_hz") or 0.0) or self._upward_zero(trace)
        C_p, L_p, p = bbq_extract(trace, f_res, L_J)
        logger.info(f"[OK] 导纳迹线 BBQ: f_res={f_res / 1e9:.4f} GHz, p={p:.4f}")
        return {
            "f_res_hz": f_res,
            "c_p_f": C_p,
            "l_p_h": L_p,
            "p": p,
            "kerr_hz": kerr_from_participation(min(p, 1.0), f_res, L_J) / (2 * math.pi),
        }
