"""
增益流水线

负责在零磁通工作点上计算:
- 各目标增益的增益曲线与 P_1dB
- 等增益工作点族的 P_1dB-泵浦功率斜率
- 固定泵浦频率、只扫泵浦功率时的 P_1dB 与增益
- 各磁通点的可调谐性
- 可选: 显式泵浦 (频率, 功率) 下的稳态与增益曲线
"""

import logging
import math
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from core.circuit import analyze_mode
from core.constants import db_to_linear, dbm_to_watts, watts_to_dbm
from core.errors import WJPAError
from core.paramp import (
    Branch, LinearMode, compression_series, design_operating_point, fixed_pump_series,
    gain_bandwidth_product, gain_profile, p1db, p1db_slope, pump_steady_state, tune_over_flux,
)
from core.pipelines.base_pipeline import BasePipeline, RunContext

logger = logging.getLogger(__name__)

SPAN_FACTOR = 5.0


class GainPipeline(BasePipeline):
    overrides = {
        "target_gains_db": "gain.target_gains_db",
        "series_gain_db": "gain.series_gain_db",
        "points": "gain.points",
        "branch": "gain.branch",
        "f_pump_hz": "gain.f_pump_hz",
        "p_pump_dbm": "gain.p_pump_dbm",
        "p_pump_w": "gain.p_pump_w",
    }
    sections = ["device"]

    @property
    def name(self) -> str:
        return "gain"

    @property
    def help(self) -> str:
        return "增益曲线、P_1dB 表、压缩斜率与磁通可调谐性"

    def add_arguments(self, parser):
        parser.add_argument("--target-gains-db", dest="target_gains_db", type=float, nargs="+",
                            help="目标峰值增益 (dB)")
        parser.add_argument("--series-gain-db", dest="series_gain_db", type=float,
                            help="压缩斜率序列的目标增益 (dB)")
        parser.add_argument("--points", type=int, help="增益曲线点数")
        parser.add_argument("--branch", choices=[b.value for b in Branch], help="双稳区分支")
        parser.add_argument("--f-pump-hz", dest="f_pump_hz", type=float, help="显式泵浦频率")
        parser.add_argument("--p-pump-dbm", dest="p_pump_dbm", type=float, help="显式泵浦功率 (器件端口)")
        parser.add_argument("--p-pump-w", dest="p_pump_w", type=float, help="显式泵浦功率 (W)，优先于 dBm")

    def run(self, ctx: RunContext) -> Dict[str, Any]:
        section = ctx.config.get_section("gain")
        dev = self.device(ctx.config)
        params = analyze_mode(dev)
        mode, K = LinearMode.from_mode_params(params), params.K
        points = int(section["points"])

        profiles: List[pd.DataFrame] = []
        rows: List[Dict[str, Any]] = []
        for g_db in section["target_gains_db"]:
            g_db = float(g_db)
            row: Dict[str, Any] = {"target_gain_db": g_db}
            try:
                op = design_operating_point(mode, K, db_to_linear(g_db))
                half = SPAN_FACTOR * mode.kappa / math.sqrt(db_to_linear(g_db))
                result = gain_profile(mode, K, op, np.linspace(op.f_pump - half, op.f_pump + half, points))
                profiles.append(pd.DataFrame({"target_gain_db": g_db, "freq_hz": result.freqs,
                                              "gain_db": result.gain_db}))
                row.update(peak_gain_db=result.peak_gain_db, f_pump_hz=op.f_pump,
                           bandwidth_3db_hz=result.bandwidth_3db,
                           gain_bandwidth_hz=gain_bandwidth_product(result),
                           p_pump_dbm=op.P_pump_dbm, n_p=op.n_p)
                row["p1db_dbm"] = float(watts_to_dbm(p1db(mode, K, op)))
            except WJPAError as e:
                logger.warning(f"[WARNING] 目标增益 {g_db} dB: {e.code}: {e.message}")
                row["error"] = e.code
            rows.append(row)

        if profiles:
            ctx.write_table("gain_profiles", "gain_profiles", pd.concat(profiles, ignore_index=True))
        ctx.write_table("p1db", "p1db_table", pd.DataFrame(rows))

        series = compression_series(mode, K, db_to_linear(float(section["series_gain_db"])),
                                    span_db=float(section["span_db"]),
                                    points=int(section["slope_points"]))
        ctx.write_table("compression_series", "compression_series", pd.DataFrame(
            series, columns=["p_pump_dbm", "p1db_dbm"]))
        slope = p1db_slope(series)
        logger.info(f"[OK] P_1dB 对泵浦功率斜率 {slope:.3f}")

        fixed_slope, fixed_error = None, None
        try:
            fixed = fixed_pump_series(mode, K, db_to_linear(float(section["series_gain_db"])),
                                      gain_span_db=float(section["fixed_pump_gain_span_db"]),
                                      points=int(section["slope_points"]))
            ctx.write_table("compression_series_fixed_pump", "compression_series_fixed_pump",
                            pd.DataFrame(fixed, columns=["p_pump_dbm", "p1db_dbm", "gain_db"]))
            fixed_slope = p1db_slope(fixed)
            logger.info(f"[OK] 固定泵浦频率下 P_1dB 对泵浦功率斜率 {fixed_slope:.3f}")
        except WJPAError as e:
            logger.warning(f"[WARNING] 固定泵浦频率序列: {e.code}: {e.message}")
            fixed_error = e.code

        tuning = tune_over_flux(dev, [float(p) for p in section["flux_points"]],
                                db_to_linear(float(section["series_gain_db"])), points=points)
        ctx.write_table("tunability", "tunability", pd.DataFrame({
            "phi_ext": [phi for phi, _ in tuning],
            "f_peak_hz": [r.f_peak for _, r in tuning],
            "peak_gain_db": [r.peak_gain_db for _, r in tuning],
            "bandwidth_3db_hz": [r.bandwidth_3db for _, r in tuning],
        }))

        summary = {
            "mode": params.to_dict(),
            "kerr_hz": K / (2 * math.pi),
            "p1db_slope": slope,
            "p1db_slope_fixed_pump": fixed_slope,
            "fixed_pump_error": fixed_error,
            "tuning_span_hz": float(np.ptp([r.f_peak for _, r in tuning])) if tuning else 0.0,
        }
        if float(section["f_pump_hz"]) > 0:
            summary["explicit_pump"] = self._explicit_pump(ctx, mode, K, section, points)
        return summary

    def _explicit_pump(self, ctx: RunContext, mode: LinearMode, K: float,
                       section: Dict[str, Any], points: int) -> Dict[str, Any]:
        p_pump = float(section.get("p_pump_w") or 0.0)
        if p_pump <= 0:
            p_pump = float(dbm_to_watts(float(section["p_pump_dbm"])))
        op = pump_steady_state(mode, K, float(section["f_pump_hz"]), p_pump, Branch(section["branch"]))
        half = SPAN_FACTOR * mode.kappa
        result = gain_profile(mode, K, op, np.linspace(op.f_pump - half, op.f_pump + half, points))
        ctx.write_table("explicit_gain", "gain_profile", pd.DataFrame({
            "freq_hz": result.freqs, "gain_db": result.gain_db}))
        return {"operating_point": op.to_dict(), **result.summary()}
