"""渐变段几何: 输出 y(x) 曲线"""

import logging
from typing import Any, Dict

import pandas as pd

from core.circuit import TaperSpec, taper_curve
from core.pipelines.base_pipeline import BasePipeline, RunContext

logger = logging.getLogger(__name__)


class TaperPipeline(BasePipeline):
    overrides = {
        "w_a_mm": "taper.w_a_mm",
        "s_um": "taper.s_um",
        "a_mm": "taper.a_mm",
        "points": "taper.points",
    }

    @property
    def name(self) -> str:
        return "taper"

    @property
    def help(self) -> str:
        return "波导到槽线渐变段的几何曲线"

    def add_arguments(self, parser):
        parser.add_argument("--w-a-mm", dest="w_a_mm", type=float, help="波导窄边 (mm)")
        parser.add_argument("--s-um", dest="s_um", type=float, help="槽宽 (µm)")
        parser.add_argument("--a-mm", dest="a_mm", type=float, help="渐变长度 (mm)")
        parser.add_argument("--points", type=int, help="采样点数")

    def run(self, ctx: RunContext) -> Dict[str, Any]:
        section = ctx.config.get_section("taper")
        spec = TaperSpec(
            W_a=float(section["w_a_mm"]) * 1e-3,
            S=float(section["s_um"]) * 1e-6,
            A=float(section["a_mm"]) * 1e-3,
        )
        x, y = taper_curve(spec, int(section["points"]))
        ctx.write_table("taper", "taper_curve", pd.DataFrame({
            "x_m": x,
            "half_width_m": y,
            "slot_width_m": spec.S + 2 * y,
        }))
        logger.info(f"[OK] 渐变段曲线 {x.size} 点")
        return {
            "w_a_m": spec.W_a,
            "s_m": spec.S,
            "a_m": spec.A,
            "end_half_width_m": float(y[-1]),
        }
