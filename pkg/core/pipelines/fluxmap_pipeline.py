"""磁通映射: 各外加磁通下的拟合谐振频率与线宽"""

import logging
from typing import Any, Dict

import numpy as np
import pandas as pd

from core.paramp import flux_map
from core.pipelines.base_pipeline import BasePipeline, RunContext

logger = logging.getLogger(__name__)


class FluxMapPipeline(BasePipeline):
    overrides = {
        "phi_min": "fluxmap.phi_min",
        "phi_max": "fluxmap.phi_max",
        "phi_points": "fluxmap.phi_points",
        "points": "fluxmap.points",
    }
    sections = ["device"]

    @property
    def name(self) -> str:
        return "fluxmap"

    @property
    def help(self) -> str:
        return "谐振频率随外加磁通 (Φ/Φ0) 的调谐曲线"

    def add_arguments(self, parser):
        parser.add_argument("--phi-min", dest="phi_min", type=float, help="起始磁通 Φ/Φ0")
        parser.add_argument("--phi-max", dest="phi_max", type=float, help="终止磁通 Φ/Φ0")
        parser.add_argument("--phi-points", dest="phi_points", type=int, help="磁通点数")
        parser.add_argument("--points", type=int, help="每个磁通点的迹线点数")

    def run(self, ctx: RunContext) -> Dict[str, Any]:
        section = ctx.config.get_section("fluxmap")
        grid = np.linspace(float(section["phi_min"]), float(section["phi_max"]),
                           int(section["phi_points"]))
        result = flux_map(self.device(ctx.config), grid, points=int(section["points"]))

        frame = pd.DataFrame({
            "phi_ext": [p.phi_ext for p in result.points],
            "l_j_ph": [p.L_J * 1e12 for p in result.points],
            "f_res_hz": [p.mode.f_res for p in result.points],
            "kappa_ext_hz": [p.mode.kappa_ext for p in result.points],
            "kappa_int_hz": [p.mode.kappa_int for p in result.points],
            "q_loaded": [p.mode.f_res / p.mode.kappa for p in result.points],
            "residual": [p.residual for p in result.points],
        })
        ctx.write_table("fluxmap", "flux_map", frame)

        f_res = frame["f_res_hz"].to_numpy()
        monotone = bool(np.all(np.diff(f_res) < 0)) if f_res.size > 1 else True
        logger.info(f"[OK] 磁通点 {len(result.points)}/{grid.size} 成功")
        return {
            "points": len(result.points),
            "failed": result.errors,
            "tuning_range_hz": float(np.ptp(f_res)) if f_res.size else 0.0,
            "monotone_decreasing": monotone,
        }
