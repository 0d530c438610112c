"""反射迹线拟合: 读取 VNA 迹线，输出 f_res、κ_ext、κ_int 与背景参数"""

import logging
from typing import Any, Dict

import pandas as pd

from core.paramp import fit_reflection
from core.pipelines.base_pipeline import BasePipeline, RunContext
from utils.data_storage import read_trace

logger = logging.getLogger(__name__)


class FitPipeline(BasePipeline):
    overrides = {
        "input": "fit.input",
        "threshold": "fit.threshold",
    }

    @property
    def name(self) -> str:
        return "fit"

    @property
    def help(self) -> str:
        return "复数反射迹线拟合 (κ_ext/κ_int)"

    def add_arguments(self, parser):
        parser.add_argument("--input", help="迹线 CSV (freq_hz,re,im 或 freq_hz,mag_db,phase_deg)")
        parser.add_argument("--threshold", type=float, help="相对 RMS 残差上限")

    def run(self, ctx: RunContext) -> Dict[str, Any]:
        trace = read_trace(ctx.require_input("fit.input"))
        fit = fit_reflection(trace, threshold=float(ctx.config.get("fit.threshold")))

        model = fit.evaluate(trace.freqs)
        ctx.write_table("fit_trace", "fit_trace", pd.DataFrame({
            "freq_hz": trace.freqs,
            "re": trace.values.real,
            "im": trace.values.imag,
            "model_re": model.real,
            "model_im": model.imag,
        }))

        q_loaded = fit.mode.f_res / fit.mode.kappa
        logger.info(f"[OK] f_res={fit.mode.f_res / 1e9:.6f} GHz, Q={q_loaded:.1f}")
        return {
            "mode": fit.mode.to_dict(),
            "background": fit.background.to_dict(),
            "q_loaded": q_loaded,
            "q_ext": fit.mode.f_res / fit.mode.kappa_ext,
            "residual": fit.residual,
            "conjugated": fit.conjugated,
            "points": len(trace),
        }
