"""Y 因子噪声标定: 读取 VTS 数据集目录，逐频点回归得到 N_add 谱"""

import logging
from collections import Counter
from typing import Any, Dict, Optional, Tuple

import numpy as np

from core.noisecal import PipelineOptions, VTSSweepDataset, yfactor_pipeline
from core.pipelines.base_pipeline import BasePipeline, RunContext
from utils.data_storage import read_vts_dataset

logger = logging.getLogger(__name__)


class YFactorPipeline(BasePipeline):
    overrides = {
        "input": "yfactor.input",
        "guard_bins": "yfactor.guard_bins",
        "correction": "yfactor.correction",
        "n_rest": "yfactor.n_rest",
        "weighted": "yfactor.weighted",
    }

    @property
    def name(self) -> str:
        return "yfactor"

    @property
    def help(self) -> str:
        return "VTS Y 因子法提取附加噪声 N_add"

    def add_arguments(self, parser):
        parser.add_argument("--input", help="VTS 数据集目录 (含 manifest.json)")
        parser.add_argument("--guard-bins", dest="guard_bins", type=int, help="泵浦两侧屏蔽的频点数")
        parser.add_argument("--correction", choices=["auto", "none", "mean", "per_point"],
                            help="后级噪声修正方式 (auto: 已知 N_rest 时逐点修正)")
        parser.add_argument("--n-rest", dest="n_rest", type=float,
                            help="后级噪声 (光子)，缺省取数据集 manifest 中的记录")
        parser.add_argument("--weighted", action="store_true", default=None, help="方差加权回归")
        parser.add_argument("--wjpa-off", dest="wjpa_off", action="store_true", default=None,
                            help="WJPA 关闭时的链路标定 (无闲频带)")

    def apply_overrides(self, args, config):
        super().apply_overrides(args, config)
        if getattr(args, "wjpa_off", None):
            config.set("yfactor.idler_band", False)

    @staticmethod
    def resolve_correction(correction: str, configured_n_rest: float, dataset: VTSSweepDataset,
                           idler_band: bool) -> Tuple[str, Optional[float]]:
        """确定实际使用的修正方式与 N_rest

        配置中 n_rest 为 0 表示未设置，此时取数据集记录值。auto 仅在双边带
        (WJPA 开启) 且 N_rest 已知时使用 per_point，否则不修正。
        """
        n_rest = configured_n_rest if configured_n_rest > 0 else dataset.n_rest
        if correction == "auto":
            correction = "per_point" if idler_band and n_rest is not None else "none"
        return correction, (n_rest if correction != "none" else None)

    def run(self, ctx: RunContext) -> Dict[str, Any]:
        section = ctx.config.get_section("yfactor")
        directory = ctx.require_input("yfactor.input")
        for path in sorted(directory.glob("*.csv")) + [directory / "manifest.json"]:
            ctx.add_input(path)
        dataset = read_vts_dataset(directory)

        idler_band = bool(section["idler_band"])
        correction, n_rest = self.resolve_correction(
            section["correction"], float(section["n_rest"] or 0.0), dataset, idler_band)
        if n_rest is not None:
            logger.info(f"[INFO] 后级噪声修正: {correction}, N_rest={n_rest:.4g}")
        result = yfactor_pipeline(dataset, PipelineOptions(
            guard_bins=int(section["guard_bins"]),
            correction=correction,
            n_rest=n_rest,
            weighted=bool(section["weighted"]),
            idler_band=idler_band,
            workers=ctx.workers,
            progress=ctx.progress,
        ))
        ctx.write_table("noise_spectrum", "noise_spectrum", result.to_frame())

        r2_threshold = float(section["r2_threshold"])
        n_add = result.band_mean(r2_threshold)
        logger.info(f"[OK] 频带平均 N_add={n_add:.4f}")
        return {
            "n_add": n_add,
            "n_add_std": float(np.nanstd(result.n_add[result.valid])) if np.any(result.valid) else None,
            "r2_threshold": r2_threshold,
            "correction": correction,
            "n_rest_used": n_rest,
            "temps_k": dataset.temps,
            "frequencies": int(dataset.freqs.size),
            "status_counts": dict(sorted(Counter(result.status).items())),
        }
