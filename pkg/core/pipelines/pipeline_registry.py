"""
流水线注册表

负责管理所有子命令流水线:
- 注册与按名查找
- 按注册顺序列出 (决定命令行帮助中的顺序)
"""

from typing import Dict, List, Optional

from core.pipelines.base_pipeline import BasePipeline
from core.pipelines.circuit_pipeline import CircuitPipeline
from core.pipelines.fit_pipeline import FitPipeline
from core.pipelines.fluxmap_pipeline import FluxMapPipeline
from core.pipelines.gain_pipeline import GainPipeline
from core.pipelines.starkcal_pipeline import StarkCalPipeline
from core.pipelines.synth_pipeline import SynthPipeline
from core.pipelines.taper_pipeline import TaperPipeline
from core.pipelines.yfactor_pipeline import YFactorPipeline


class PipelineRegistry:
    """流水线注册表"""

    def __init__(self):
        self._pipelines: Dict[str, BasePipeline] = {}
        self._register_default_pipelines()

    def _register_default_pipelines(self):
        for pipeline in (TaperPipeline(), CircuitPipeline(), FitPipeline(), FluxMapPipeline(),
                         GainPipeline(), YFactorPipeline(), StarkCalPipeline(), SynthPipeline()):
            self.register(pipeline)

    def register(self, pipeline: BasePipeline) -> None:
        """注册流水线 (同名覆盖)"""
        self._pipelines[pipeline.name] = pipeline

    def get(self, name: str) -> Optional[BasePipeline]:
        return self._pipelines.get(name)

    def names(self) -> List[str]:
        return list(self._pipelines)

    def all(self) -> List[BasePipeline]:
        return list(self._pipelines.values())


# 全局注册表实例
_registry: Optional[PipelineRegistry] = None


def get_pipeline_registry() -> PipelineRegistry:
    """获取全局流水线注册表"""
    global _registry
    if _registry is None:
        _registry = PipelineRegistry()
    return _registry
