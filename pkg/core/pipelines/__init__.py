"""
子命令流水线

每个子命令对应一个 BasePipeline 子类，通过 get_pipeline_registry() 查找。
"""

from core.pipelines.base_pipeline import BasePipeline, RunContext
from core.pipelines.pipeline_registry import PipelineRegistry, get_pipeline_registry

__all__ = ["BasePipeline", "RunContext", "PipelineRegistry", "get_pipeline_registry"]
