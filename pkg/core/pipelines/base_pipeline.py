"""
子命令流水线抽象基类

定义所有子命令流水线的接口规范，包括：
- 子命令名与帮助文本
- 子命令专属的命令行参数及其对应的配置键
- 读取输入、调用物理模块、写出结果
"""

import argparse
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List

from core.circuit import DeviceCircuit
from core.errors import InputFileMissing, ValidationError
from utils.config import Config
from utils.data_storage import DataStorage

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    """一次运行的上下文"""
    command: str
    config: Config
    storage: DataStorage
    seed: int = 1
    fmt: str = "csv"
    workers: int = 1
    progress: bool = False
    inputs: List[Path] = field(default_factory=list)

    def require_input(self, key_path: str) -> Path:
        """按配置键取输入路径，登记到复现记录并禁止输出覆盖

        Raises:
            ValidationError: 未配置输入
            InputFileMissing: 文件不存在
        """
        value = self.config.get(key_path)
        if not value:
            raise ValidationError(f"未指定输入: {key_path}", {"key": key_path})
        path = Path(value)
        if not path.exists():
            raise InputFileMissing(f"输入文件不存在: {path}", {"path": str(path), "key": key_path})
        if path.is_file():
            self.add_input(path)
        return path

    def add_input(self, path: Path) -> None:
        if path not in self.inputs:
            self.inputs.append(path)
            self.storage.protect(path)

    def write_table(self, stem: str, kind: str, frame) -> Path:
        return self.storage.write_table(stem, kind, frame, self.fmt)


class BasePipeline(ABC):
    """子命令流水线抽象基类

    子类实现:
    - name: 子命令名
    - help: 帮助文本
    - add_arguments: 专属参数 (dest 名与 overrides 的键一致)
    - run: 执行并返回写入 <name>_summary.json 的摘要
    """

    # 命令行参数 dest -> 配置键
    overrides: Dict[str, str] = {}

    # 复现记录里记录的配置段
    sections: List[str] = []

    @property
    @abstractmethod
    def name(self) -> str:
        pass

    @property
    @abstractmethod
    def help(self) -> str:
        pass

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        """注册子命令专属参数，缺省无"""

    def apply_overrides(self, args: argparse.Namespace, config: Config) -> None:
        """命令行参数覆盖配置文件的值"""
        for dest, key_path in self.overrides.items():
            value = getattr(args, dest, None)
            if value is not None:
                config.set(key_path, value)

    def parameters(self, config: Config) -> Dict[str, Any]:
        """写入复现记录的有效参数"""
        return {section: config.get_section(section) for section in [self.name, *self.sections]}

    @staticmethod
    def device(config: Config) -> DeviceCircuit:
        return DeviceCircuit.from_config(config.get_device_config())

    @abstractmethod
    def run(self, ctx: RunContext) -> Dict[str, Any]:
        """执行流水线

        Returns:
            摘要字典
        """
