"""
日志配置模块

负责统一的日志输出:
- 根 logger 只配置一次 (stderr)
- 可选写入运行目录下的日志文件
"""

import logging
import sys
from pathlib import Path
from typing import Optional, Union

LOG_FORMAT = '%(asctime)s-%(levelname)s-%(module)s-%(funcName)s: %(message)s'
LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

_configured = False


def setup_logging(level: str = "INFO", log_file: Optional[Union[str, Path]] = None) -> logging.Logger:
    """配置根 logger

    Args:
        level: 日志级别名
        log_file: 可选日志文件路径

    Returns:
        根 logger
    """
    global _configured
    level = level.upper()
    if level not in LEVELS:
        raise ValueError(f"未知的日志级别: {level}")

    root = logging.getLogger()
    if not _configured:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
        _configured = True
    root.setLevel(getattr(logging, level))

    if log_file is not None:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        if not any(isinstance(h, logging.FileHandler) and Path(h.baseFilename) == path.resolve()
                   for h in root.handlers):
            file_handler = logging.FileHandler(path, encoding="utf-8")
            file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
            root.addHandler(file_handler)
    return root
