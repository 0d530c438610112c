"""
工具模块 - WJPA 工具箱辅助功能

包含:
- config: 配置管理 (TOML/JSON)
- data_storage: 数据读写与复现记录
- logger: 日志配置
"""

__version__ = "1.0.0"
__author__ = "WJPA Toolkit Team"
