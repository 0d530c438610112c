"""
核心模块 - WJPA 工具箱的物理计算

包含:
- circuit: 器件电路模型、谐振求解、黑箱量子化
- paramp: 反射拟合、磁通映射、泵浦稳态与增益/压缩
- noisecal: Y 因子噪声标定
- qubitcal: 交流 Stark 功率标定与频谱换算
- synth: 可复现的合成测量数据
- pipelines: 命令行子命令流水线
"""

__version__ = "1.0.0"
__author__ = "WJPA Toolkit Team"
