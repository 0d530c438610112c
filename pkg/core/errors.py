"""
异常定义模块

负责工具箱内所有可预期错误的分类:
- 输入校验错误
- 电路奇点 (半磁通量子、短截线谐振)
- 求根/拟合失败
- 放大器工作点不稳定
- 数据文件缺失或格式错误

每个异常带有稳定的 code，CLI 据此生成机器可读的错误 JSON。
"""

from typing import Any, Dict, Optional


class WJPAError(Exception):
    """工具箱错误基类"""

    code = "wjpa_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典 (用于错误 JSON)"""
        return {
            "error": self.code,
            "message": self.message,
            "details": self.details,
        }


class ValidationError(WJPAError, ValueError):
    """输入参数不满足前置条件"""
    code = "validation_error"


class DivergentInductance(WJPAError):
    """SQUID 偏置在半磁通量子附近，电感发散"""
    code = "divergent_inductance"


class OutOfRange(WJPAError):
    """自变量超出定义域"""
    code = "out_of_range"


class StubResonance(WJPAError):
    """恰好落在短路短截线谐振点 (cot 奇点)"""
    code = "stub_resonance"


class NoRootInBracket(WJPAError):
    """区间内没有 Im(Y) 的上升零点"""
    code = "no_root_in_bracket"


class InsufficientSamples(WJPAError):
    """采样点不足以计算中心差分"""
    code = "insufficient_samples"


class NonPositiveSlope(WJPAError):
    """导纳斜率非正，说明选错了谐振分支"""
    code = "non_positive_slope"


class FitDiverged(WJPAError):
    """拟合发散或没有可分辨的谐振"""
    code = "fit_diverged"


class InsufficientSpan(WJPAError):
    """数据跨度不足 (频率跨度或输入噪声跨度)"""
    code = "insufficient_span"


class NoPhysicalRoot(WJPAError):
    """泵浦稳态三次方程没有非负实根 (仅数值失败时出现)"""
    code = "no_physical_root"


class UnstableOperatingPoint(WJPAError):
    """线性化系统存在正实部本征值，超过参量振荡阈值"""
    code = "unstable_operating_point"


class NoCompressionFound(WJPAError):
    """扫描功率范围内增益未压缩 1 dB"""
    code = "no_compression_found"


class InsufficientPoints(WJPAError):
    """回归点数不足"""
    code = "insufficient_points"


class NonPositiveGain(WJPAError):
    """增益轨迹中出现非正值"""
    code = "non_positive_gain"


class LowContrast(WJPAError):
    """Ramsey 条纹幅度低于噪声底"""
    code = "low_contrast"


class NonlinearStark(WJPAError):
    """Stark 位移与驱动功率不再线性 (驱动过强)"""
    code = "nonlinear_stark"


class InputFileMissing(WJPAError):
    """输入文件不存在"""
    code = "input_file_missing"


class DataFormatError(WJPAError):
    """数据文件格式无法识别"""
    code = "data_format_error"


def require_positive(name: str, value: float) -> float:
    """校验参数严格为正

    Args:
        name: 参数名 (写入错误详情)
        value: 参数值

    Returns:
        原值 (float)
    """
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} 必须是数值", {"name": name, "value": repr(value)})
    if not value > 0:
        raise ValidationError(f"{name} 必须为正数: {value}", {"name": name, "value": value})
    return value
