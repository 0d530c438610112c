"""
物理常数与单位换算

常数取固定值 (与 CODATA 2018 精确定义一致):
- h, k_B 精确值
- Φ0 取 2.067833848e-15 Wb
- 所有内部计算使用角频率 (rad/s)，对外接口使用 Hz
"""

import numpy as np

H = 6.62607015e-34          # 普朗克常数 J·s
HBAR = H / (2 * np.pi)      # 约化普朗克常数
K_B = 1.380649e-23          # 玻尔兹曼常数 J/K
PHI0 = 2.067833848e-15      # 磁通量子 Wb
C_LIGHT = 299792458.0       # 真空光速 m/s

# dBm 转换时的下限，避免 log10(0)
DBM_FLOOR = -200.0


def dbm_to_watts(p_dbm):
    """dBm → W, P = 10^((dBm−30)/10)"""
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(p_w, floor_dbm: float = DBM_FLOOR):
    """W → dBm，非正功率截断到 floor_dbm"""
    p = np.asarray(p_w, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 10.0 * np.log10(p) + 30.0
    out = np.where(np.isfinite(out) & (p > 0), out, floor_dbm)
    return np.maximum(out, floor_dbm) if out.ndim else float(max(out, floor_dbm))


def db_to_linear(x_db):
    """功率 dB → 线性比值"""
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    """线性功率比值 → dB"""
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def hz_to_rad(f_hz):
    return 2 * np.pi * np.asarray(f_hz, dtype=float)


def rad_to_hz(omega):
    return np.asarray(omega, dtype=float) / (2 * np.pi)
