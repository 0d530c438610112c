"""
配置管理模块

负责管理工具箱的配置信息，包括:
- 器件参数 (带单位后缀的键名)
- 各子命令的扫描/拟合参数
- 合成场景参数
- 输出与日志设置

配置文件支持 TOML 与 JSON，递归合并到默认配置之上；命令行参数优先于文件。
"""

import copy
import json
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Optional, Union

from core.errors import DataFormatError, InputFileMissing

OUT_DIR_ENV = "WJPA_OUT_DIR"


class Config:
    """配置管理器"""

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.app_name = "WJPA Toolkit"
        self.config_path: Optional[Path] = None

        # 默认配置
        self.default_config = {
            "app": {
                "version": "1.0.0",
                "log_level": "INFO",
                "log_file": "",
                "seed": 1,
                "format": "csv",
                "workers": 1,
                "progress": False
            },
            "device": {
                "l_j0_pH": 120.0,
                "c_j_fF": 220.0,
                "c_s_fF": 220.0,
                "c_c_fF": 18.0,
                "z_slot_ohm": 110.0,
                "stub_length_mm": 1.3,
                "eff_index": 2.74535,  # 1.3 mm 在 21 GHz 为四分之一波长
                "port_impedance_ohm": 0.0,  # 0 表示取 z_slot_ohm
                "shunt_conductance_s": 0.0,
                "stub_enabled": True,
                "parasitic": {
                    "enabled": False,
                    "f_hz": 19.5e9,
                    "linewidth_hz": 500e6,
                    "resistance_ohm": 5.0
                }
            },
            "junction": {
                "jc_a_per_cm2": 70.0,
                "c_spec_fF_per_um2": 55.0,
                "area_um2": 4.0
            },
            "taper": {
                "w_a_mm": 4.32,
                "s_um": 200.0,
                "a_mm": 4.5,
                "points": 101
            },
            "circuit": {
                "f_min_hz": 18e9,
                "f_max_hz": 26e9,
                "points": 1601,
                "lj_sweep_pH": [100.0, 110.0, 120.0, 130.0, 140.0, 150.0, 160.0],
                "admittance_input": "",   # 可选: 实测/仿真导纳迹线 CSV (freq_hz,re,im)
                "admittance_f_res_hz": 0.0  # 0 表示取迹线中 Im(Y) 的首个上升过零点
            },
            "fit": {
                "input": "",
                "threshold": 0.1
            },
            "fluxmap": {
                "phi_min": 0.0,
                "phi_max": 0.4,
                "phi_points": 9,
                "points": 801
            },
            "gain": {
                "target_gains_db": [14.0, 17.0, 20.0, 23.0],
                "flux_points": [0.0, 0.1, 0.2],
                "points": 801,
                "span_db": 3.0,
                "slope_points": 7,
                "fixed_pump_gain_span_db": 6.0,  # 固定泵浦频率扫功率时的增益区间
                "series_gain_db": 20.0,
                "branch": "low",
                "f_pump_hz": 0.0,  # 非零时使用显式泵浦 (f_pump_hz, p_pump_dbm)
                "p_pump_dbm": -100.0,
                "p_pump_w": 0.0  # 非零时优先于 p_pump_dbm
            },
            "yfactor": {
                "input": "",
                "guard_bins": 3,
                "correction": "auto",     # auto / none / mean / per_point
                "n_rest": 0.0,            # 0 表示取数据集记录值
                "weighted": False,
                "idler_band": True,
                "r2_threshold": 0.9
            },
            "starkcal": {
                "input": "",
                "f_r_hz": 21.765e9,
                "f_d_hz": 22e9,
                "chi_hz": -1e6,
                "kappa_hz": 20e6,
                "tau_s": 5e-6,
                "rel_tol": 0.05,
                "reference_p_rt_dbm": 0.0,   # 参考输入/输出均非零时计算系统增益
                "reference_p_sa_dbm": 0.0,
                "spectrum": "",
                "r_bw_hz": 4700.0,
                "g_sys_db": 96.8,
                "floor_window_hz": 0.0  # 0 表示用全部频点的中位数作为噪声底
            },
            "synth": {
                "kind": "all",
                "n_add_ex": 1.5,
                "scenario": {
                    "stages": [
                        {"name": "hemt", "gain_db": 40.0, "added_noise": 20.0},
                        {"name": "room_temp", "gain_db": 30.0, "added_noise": 100.0}
                    ],
                    "vts_temps": [0.1, 0.4, 0.7, 1.0, 1.3, 1.75],
                    "radiometer_samples": 1e6,
                    "rbw_hz": 1e6,
                    "pump_freq_hz": 22e9,
                    "gain_bandwidth_hz": 20e6,
                    "wjpa_enabled": True
                },
                "compression": {
                    "g_lo_db": 21.6,
                    "t_lo_k": 0.1,
                    "g_hi_db": 12.9,
                    "t_hi_k": 1.75
                },
                "freq_span_hz": 40e6,
                "freq_points": 201,
                "vna": {
                    "f_res_hz": 22e9,
                    "kappa_ext_hz": 200e6,
                    "kappa_int_hz": 10e6,
                    "snr": 100.0,
                    "points": 801,
                    "span_kappas": 12.0
                },
                "ramsey": {
                    "p_rt_dbm": [-40.0, -38.0, -36.0, -34.0, -32.0, -30.0],
                    "attenuation_db": -80.0,
                    "snr": 100.0,
                    "points": 4096
                },
                "spectrum": {
                    "floor_quanta": 2.3,
                    "tones": [[0.0, 1e6], [2e5, 5e3], [-2e5, 5e3]],
                    "span_hz": 1e6,
                    "points": 1001
                }
            },
            "output": {
                "dir": "wjpa_out"
            }
        }

        self.config = copy.deepcopy(self.default_config)
        if path is not None:
            self.load_file(path)

    def _read_file(self, path: Path) -> Dict[str, Any]:
        """读取 TOML 或 JSON 配置文件"""
        if not path.exists():
            raise InputFileMissing(f"配置文件不存在: {path}", {"path": str(path)})
        try:
            if path.suffix.lower() == ".toml":
                with open(path, 'rb') as f:
                    return tomllib.load(f)
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
            raise DataFormatError(f"配置文件解析失败: {path}: {e}", {"path": str(path)})

    def load_file(self, path: Union[str, Path]) -> None:
        """加载配置文件并合并到当前配置"""
        path = Path(path)
        loaded = self._read_file(path)
        if not isinstance(loaded, dict):
            raise DataFormatError(f"配置文件根对象不是字典: {path}")
        self.config = self._merge_config(self.config, loaded)
        self.config_path = path

    def _merge_config(self, default: Dict[str, Any], loaded: Dict[str, Any]) -> Dict[str, Any]:
        """合并配置，确保所有默认键都存在；文件中多出的键也保留"""
        merged = copy.deepcopy(default)
        for key, value in loaded.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = self._merge_config(merged[key], value)
            else:
                merged[key] = value
        return merged

    def get(self, key_path: str, default: Any = None) -> Any:
        """获取配置值

        Args:
            key_path: 配置键路径，如 'device.l_j0_pH'
            default: 默认值
        """
        keys = key_path.split('.')
        value = self.config

        try:
            for key in keys:
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key_path: str, value: Any) -> None:
        """设置配置值 (命令行覆盖)

        Args:
            key_path: 配置键路径，如 'app.seed'
            value: 要设置的值
        """
        keys = key_path.split('.')
        config = self.config

        # 遍历到最后一级
        for key in keys[:-1]:
            if not isinstance(config.get(key), dict):
                config[key] = {}
            config = config[key]

        config[keys[-1]] = value

    def save(self, path: Union[str, Path]) -> Path:
        """保存当前有效配置 (JSON)"""
        path = Path(path)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.config, f, indent=2, ensure_ascii=False, sort_keys=True)
        return path

    def reset_to_default(self) -> None:
        """重置为默认配置"""
        self.config = copy.deepcopy(self.default_config)
        self.config_path = None

    def get_output_dir(self) -> Path:
        """输出目录: 配置 > 环境变量 WJPA_OUT_DIR > 默认"""
        configured = self.get('output.dir')
        if configured and configured != self.default_config["output"]["dir"]:
            return Path(configured)
        return Path(os.environ.get(OUT_DIR_ENV) or configured)

    def get_device_config(self) -> Dict[str, Any]:
        """获取器件配置"""
        return self.get('device', {})

    def get_section(self, name: str) -> Dict[str, Any]:
        """获取子命令配置段"""
        return self.get(name, {})


# 全局配置实例
config = Config()


def get_config() -> Config:
    """获取全局配置实例"""
    return config


def load_config(path: Optional[Union[str, Path]] = None) -> Config:
    """重置全局配置并加载文件"""
    global config
    config = Config(path)
    return config
