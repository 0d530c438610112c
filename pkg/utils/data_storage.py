"""
数据持久化模块

负责分析结果与测量数据的读写:
- JSON 结果 (带版本信封，原子写入)
- CSV 表格 (pandas，固定浮点格式)
- 复现记录 run_record.json (输入文件 sha256、种子、版本)
- VNA 迹线、VTS 数据集、Ramsey 条纹、功率序列与频谱的读取
"""

import hashlib
import json
import math
import shutil
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from core import __version__
from core.circuit import ComplexTrace
from core.constants import db_to_linear, dbm_to_watts, linear_to_db
from core.errors import DataFormatError, InputFileMissing, ValidationError
from core.noisecal import VTSSweepDataset
from core.qubitcal import RamseyFringe, Spectrum

FORMAT_VERSION = "1.0"
FLOAT_FORMAT = "%.12g"

PathLike = Union[str, Path]


def _sanitize(value: Any) -> Any:
    """转换为可 JSON 序列化的结构，nan/inf 写为 null"""
    if isinstance(value, dict):
        return {str(k): _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_sanitize(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return value.as_posix()
    return value


def file_sha256(path: PathLike) -> str:
    """文件内容的 sha256"""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _require(path: PathLike) -> Path:
    path = Path(path)
    if not path.exists():
        raise InputFileMissing(f"输入文件不存在: {path}", {"path": str(path)})
    return path


class DataStorage:
    """输出目录下的数据存储管理器"""

    def __init__(self, out_dir: PathLike):
        """初始化数据存储

        Args:
            out_dir: 输出目录 (不存在时创建)
        """
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs: List[str] = []
        self._protected: set = set()

    def protect(self, path: PathLike) -> None:
        """登记输入文件，输出不得覆盖它"""
        self._protected.add(Path(path).resolve())

    def _atomic_write(self, name: str, text: str) -> Path:
        """写入临时文件后原子替换"""
        target = self.out_dir / name
        if target.resolve() in self._protected:
            raise ValidationError(f"输出会覆盖输入文件: {target}", {"path": str(target)})
        target.parent.mkdir(parents=True, exist_ok=True)
        temp_file = target.with_suffix(target.suffix + '.tmp')
        try:
            with open(temp_file, 'w', encoding='utf-8', newline='\n') as f:
                f.write(text)
            shutil.move(str(temp_file), str(target))
        except OSError:
            # 清理临时文件
            if temp_file.exists():
                try:
                    temp_file.unlink()
                except OSError:
                    pass
            raise
        rel = Path(name).as_posix()
        if rel not in self.outputs:
            self.outputs.append(rel)
        return target

    def write_json(self, name: str, kind: str, data: Any) -> Path:
        """保存 JSON 结果 (版本信封 + 排序键)"""
        payload = {
            "format_version": FORMAT_VERSION,
            "kind": kind,
            "data": _sanitize(data),
        }
        text = json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n"
        return self._atomic_write(name, text)

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        """保存 CSV 表格"""
        text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return self._atomic_write(name, text)

    def write_table(self, stem: str, kind: str, frame: pd.DataFrame, fmt: str = "csv") -> Path:
        """按输出格式保存表格 (csv，或 json 记录列表)"""
        if fmt == "json":
            return self.write_json(f"{stem}.json", kind, frame.to_dict(orient="records"))
        return self.write_csv(f"{stem}.csv", frame)

    def write_run_record(self, command: str, seed: Optional[int], inputs: Iterable[PathLike],
                         parameters: Dict[str, Any]) -> Path:
        """写入复现记录 (除 created_at 外，相同输入与参数逐字节一致)"""
        record = {
            "command": command,
            "version": __version__,
            "seed": seed,
            "inputs": {Path(p).as_posix(): file_sha256(p) for p in sorted(str(i) for i in inputs)},
            "parameters": parameters,
            "outputs": sorted(self.outputs),
            "created_at": datetime.now().isoformat(timespec="seconds"),
        }
        return self.write_json("run_record.json", "run_record", record)

    def write_error(self, payload: Dict[str, Any]) -> Path:
        """error.json 直接写出，不加版本信封"""
        text = json.dumps(_sanitize(payload), indent=2, ensure_ascii=False, sort_keys=True) + "\n"
        return self._atomic_write("error.json", text)

    # ------------------------------------------------------------------
    # 合成数据写出 (格式与下方读取函数一致)

    def write_trace(self, name: str, trace: ComplexTrace) -> Path:
        return self.write_csv(name, trace.to_frame())

    def write_vts_dataset(self, subdir: str, dataset: VTSSweepDataset) -> Path:
        """写出 VTS 数据集目录 (manifest.json + 每个温度一对 CSV)"""
        files = []
        for i, temp in enumerate(dataset.temps):
            noise_name = f"noise_T{temp:g}.csv"
            gain_name = f"gain_T{temp:g}.csv"
            self.write_csv(f"{subdir}/{noise_name}", pd.DataFrame({
                "freq_hz": dataset.freqs, "p_w": dataset.noise_spectra[i]}))
            self.write_csv(f"{subdir}/{gain_name}", pd.DataFrame({
                "freq_hz": dataset.freqs, "gain_db": linear_to_db(dataset.gain_traces[i])}))
            files.append({"temp_k": float(temp), "noise": noise_name, "gain": gain_name})
        return self.write_json(f"{subdir}/manifest.json", "vts_manifest", {
            "temps_k": dataset.temps,
            "pump_freq_hz": dataset.pump_freq_hz,
            "rbw_hz": dataset.rbw_hz,
            "n_rest": dataset.n_rest,
            "files": files,
        })

    def write_power_series(self, subdir: str, powers_dbm: List[float],
                           fringes: List[RamseyFringe]) -> Path:
        """写出功率序列清单与各功率下的条纹 CSV"""
        entries = []
        for i, (p_dbm, fringe) in enumerate(zip(powers_dbm, fringes)):
            name = f"fringe_{i:03d}.csv"
            self.write_csv(f"{subdir}/{name}", fringe.to_frame())
            entries.append({"p_rt_dbm": float(p_dbm), "fringe_file": name})
        return self.write_json(f"{subdir}/series.json", "power_series", entries)

    def write_spectrum(self, name: str, spectrum: Spectrum) -> Path:
        return self.write_csv(name, spectrum.to_frame())


# ---------------------------------------------------------------------------
# 读取

def _read_csv(path: PathLike) -> pd.DataFrame:
    path = _require(path)
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataFormatError(f"CSV 解析失败: {path}: {e}", {"path": str(path)})
    frame.columns = [str(c).strip().lower() for c in frame.columns]
    return frame


def _columns(frame: pd.DataFrame, path: PathLike, *names: str) -> List[np.ndarray]:
    missing = [n for n in names if n not in frame.columns]
    if missing:
        raise DataFormatError(f"{path}: 缺少列 {missing}", {"columns": list(frame.columns)})
    try:
        return [frame[n].to_numpy(dtype=float) for n in names]
    except ValueError as e:
        raise DataFormatError(f"{path}: 非数值数据: {e}", {"path": str(path)})


def read_json(path: PathLike) -> Tuple[Optional[str], Any]:
    """读取 JSON，返回 (kind, data)；兼容不带信封的文件"""
    path = _require(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"JSON 解析失败: {path}: {e}", {"path": str(path)})
    if isinstance(payload, dict) and "format_version" in payload and "data" in payload:
        return payload.get("kind"), payload["data"]
    return None, payload


def read_trace(path: PathLike, kind: str = "reflection") -> ComplexTrace:
    """读取复数迹线，按表头识别 freq_hz,re,im 或 freq_hz,mag_db,phase_deg"""
    frame = _read_csv(path)
    if {"re", "im"} <= set(frame.columns):
        freqs, re, im = _columns(frame, path, "freq_hz", "re", "im")
        values = re + 1j * im
    elif {"mag_db", "phase_deg"} <= set(frame.columns):
        freqs, mag_db, phase = _columns(frame, path, "freq_hz", "mag_db", "phase_deg")
        values = 10 ** (mag_db / 20) * np.exp(1j * np.radians(phase))
    else:
        raise DataFormatError(f"{path}: 无法识别的迹线表头", {"columns": list(frame.columns)})
    return ComplexTrace(freqs=freqs, values=values, kind=kind)


def _power_column(frame: pd.DataFrame, path: PathLike) -> np.ndarray:
    if "p_w" in frame.columns:
        return _columns(frame, path, "p_w")[0]
    if "p_dbm" in frame.columns:
        return dbm_to_watts(_columns(frame, path, "p_dbm")[0])
    raise DataFormatError(f"{path}: 需要 p_w 或 p_dbm 列", {"columns": list(frame.columns)})


def read_vts_dataset(directory: PathLike) -> VTSSweepDataset:
    """读取 VTS 数据集目录 (manifest.json + noise_T<K>.csv / gain_T<K>.csv)"""
    directory = _require(directory)
    _, manifest = read_json(directory / "manifest.json")
    if not isinstance(manifest, dict):
        raise DataFormatError(f"{directory}: manifest 格式错误")

    files = manifest.get("files")
    if files is None:
        files = [{"temp_k": t, "noise": f"noise_T{float(t):g}.csv", "gain": f"gain_T{float(t):g}.csv"}
                 for t in manifest.get("temps_k", [])]
    if not files:
        raise DataFormatError(f"{directory}: manifest 没有列出任何温度")

    freqs = None
    temps, noise_rows, gain_rows = [], [], []
    for entry in sorted(files, key=lambda e: float(e["temp_k"])):
        noise_path = directory / entry["noise"]
        gain_path = directory / entry["gain"]
        noise = _read_csv(noise_path)
        gain = _read_csv(gain_path)
        f_noise = _columns(noise, noise_path, "freq_hz")[0]
        f_gain, gain_db = _columns(gain, gain_path, "freq_hz", "gain_db")
        if freqs is None:
            freqs = f_noise
        for grid in (f_noise, f_gain):
            if grid.shape != freqs.shape or not np.allclose(grid, freqs, rtol=1e-12, atol=0.0):
                raise DataFormatError(f"{directory}: 各温度的频率网格不一致",
                                      {"temp_k": entry["temp_k"]})
        temps.append(float(entry["temp_k"]))
        noise_rows.append(_power_column(noise, noise_path))
        gain_rows.append(db_to_linear(gain_db))

    pump = manifest.get("pump_freq_hz")
    rbw = manifest.get("rbw_hz")
    n_rest = manifest.get("n_rest")
    return VTSSweepDataset(
        freqs=freqs, temps=temps,
        noise_spectra=np.vstack(noise_rows), gain_traces=np.vstack(gain_rows),
        pump_freq_hz=float(pump) if pump else None,
        rbw_hz=float(rbw) if rbw else None,
        n_rest=float(n_rest) if n_rest is not None else None,
    )


def read_fringe(path: PathLike) -> RamseyFringe:
    """读取 theta_rad,signal"""
    frame = _read_csv(path)
    theta, signal = _columns(frame, path, "theta_rad", "signal")
    return RamseyFringe(theta=theta, signal=signal)


def read_power_series(manifest_path: PathLike) -> List[Tuple[float, RamseyFringe, Path]]:
    """读取功率序列清单 [{p_rt_dbm, fringe_file}]

    Returns:
        (室温驱动功率 W, 条纹, 条纹文件路径) 列表
    """
    manifest_path = Path(manifest_path)
    _, entries = read_json(manifest_path)
    if not isinstance(entries, list) or not entries:
        raise DataFormatError(f"{manifest_path}: 功率序列清单应为非空列表")
    series = []
    for entry in entries:
        try:
            p_w = float(dbm_to_watts(float(entry["p_rt_dbm"])))
            fringe_path = manifest_path.parent / entry["fringe_file"]
        except (KeyError, TypeError, ValueError) as e:
            raise DataFormatError(f"{manifest_path}: 条目格式错误: {e}", {"entry": entry})
        series.append((p_w, read_fringe(fringe_path), fringe_path))
    return series


def read_spectrum(path: PathLike) -> Spectrum:
    """读取 offset_hz,p_dbm 或 offset_hz,p_w"""
    frame = _read_csv(path)
    offsets = _columns(frame, path, "offset_hz")[0]
    return Spectrum(offsets=offsets, power_w=_power_column(frame, path))
