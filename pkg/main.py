#!/usr/bin/env python3
"""
WJPA Toolkit - 无线约瑟夫森参量放大器设计与标定工具箱
命令行入口

功能:
- 解析子命令与通用参数
- 加载配置文件并应用命令行覆盖
- 运行对应流水线，写出结果与复现记录
- 出错时输出机器可读的 error.json

作者: WJPA Toolkit Team
版本: 1.0.0
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

# 添加项目根目录到Python路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from core import __version__  # noqa: E402
from core.errors import InputFileMissing, WJPAError  # noqa: E402
from core.pipelines import RunContext, get_pipeline_registry  # noqa: E402
from utils.config import load_config  # noqa: E402
from utils.data_storage import DataStorage  # noqa: E402
from utils.logger import LEVELS, setup_logging  # noqa: E402

logger = logging.getLogger(__name__)

# 通用参数 dest -> 配置键
COMMON_OVERRIDES = {
    "out_dir": "output.dir",
    "seed": "app.seed",
    "format": "app.format",
    "log_level": "app.log_level",
    "workers": "app.workers",
    "progress": "app.progress",
}


def build_parser() -> argparse.ArgumentParser:
    """构建命令行解析器 (通用参数在子命令之后给出)"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="配置文件 (TOML 或 JSON)")
    common.add_argument("--out-dir", dest="out_dir", help="输出目录 (缺省取 WJPA_OUT_DIR)")
    common.add_argument("--seed", type=int, help="随机种子")
    common.add_argument("--format", choices=["csv", "json"], help="表格输出格式")
    common.add_argument("--log-level", dest="log_level", choices=LEVELS, help="日志级别")
    common.add_argument("--workers", type=int, help="逐频点计算的线程数")
    common.add_argument("--progress", action="store_true", default=None, help="显示进度条")

    parser = argparse.ArgumentParser(prog="wjpa", description="WJPA 设计与标定工具箱")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for pipeline in get_pipeline_registry().all():
        sub = subparsers.add_parser(pipeline.name, help=pipeline.help, parents=[common])
        pipeline.add_arguments(sub)
    return parser


class WJPAToolkit:
    """单次命令行运行"""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.command = args.command
        self.pipeline = get_pipeline_registry().get(self.command)
        self.out_dir: Optional[Path] = Path(args.out_dir) if args.out_dir else None

    def run(self) -> int:
        """执行子命令，返回退出码"""
        try:
            return self._run()
        except WJPAError as e:
            logger.error(f"[ERROR] {e.code}: {e.message}")
            self._report_error(e.to_dict())
            return 2 if isinstance(e, InputFileMissing) else 1
        except Exception as e:
            logger.exception("[ERROR] 未预期的错误")
            self._report_error({"error": "internal_error", "message": str(e), "details": {}})
            return 1

    def _run(self) -> int:
        config = load_config(self.args.config)
        for dest, key_path in COMMON_OVERRIDES.items():
            value = getattr(self.args, dest, None)
            if value is not None:
                config.set(key_path, value)
        self.pipeline.apply_overrides(self.args, config)

        log_file = config.get("app.log_file") or None
        setup_logging(config.get("app.log_level", "INFO"), log_file)
        self.out_dir = config.get_output_dir()

        storage = DataStorage(self.out_dir)
        ctx = RunContext(
            command=self.command,
            config=config,
            storage=storage,
            seed=int(config.get("app.seed", 1)),
            fmt=config.get("app.format", "csv"),
            workers=int(config.get("app.workers", 1)),
            progress=bool(config.get("app.progress", False)),
        )
        if self.args.config:
            ctx.add_input(Path(self.args.config))

        logger.info(f"[INFO] 运行 {self.command} -> {self.out_dir}")
        summary = self.pipeline.run(ctx)
        storage.write_json(f"{self.command}_summary.json", f"{self.command}_summary", summary)

        parameters = {"app": {k: config.get(f"app.{k}") for k in ("seed", "format")}}
        parameters.update(self.pipeline.parameters(config))
        storage.write_run_record(self.command, ctx.seed, ctx.inputs, parameters)

        print(json.dumps({"command": self.command, "out_dir": self.out_dir.as_posix(),
                          "outputs": sorted(storage.outputs)}, ensure_ascii=False))
        logger.info(f"[OK] {self.command} 完成，输出 {len(storage.outputs)} 个文件")
        return 0

    def _report_error(self, payload: dict) -> None:
        payload = {**payload, "command": self.command}
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True, default=str))
        if self.out_dir is None:
            return
        try:
            DataStorage(self.out_dir).write_error(payload)
        except OSError as e:
            logger.warning(f"[WARNING] 无法写入 error.json: {e}")


def main(argv: Optional[List[str]] = None) -> int:
    """主函数"""
    args = build_parser().parse_args(argv)
    setup_logging("INFO")
    return WJPAToolkit(args).run()


if __name__ == "__main__":
    sys.exit(main())
