import logging
import sys
import os
from datetime import datetime
from typing import Optional
from colorama import init, Fore, Style
from pythonjsonlogger import jsonlogger

# 初始化 colorama
init(autoreset=True)

LEVEL_MAPPING = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}


class ColoredFormatter(logging.Formatter):
    """控制台格式器：时间 | 级别 | 线程 | 模块:函数:行号 - 消息；非终端输出时不着色"""

    LEVEL_COLORS = {
        "DEBUG": Fore.BLUE,
        "INFO": Fore.GREEN,
        "WARNING": Fore.YELLOW,
        "ERROR": Fore.RED,
        "CRITICAL": Fore.MAGENTA,
    }

    def __init__(self, use_color: bool = True):
        super().__init__()
        self.use_color = use_color

    def _paint(self, text: str, color: str) -> str:
        return f"{color}{text}{Style.RESET_ALL}" if self.use_color else text

    @staticmethod
    def _module_path(record: logging.LogRecord) -> str:
        try:
            pathname = os.path.relpath(record.pathname)
        except ValueError:
            pathname = record.pathname
        if pathname.endswith('.py'):
            pathname = pathname[:-3]
        return pathname.replace(os.sep, '.')

    def format(self, record):
        timestamp = self.formatTime(record, "%Y-%m-%d %H:%M:%S")
        level = self._paint(f"{record.levelname:8}", self.LEVEL_COLORS.get(record.levelname, Style.RESET_ALL))
        # 线程池中的任务（v_k 分块、探测点、实验单元）以线程名区分
        thread = "" if record.threadName == "MainThread" else f"[{record.threadName}] "
        location = self._paint(f"{self._module_path(record)}:{record.funcName}:{record.lineno}", Fore.CYAN)
        line = f"{self._paint(timestamp, Fore.GREEN)} | {level} | {thread}{location} - {record.getMessage()}"
        if record.exc_info:
            line = f"{line}\n{self.formatException(record.exc_info)}"
        return line


def setup_logging(level: str = "INFO", log_dir: Optional[str] = None):
    """
    初始化日志系统

    控制台输出到 stderr（stdout 留给 JSON/CSV 结果），
    指定 log_dir 时额外写入 JSON 行格式的日志文件。

    Args:
        level: 日志级别
        log_dir: JSON 日志目录（可选）
    """
    log_level = LEVEL_MAPPING.get(level.upper(), logging.INFO)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # 清理默认 Handler
    root_logger.handlers.clear()

    # 控制台 Handler（带颜色）
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(ColoredFormatter(use_color=sys.stderr.isatty()))
    root_logger.addHandler(console_handler)

    # 文件 Handler（JSON 行）
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.FileHandler(
            os.path.join(log_dir, f"audit_{datetime.now().strftime('%Y%m%d')}.log"),
            encoding='utf-8'
        )
        file_handler.setLevel(log_level)
        file_handler.setFormatter(jsonlogger.JsonFormatter(
            "%(asctime)s %(levelname)s %(threadName)s %(pathname)s %(funcName)s %(lineno)d %(message)s"
        ))
        root_logger.addHandler(file_handler)
