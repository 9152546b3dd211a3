import json
import logging

from app.logger import ColoredFormatter, setup_logging


def test_json_log_file(tmp_path, restore_root_logger):
    setup_logging("debug", str(tmp_path))
    logging.debug("v_k 表完成")
    for handler in logging.getLogger().handlers:
        handler.flush()
    files = list(tmp_path.glob("audit_*.log"))
    assert len(files) == 1
    record = json.loads(files[0].read_text(encoding="utf-8").splitlines()[-1])
    assert record["message"] == "v_k 表完成"
    assert record["levelname"] == "DEBUG"
    assert record["threadName"] == "MainThread"


def test_unknown_level_falls_back_to_info(restore_root_logger):
    setup_logging("verbose")
    assert logging.getLogger().level == logging.INFO


def test_plain_console_format():
    record = logging.LogRecord("app", logging.WARNING, "app/services/x.py", 7, "p 值不单调", None, None, func="search")
    record.threadName = "ThreadPoolExecutor-0_1"
    line = ColoredFormatter(use_color=False).format(record)
    assert "\x1b[" not in line
    assert "| WARNING  | [ThreadPoolExecutor-0_1] " in line
    assert line.endswith(":search:7 - p 值不单调")
