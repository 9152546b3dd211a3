import argparse
import logging
import sys
from typing import List, Optional

from app.cli import register
from app.cli.common import load_settings
from app.config.settings import APP_DESCRIPTION, APP_NAME, APP_VERSION
from app.constants.common import EXIT_NUMERICAL, EXIT_USAGE
from app.exceptions import AuditException
from app.logger import setup_logging


class AuditArgumentParser(argparse.ArgumentParser):
    """用法错误以退出码 1 结束"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: 错误: {message}\n")


#==================================
# 命令行解析器
#==================================
def build_parser() -> argparse.ArgumentParser:
    parser = AuditArgumentParser(prog="privacy-audit", description=APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    register(subparsers)
    return parser


#==================================
# 入口
#==================================
def main(argv: Optional[List[str]] = None) -> int:
    """
    解析参数、加载配置并执行子命令

    结果（JSON / CSV）写 stdout，日志写 stderr；返回进程退出码。
    """
    args = build_parser().parse_args(argv)
    try:
        config = load_settings(args)
        setup_logging(config.app_log_level, config.log_dir)
        logging.debug(f"{APP_NAME} v{APP_VERSION} 执行 {args.command}")
        return args.handler(args, config)
    except AuditException as e:
        logging.error(f"{args.command} 失败: {e.detail}")
        return e.exit_code
    except Exception as e:
        logging.exception(f"{args.command} 异常终止: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
