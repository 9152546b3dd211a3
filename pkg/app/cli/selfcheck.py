import argparse

from app.cli.common import emit, global_options
from app.config.settings import AuditSettings
from app.constants.common import EXIT_NUMERICAL, EXIT_OK
from app.services.common.selfcheck_service import SelfCheckService


def add_parser(subparsers):
    parser = subparsers.add_parser("selfcheck", parents=[global_options()], help="运行闭式解与不变量自检")
    parser.set_defaults(handler=cmd_selfcheck)


def cmd_selfcheck(args: argparse.Namespace, config: AuditSettings) -> int:
    report = SelfCheckService.run(config)
    emit(report)
    return EXIT_OK if report.passed else EXIT_NUMERICAL
