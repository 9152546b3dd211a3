import argparse

from app.cli.common import global_options, open_output, read_model
from app.config.settings import AuditSettings
from app.constants.common import EXIT_OK
from app.schemes.sweep import SweepSpec
from app.services.simulation.sweep_service import SweepService


def add_parser(subparsers):
    parser = subparsers.add_parser("sweep", parents=[global_options()], help="按实验描述文件批量模拟并审计")
    parser.add_argument("spec", help="SweepSpec JSON 文件")
    parser.add_argument("--out", help="CSV 路径；覆盖描述文件中的 output，均为空时写 stdout")
    parser.set_defaults(handler=cmd_sweep)


def cmd_sweep(args: argparse.Namespace, config: AuditSettings) -> int:
    """单元失败只记录在 error 列，不改变退出码"""
    sweep = read_model(args.spec, SweepSpec)
    rows = SweepService.run(sweep, config)
    with open_output(args.out or sweep.output) as stream:
        SweepService.write_csv(rows, stream)
    return EXIT_OK
