import argparse

from app.cli.common import emit, global_options
from app.config.settings import AuditSettings
from app.constants.common import EXIT_OK
from app.services.audit.baseline_service import BaselineService


def add_parser(subparsers):
    parser = subparsers.add_parser("baseline", parents=[global_options()], help="多次运行基线（Clopper-Pearson）")
    parser.add_argument("--fp", type=int, required=True, help="假阳性次数")
    parser.add_argument("--fn", type=int, required=True, help="假阴性次数")
    parser.add_argument("--trials0", type=int, required=True, help="比特为 0 的试验次数")
    parser.add_argument("--trials1", type=int, required=True, help="比特为 1 的试验次数")
    parser.add_argument("--confidence", type=float, default=0.95)
    parser.add_argument("--delta", type=float, default=0.0)
    parser.set_defaults(handler=cmd_baseline)


def cmd_baseline(args: argparse.Namespace, config: AuditSettings) -> int:
    report = BaselineService.clopper_pearson_eps(args.fp, args.fn, args.trials0, args.trials1, args.confidence, args.delta)
    emit(report)
    return EXIT_OK
