import argparse

from app.cli.common import emit, family_from_args, global_options, read_model
from app.config.settings import AuditSettings
from app.constants.common import EXIT_OK
from app.exceptions import UsageError
from app.schemes.curve import CurveFamily
from app.schemes.report import AuditReport, TailMethod
from app.schemes.transcript import TranscriptFile
from app.services.audit.auditor_service import AuditorService


def add_parser(subparsers):
    parser = subparsers.add_parser("audit", parents=[global_options()], help="审计转录，输出隐私下界")
    parser.add_argument("transcript", nargs="?", help="转录文件；省略时使用 --n --r --u")
    parser.add_argument("--n", type=int)
    parser.add_argument("--r", type=int)
    parser.add_argument("--u", type=int, help="公布猜测中的错误数")
    parser.add_argument("--family", choices=[f.value for f in CurveFamily], help="零假设族；默认与机制匹配")
    parser.add_argument("--family-delta", type=float, help="(ε,δ) 族的固定 δ")
    parser.add_argument("--q", type=float, help="子采样高斯族的固定 q")
    parser.add_argument("--delta", type=float, help="报告 (ε,δ) 下界时的 δ")
    parser.add_argument("--significance", type=float)
    parser.add_argument("--tail", choices=[m.value for m in TailMethod])
    parser.add_argument("--out", help="报告输出路径，为空时写 stdout")
    parser.set_defaults(handler=cmd_audit)


def cmd_audit(args: argparse.Namespace, config: AuditSettings) -> int:
    auditor = AuditorService(config)
    try:
        report = _run_audit(args, auditor)
    finally:
        auditor.cache.close()
    emit(report, args.out)
    return EXIT_OK


def _run_audit(args: argparse.Namespace, auditor: AuditorService) -> AuditReport:
    tail = TailMethod(args.tail) if args.tail else None
    if args.transcript:
        transcript = read_model(args.transcript, TranscriptFile).to_transcript()
        family_delta = args.family_delta
        if args.family == CurveFamily.EPS_DELTA.value and family_delta is None:
            family_delta = transcript.spec.delta
        family_q = args.q if args.q is not None else transcript.spec.q
        family = family_from_args(args.family, family_delta, family_q)
        return auditor.audit_transcript(transcript, family, args.delta, args.significance, tail)
    if None in (args.n, args.r, args.u) or args.family is None:
        raise UsageError("未提供转录时必须同时指定 --n --r --u --family")
    family = family_from_args(args.family, args.family_delta, args.q)
    return auditor.lower_bound_search(args.n, args.r, args.u, family, args.delta, args.significance, tail)
