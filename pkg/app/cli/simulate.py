import argparse
import json
import logging

from pydantic import ValidationError

from app.cli.common import global_options, open_output
from app.config.settings import AuditSettings
from app.constants.common import EXIT_OK
from app.exceptions import UsageError
from app.schemes.sweep import resolve_r
from app.schemes.transcript import GuessStrategy, MechanismKind, MechanismSpec
from app.services.audit.auditor_service import AuditorService
from app.services.simulation.mechanism_service import MechanismService


def add_parser(subparsers):
    parser = subparsers.add_parser("simulate", parents=[global_options()], help="模拟机制并生成转录")
    parser.add_argument("--mechanism", required=True, choices=[k.value for k in MechanismKind])
    parser.add_argument("--sigma", type=float, help="高斯噪声标准差")
    parser.add_argument("--c", type=float, help="Laplace 噪声尺度")
    parser.add_argument("--eps", type=float, help="随机响应的 ε")
    parser.add_argument("--delta", type=float, help="随机响应的 δ")
    parser.add_argument("--q", type=float, help="子采样率")
    parser.add_argument("--n", type=int, required=True, help="秘密比特数")
    size = parser.add_mutually_exclusive_group()
    size.add_argument("--r", type=int, help="公布的猜测数")
    size.add_argument("--r-frac", type=float, help="公布比例，r = round(r_frac·n)")
    parser.add_argument("--strategy", choices=[s.value for s in GuessStrategy], default=GuessStrategy.SPECIAL.value)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="转录文件路径，为空时写 stdout")
    parser.set_defaults(handler=cmd_simulate)


def cmd_simulate(args: argparse.Namespace, config: AuditSettings) -> int:
    """
    模拟机制并写出转录文件

    指定 --out 时在 stdout 输出 n、r、u 摘要，否则 stdout 为转录 JSON。
    """
    if args.r_frac is not None and not (0.0 < args.r_frac <= 1.0):
        raise UsageError(f"--r-frac 必须位于 (0,1]: {args.r_frac}")
    if args.n < 1:
        raise UsageError(f"--n 必须为正整数: {args.n}")
    strategy = GuessStrategy(args.strategy)
    r = resolve_r(args.n, strategy, args.r_frac, args.r)
    try:
        spec = MechanismSpec(
            kind=args.mechanism,
            sigma=args.sigma,
            c=args.c,
            eps=args.eps,
            delta=args.delta,
            q=args.q,
            n=args.n,
            r=r,
            seed=args.seed,
            strategy=strategy,
        )
    except ValidationError as e:
        raise UsageError(f"机制参数无效: {e}") from e

    transcript = MechanismService.simulate(spec, config)
    u = AuditorService.count_errors(transcript)
    summary = {"n": transcript.n, "r": transcript.r, "u": u, "accuracy": AuditorService.accuracy(transcript.r, u)}
    logging.info(f"转录摘要: {summary}")

    with open_output(args.out) as stream:
        stream.write(transcript.to_file().model_dump_json())
        stream.write("\n")
    if args.out:
        print(json.dumps({**summary, "out": args.out}))
    return EXIT_OK
