import argparse
import csv
import logging

from app.cli.common import add_curve_arguments, curve_from_args, global_options, open_output
from app.config.settings import AuditSettings
from app.constants.common import BASEPAIR_CSV_HEADER, EXIT_OK, VK_CSV_HEADER
from app.exceptions import UsageError
from app.services.audit.vk_cache_service import VkCacheService
from app.services.tradeoff.basepair_service import BasePairService
from app.utils.common import format_float


def add_parsers(subparsers):
    vk = subparsers.add_parser("vk", parents=[global_options()], help="导出 v_k 表（CSV）")
    add_curve_arguments(vk)
    vk.add_argument("--n", type=int, required=True)
    vk.add_argument("--r", type=int, required=True)
    vk.add_argument("--out", help="CSV 路径，为空时写 stdout")
    vk.add_argument("--refresh", action="store_true", help="删除已缓存的条目后重新计算")
    vk.set_defaults(handler=cmd_vk)

    dump = subparsers.add_parser("dump-basepair", parents=[global_options()], help="导出基础分布对（CSV）")
    add_curve_arguments(dump)
    dump.add_argument("--rows", type=int, default=1025, help="抽样的网格单元数")
    dump.add_argument("--out", help="CSV 路径，为空时写 stdout")
    dump.set_defaults(handler=cmd_dump_basepair)


def cmd_vk(args: argparse.Namespace, config: AuditSettings) -> int:
    """列：k, v_k, quad_error"""
    if args.n < 1 or not (1 <= args.r <= args.n):
        raise UsageError(f"要求 1 ≤ r ≤ n: n={args.n}, r={args.r}")
    curve = curve_from_args(args, config)
    cache = VkCacheService.from_settings(config)
    try:
        if args.refresh:
            cache.invalidate(curve, args.n, args.r, config)
        table = cache.get_or_compute(curve, args.n, args.r, config)
    finally:
        cache.close()
    with open_output(args.out) as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(VK_CSV_HEADER)
        for k, v, error in zip(table.ks.tolist(), table.v.tolist(), table.quad_error.tolist()):
            writer.writerow([k, format_float(v), format_float(error)])
    logging.info(f"v_k 表已导出: {curve.describe()}, n={args.n}, r={args.r}")
    return EXIT_OK


def cmd_dump_basepair(args: argparse.Namespace, config: AuditSettings) -> int:
    """
    列：y, q_density, score, rank_cdf

    原子非空时最后一行 y = 1，q_density 为原子质量，score 为 inf，rank_cdf 为原子之前的混合质量。
    """
    if args.rows < 2:
        raise UsageError(f"--rows 至少为 2: {args.rows}")
    curve = curve_from_args(args, config)
    pair = BasePairService.build_base_pair(curve, config.grid_size)
    y, density, score, rank = BasePairService.sample_rows(pair, args.rows)
    with open_output(args.out) as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(BASEPAIR_CSV_HEADER)
        for row in zip(y.tolist(), density.tolist(), score.tolist(), rank.tolist()):
            writer.writerow([format_float(value) for value in row])
        if pair.atom_mass > 0.0:
            writer.writerow(["1", format_float(pair.atom_mass), "inf", format_float(pair.rank_table.continuous_mass)])
    return EXIT_OK
