from app.cli import audit, baseline, selfcheck, simulate, sweep, tables


def register(subparsers):
    """注册全部子命令"""
    simulate.add_parser(subparsers)
    audit.add_parser(subparsers)
    tables.add_parsers(subparsers)
    sweep.add_parser(subparsers)
    selfcheck.add_parser(subparsers)
    baseline.add_parser(subparsers)
