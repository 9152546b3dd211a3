import argparse
import json
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, TextIO

from pydantic import BaseModel, ValidationError

from app.config.settings import AuditSettings
from app.exceptions import UsageError
from app.schemes.curve import CurveFamily, CurveSpec, NullHypothesisFamily
from app.services.tradeoff.curves import TradeoffCurve, build_curve


def global_options() -> argparse.ArgumentParser:
    """所有子命令共享的运行参数"""
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("运行配置")
    group.add_argument("--config", help="JSON 配置文件")
    group.add_argument("--log-level", dest="app_log_level", help="日志级别")
    group.add_argument("--log-dir", help="JSON 日志目录")
    group.add_argument("--cache-dir", help="VkTable 缓存目录")
    group.add_argument("--cache-type", choices=["local", "memory", "none"], help="VkTable 缓存类型")
    group.add_argument("--grid-size", type=int, help="基础分布对网格单元数")
    group.add_argument("--quad-nodes", type=int, help="v_k 求积节点数")
    group.add_argument("--workers", type=int, help="线程池大小")
    return parser


_OVERRIDE_FIELDS = ("app_log_level", "log_dir", "cache_dir", "cache_type", "grid_size", "quad_nodes", "workers")


def load_settings(args: argparse.Namespace) -> AuditSettings:
    """命令行 > 配置文件 > 默认值"""
    overrides: Dict[str, Any] = {name: getattr(args, name, None) for name in _OVERRIDE_FIELDS}
    try:
        return AuditSettings.load(getattr(args, "config", None), overrides)
    except ValidationError as e:
        raise UsageError(f"配置无效: {e}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"读取配置文件失败: {e}") from e


def add_curve_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--family", required=True, choices=[f.value for f in CurveFamily], help="曲线族")
    parser.add_argument("--mu", type=float, help="GDP / Laplace / 子采样高斯的 μ")
    parser.add_argument("--eps", type=float, help="(ε,δ) 族的 ε")
    parser.add_argument("--delta", type=float, help="(ε,δ) 族的 δ")
    parser.add_argument("--q", type=float, help="子采样率")


def curve_from_args(args: argparse.Namespace, config: AuditSettings) -> TradeoffCurve:
    try:
        spec = CurveSpec(family=args.family, mu=args.mu, eps=args.eps, delta=args.delta, q=args.q)
    except ValidationError as e:
        raise UsageError(f"曲线参数无效: {e}") from e
    return build_curve(spec, config.subsampled_grid_size)


def family_from_args(family: Optional[str], delta: Optional[float], q: Optional[float]) -> Optional[NullHypothesisFamily]:
    if family is None:
        return None
    try:
        return NullHypothesisFamily(family=family, delta=delta, q=q)
    except ValidationError as e:
        raise UsageError(f"零假设族参数无效: {e}") from e


def read_model(path: str, model: type) -> Any:
    """读取 JSON 文件并按 pydantic 模型校验"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"读取文件失败: {path}: {e}") from e
    try:
        return model.model_validate_json(text)
    except ValidationError as e:
        raise UsageError(f"文件格式无效: {path}: {e}") from e


@contextmanager
def open_output(path: Optional[str]) -> Iterator[TextIO]:
    """path 为空或 "-" 时写 stdout"""
    if not path or path == "-":
        yield sys.stdout
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="") as f:
        yield f


def emit(model: BaseModel, path: Optional[str] = None):
    with open_output(path) as stream:
        stream.write(model.model_dump_json(indent=2))
        stream.write("\n")
