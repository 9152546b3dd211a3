import base64
import math
import os
from pathlib import Path
import tomllib
import numpy as np

DEFAULT_META = {
    "name": "one-run-privacy-audit",
    "version": "0.1.0",
    "description": "One-run differential privacy audit",
}


def get_project_meta() -> dict:
    """从 pyproject.toml 读取项目元数据"""
    try:
        toml_path = Path(get_project_base_directory()) / "pyproject.toml"
        if not toml_path.exists():
            return dict(DEFAULT_META)

        with open(toml_path, "rb") as f:
            data = tomllib.load(f)
        poetry = data.get("tool", {}).get("poetry", {})
        return {key: poetry.get(key, value) for key, value in DEFAULT_META.items()}
    except Exception:
        # 读取失败时返回默认值
        return dict(DEFAULT_META)


def get_project_base_directory() -> str:
    """获取项目根目录（向上查找包含 pyproject.toml 的目录）"""
    current_dir = os.path.dirname(os.path.abspath(__file__))
    project_root = current_dir
    while project_root != os.path.dirname(project_root):
        if os.path.exists(os.path.join(project_root, "pyproject.toml")):
            return project_root
        project_root = os.path.dirname(project_root)
    return os.path.dirname(os.path.dirname(current_dir))


def format_float(value: float) -> str:
    """CSV 浮点格式：17 位有效数字，无穷记为 inf"""
    if value is None:
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return "{:.17g}".format(value)


def pack_bits(bits: np.ndarray) -> str:
    """0/1 数组 → base64 编码的打包位串（高位在前）"""
    packed = np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="big")
    return base64.b64encode(packed.tobytes()).decode("ascii")


def unpack_bits(encoded: str, length: int) -> np.ndarray:
    """base64 位串 → 长度为 length 的 uint8 0/1 数组"""
    raw = np.frombuffer(base64.b64decode(encoded.encode("ascii"), validate=True), dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="big")
    if bits.size < length or bits.size - length >= 8:
        raise ValueError(f"位串长度不匹配: 解码 {bits.size} 位, 期望 {length}")
    return bits[:length].copy()


def round_param(value: float, digits: int = 6) -> float:
    """族参数取整：绝对值不小于 1 时保留 digits 位小数，否则保留 digits 位有效数字（小参数不会被舍成 0）"""
    if value == 0.0 or abs(value) >= 1.0:
        return round(value, digits)
    return float(f"{value:.{digits}g}")
