"""
四个隐私族的权衡曲线

每条曲线都是不可变值（frozen dataclass），可在线程间共享。
eval 为向量化实现：标量输入返回 float，数组输入返回 ndarray。
"""
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar, Optional, Tuple, Union

import numpy as np
from scipy.stats import norm

from app.constants.common import QUANTILE_GRID_SPAN
from app.exceptions import DomainError
from app.schemes.curve import CurveFamily, CurveSpec

ArrayLike = Union[float, np.ndarray]


def as_unit_array(x: ArrayLike, name: str = "x") -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} 必须位于 [0,1]")
    return arr, arr.ndim == 0


def restore_shape(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


def _check_nonnegative(name: str, value: float):
    if value is None or not math.isfinite(value) or value < 0:
        raise DomainError(f"参数 {name} 必须为有限非负数: {value}")


def _check_probability(name: str, value: float):
    if value is None or not (0.0 <= value <= 1.0):
        raise DomainError(f"参数 {name} 必须位于 [0,1]: {value}")


@dataclass(frozen=True)
class TradeoffCurve(ABC):
    """权衡函数 f: [0,1] → [0,1]（非增、凸、f(1) = 0）"""

    family: ClassVar[CurveFamily]

    @abstractmethod
    def _eval(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _slopes(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """x ∈ (0,1) 处的左、右导数"""

    @abstractmethod
    def to_spec(self) -> CurveSpec:
        ...

    @property
    @abstractmethod
    def is_perfect(self) -> bool:
        """是否退化为完美隐私曲线 x ↦ 1−x"""

    def _reflected(self, y: np.ndarray) -> np.ndarray:
        return self._eval(1.0 - y)

    def eval(self, x: ArrayLike) -> ArrayLike:
        arr, scalar = as_unit_array(x)
        return restore_shape(np.clip(self._eval(arr), 0.0, 1.0), scalar)

    def reflected(self, y: ArrayLike) -> ArrayLike:
        """R(y) = f(1−y)，在 y → 0 时避免 1−y 的舍入"""
        arr, scalar = as_unit_array(y, "y")
        return restore_shape(np.clip(self._reflected(arr), 0.0, 1.0), scalar)

    def subgradient(self, x: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        """次梯度区间 [左导数, 右导数]；可微点上两端相等"""
        arr, scalar = as_unit_array(x)
        lo, hi = self._slopes(arr)
        return restore_shape(lo, scalar), restore_shape(hi, scalar)

    def q_density(self, y: ArrayLike) -> ArrayLike:
        """Q(y) = −f′(1−y)，不可微点取左右导数平均"""
        arr, scalar = as_unit_array(y, "y")
        lo, hi = self._slopes(1.0 - arr)
        return restore_shape(np.maximum(-0.5 * (lo + hi), 0.0), scalar)

    def log_q_density(self, y: ArrayLike) -> ArrayLike:
        """ln Q(y)；Q(y) = 0 处为 −inf"""
        arr, scalar = as_unit_array(y, "y")
        with np.errstate(divide="ignore"):
            return restore_shape(np.log(self.q_density(arr)), scalar)

    @property
    def f0(self) -> float:
        return float(np.clip(self._eval(np.array(0.0)), 0.0, 1.0))

    @property
    def kinks(self) -> np.ndarray:
        """不可微点（(0,1) 内）"""
        return np.empty(0)

    def describe(self) -> str:
        params = ", ".join(f"{k}={v:g}" for k, v in self.to_spec().model_dump(exclude_none=True, exclude={"family"}).items())
        return f"{self.family.value}({params})"


@dataclass(frozen=True)
class GaussianTradeoff(TradeoffCurve):
    """μ-GDP: G_μ(x) = Φ(Φ⁻¹(1−x) − μ)"""

    mu: float
    family: ClassVar[CurveFamily] = CurveFamily.GDP

    def __post_init__(self):
        _check_nonnegative("mu", self.mu)

    @property
    def is_perfect(self) -> bool:
        return self.mu == 0.0

    def _eval(self, x):
        return norm.cdf(norm.isf(x) - self.mu)

    def _reflected(self, y):
        return norm.cdf(norm.ppf(y) - self.mu)

    def _slopes(self, x):
        with np.errstate(over="ignore"):
            d = -np.exp(self.mu * norm.isf(x) - 0.5 * self.mu ** 2)
        return d, d

    def q_density(self, y):
        arr, scalar = as_unit_array(y, "y")
        with np.errstate(over="ignore"):
            q = np.exp(self.mu * norm.ppf(arr) - 0.5 * self.mu ** 2)
        return restore_shape(q, scalar)

    def log_q_density(self, y):
        arr, scalar = as_unit_array(y, "y")
        if self.mu == 0.0:
            return restore_shape(np.zeros_like(arr), scalar)
        return restore_shape(self.mu * norm.ppf(arr) - 0.5 * self.mu ** 2, scalar)

    def to_spec(self) -> CurveSpec:
        return CurveSpec(family=self.family, mu=self.mu)


@dataclass(frozen=True)
class LaplaceTradeoff(TradeoffCurve):
    """区分 Lap(0,1) 与 Lap(μ,1) 的权衡函数（分三段，处处可微）"""

    mu: float
    family: ClassVar[CurveFamily] = CurveFamily.LAPLACE

    def __post_init__(self):
        _check_nonnegative("mu", self.mu)

    @property
    def is_perfect(self) -> bool:
        return self.mu == 0.0

    def _eval(self, x):
        e = math.exp(-self.mu)
        with np.errstate(divide="ignore", invalid="ignore"):
            middle = e / (4.0 * x)
        return np.where(x < 0.5 * e, 1.0 - x / e, np.where(x <= 0.5, middle, e * (1.0 - x)))

    def _slopes(self, x):
        e = math.exp(-self.mu)
        with np.errstate(divide="ignore"):
            middle = -e / (4.0 * x * x)
        d = np.where(x < 0.5 * e, -1.0 / e, np.where(x <= 0.5, middle, -e))
        return d, d

    def q_density(self, y):
        arr, scalar = as_unit_array(y, "y")
        e = math.exp(-self.mu)
        x = 1.0 - arr
        with np.errstate(divide="ignore"):
            middle = e / (4.0 * x * x)
        q = np.where(x < 0.5 * e, 1.0 / e, np.where(x <= 0.5, middle, e))
        return restore_shape(q, scalar)

    def to_spec(self) -> CurveSpec:
        return CurveSpec(family=self.family, mu=self.mu)


@dataclass(frozen=True)
class EpsDeltaTradeoff(TradeoffCurve):
    """(ε,δ)-DP: f(x) = max(0, 1−δ−e^ε x, e^{−ε}(1−δ−x))"""

    eps: float
    delta: float
    family: ClassVar[CurveFamily] = CurveFamily.EPS_DELTA

    def __post_init__(self):
        _check_nonnegative("eps", self.eps)
        _check_probability("delta", self.delta)

    @property
    def is_perfect(self) -> bool:
        return self.eps == 0.0 and self.delta == 0.0

    @property
    def _breaks(self) -> Tuple[float, float]:
        one_minus_delta = 1.0 - self.delta
        return one_minus_delta / (1.0 + math.exp(self.eps)), one_minus_delta

    def _eval(self, x):
        one_minus_delta = 1.0 - self.delta
        return np.maximum.reduce([
            np.zeros_like(x),
            one_minus_delta - math.exp(self.eps) * x,
            math.exp(-self.eps) * (one_minus_delta - x),
        ])

    def _reflected(self, y):
        one_minus_delta = 1.0 - self.delta
        return np.maximum.reduce([
            np.zeros_like(y),
            one_minus_delta - math.exp(self.eps) * (1.0 - y),
            math.exp(-self.eps) * (y - self.delta),
        ])

    def _slopes(self, x):
        x1, x2 = self._breaks
        steep, shallow = -math.exp(self.eps), -math.exp(-self.eps)
        left = np.where(x <= x1, steep, np.where(x <= x2, shallow, 0.0))
        right = np.where(x < x1, steep, np.where(x < x2, shallow, 0.0))
        return left, right

    @property
    def kinks(self) -> np.ndarray:
        return np.array([k for k in self._breaks if 0.0 < k < 1.0])

    def to_spec(self) -> CurveSpec:
        return CurveSpec(family=self.family, eps=self.eps, delta=self.delta)


def _lower_convex_hull(xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """单调链算法求下凸包（xs 递增）"""
    hull_x, hull_y = [], []
    for x, y in zip(xs.tolist(), ys.tolist()):
        while len(hull_x) >= 2:
            x1, y1, x2, y2 = hull_x[-2], hull_y[-2], hull_x[-1], hull_y[-1]
            # 非左转则弹出
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) <= 0.0:
                hull_x.pop()
                hull_y.pop()
            else:
                break
        hull_x.append(x)
        hull_y.append(y)
    return np.array(hull_x), np.array(hull_y)


@dataclass(frozen=True)
class SubsampledGaussianTradeoff(TradeoffCurve):
    """
    泊松子采样高斯机制的权衡曲线（单侧约定）

    f_q(α) = q·G_μ(α) + (1−q)(1−α)，最终曲线为 min(f_q, f_q⁻¹) 的下凸包，
    在正态分位数网格上数值计算，曲线值取凸包顶点间的线性插值。
    """

    mu: float
    q: float
    grid_size: int = field(default=2 ** 16, compare=True)
    family: ClassVar[CurveFamily] = CurveFamily.SUBSAMPLED_GDP

    def __post_init__(self):
        _check_nonnegative("mu", self.mu)
        _check_probability("q", self.q)
        if self.grid_size < 16:
            raise DomainError(f"grid_size 过小: {self.grid_size}")

    @property
    def is_perfect(self) -> bool:
        return self.mu == 0.0 or self.q == 0.0

    @property
    def _closed_form(self) -> Optional[TradeoffCurve]:
        # q=1 即 GDP，q=0 或 μ=0 即完美隐私
        if self.is_perfect:
            return GaussianTradeoff(0.0)
        if self.q == 1.0:
            return GaussianTradeoff(self.mu)
        return None

    @cached_property
    def _hull(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = np.linspace(QUANTILE_GRID_SPAN, -QUANTILE_GRID_SPAN, self.grid_size)
        xs = np.unique(np.concatenate(([0.0], norm.sf(t), [1.0])))
        fq = self.q * norm.cdf(norm.isf(xs) - self.mu) + (1.0 - self.q) * (1.0 - xs)
        # fq 严格递减，反函数用单调插值
        finv = np.interp(xs, fq[::-1], xs[::-1])
        hx, hy = _lower_convex_hull(xs, np.minimum(fq, finv))
        return hx, hy, np.diff(hy) / np.diff(hx)

    def _eval(self, x):
        exact = self._closed_form
        if exact is not None:
            return exact._eval(x)
        hx, hy, _ = self._hull
        return np.interp(x, hx, hy)

    def _reflected(self, y):
        exact = self._closed_form
        if exact is not None:
            return exact._reflected(y)
        return self._eval(1.0 - y)

    def _slopes(self, x):
        exact = self._closed_form
        if exact is not None:
            return exact._slopes(x)
        hx, _, slopes = self._hull
        last = len(slopes) - 1
        left = slopes[np.clip(np.searchsorted(hx, x, side="left") - 1, 0, last)]
        right = slopes[np.clip(np.searchsorted(hx, x, side="right") - 1, 0, last)]
        return left, right

    @property
    def kinks(self) -> np.ndarray:
        if self._closed_form is not None:
            return np.empty(0)
        return self._hull[0][1:-1]

    def to_spec(self) -> CurveSpec:
        return CurveSpec(family=self.family, mu=self.mu, q=self.q)


def build_curve(spec: CurveSpec, subsampled_grid_size: int = 2 ** 16) -> TradeoffCurve:
    """由 JSON 描述构造曲线"""
    if spec.family == CurveFamily.GDP:
        return GaussianTradeoff(spec.mu)
    if spec.family == CurveFamily.LAPLACE:
        return LaplaceTradeoff(spec.mu)
    if spec.family == CurveFamily.EPS_DELTA:
        return EpsDeltaTradeoff(spec.eps, spec.delta)
    return SubsampledGaussianTradeoff(spec.mu, spec.q, grid_size=subsampled_grid_size)


def perfect_privacy() -> TradeoffCurve:
    return GaussianTradeoff(0.0)
