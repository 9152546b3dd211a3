"""
基础分布对 (P, Q)

P 为 [0,1] 上的均匀分布，Q 的连续部分密度为 −f′(1−y)，在 y = 1 处有质量 1−f(0) 的原子。
f-DP 信道的输出服从混合分布 (P+Q)/2。把 (0,1) 均分成 grid_size 个单元，
按 (得分升序, y 升序) 排序后累积混合质量，得到秩坐标 t 上的分布表；
原子固定占据最高秩，其后验错误率为 0。
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Tuple

import numpy as np
from scipy.special import expit

from app.constants.common import BREAKPOINT_JUMP, MIN_GRID_SIZE, NORMALIZATION_TOL
from app.exceptions import DomainError, NumericalError
from app.services.tradeoff.curves import ArrayLike, TradeoffCurve, restore_shape, as_unit_array
from app.services.tradeoff.tradeoff_service import TradeoffService


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class RankTable:
    """按得分排序的单元表；下标为原单元号的数组与下标为排序位置的数组分开存放"""

    grid_size: int
    atom_rank_mass: float
    # 按原单元号
    mass: np.ndarray
    score: np.ndarray
    entry_cdf: np.ndarray
    # 按排序位置；error_ext 末尾追加原子（或最后一个单元）的取值
    order: np.ndarray
    tau: np.ndarray
    error_sorted: np.ndarray
    error_ext: np.ndarray
    cum_error: np.ndarray
    cum_moment: np.ndarray
    breakpoints: np.ndarray
    disc_error: float

    @property
    def continuous_mass(self) -> float:
        return float(self.tau[-1])

    def _locate(self, t: np.ndarray, side: str = "right") -> np.ndarray:
        return np.clip(np.searchsorted(self.tau, t, side=side) - 1, 0, self.grid_size)

    def error_right(self, t: np.ndarray) -> np.ndarray:
        """ĝ(t+)，即 ĝ(t)"""
        return self.error_ext[self._locate(t, "right")]

    def error_left(self, t: np.ndarray) -> np.ndarray:
        """ĝ(t−)"""
        return self.error_ext[self._locate(t, "left")]

    def cells(self) -> Iterator[Tuple[float, float, float, float, float]]:
        """按排序顺序逐个给出 (y_lo, y_hi, mass, score, rank_cdf_at_entry)"""
        width = 1.0 / self.grid_size
        for cell in self.order.tolist():
            yield (
                cell * width,
                (cell + 1) * width,
                float(self.mass[cell]),
                float(self.score[cell]),
                float(self.entry_cdf[cell]),
            )

    def cumulative_error(self, t: np.ndarray) -> np.ndarray:
        """G(t) = ∫₀ᵗ ĝ(s) ds；ĝ 在每个单元内为常数，G 分段线性"""
        i = self._locate(t)
        return self.cum_error[i] + self.error_ext[i] * (t - self.tau[i])

    def cumulative_moment(self, t: np.ndarray) -> np.ndarray:
        """G₁(t) = ∫₀ᵗ s·ĝ(s) ds，分段二次"""
        i = self._locate(t)
        return self.cum_moment[i] + 0.5 * self.error_ext[i] * (t - self.tau[i]) * (t + self.tau[i])

    def profile(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """一次定位同时给出 (G(t), G₁(t), ĝ(t+), ĝ(t−))，供求积使用"""
        i = self._locate(t, "right")
        h = self.error_ext[i]
        offset = t - self.tau[i]
        g_cum = self.cum_error[i] + h * offset
        g_moment = self.cum_moment[i] + 0.5 * h * offset * (t + self.tau[i])
        return g_cum, g_moment, h, self.error_ext[self._locate(t, "left")]


@dataclass(frozen=True, eq=False)
class BasePair:
    curve: TradeoffCurve
    grid_size: int
    atom_mass: float
    rank_table: RankTable

    def q_density(self, y: ArrayLike) -> ArrayLike:
        return self.curve.q_density(y)

    def score(self, y: ArrayLike) -> ArrayLike:
        return BasePairService.privacy_loss_score(self, y)

    def rank_cdf(self, y: ArrayLike) -> ArrayLike:
        return BasePairService.rank_cdf(self, y)

    def rank_quantile_error(self, t: ArrayLike) -> ArrayLike:
        return BasePairService.rank_quantile_error(self, t)

    @property
    def expected_error(self) -> float:
        """单比特的平均后验错误率 ∫ĝ(t)dt"""
        return float(self.rank_table.cum_error[-1])


class BasePairService:
    """基础分布对的构造与查询"""

    @staticmethod
    def build_base_pair(curve: TradeoffCurve, grid_size: int) -> BasePair:
        """构造基础分布对（同一曲线与网格的结果在进程内复用）"""
        if grid_size < MIN_GRID_SIZE:
            raise DomainError(f"grid_size 至少为 {MIN_GRID_SIZE}: {grid_size}")
        return _build_cached(curve, int(grid_size))

    @staticmethod
    def _build(curve: TradeoffCurve, grid_size: int) -> BasePair:
        TradeoffService.check_convexity(curve)

        edges = np.linspace(0.0, 1.0, grid_size + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])

        # 单元混合质量 (Δy + ΔR)/2，R(y) = f(1−y)
        reflected = curve.reflected(edges)
        mass = np.maximum(0.5 * (np.diff(edges) + np.diff(reflected)), 0.0)
        atom_mass = 1.0 - curve.f0
        atom_rank_mass = 0.5 * atom_mass

        score = np.abs(curve.log_q_density(mids))
        error = expit(-score)

        # 主键得分、次键 y
        order = np.lexsort((mids, score))
        mass_sorted = mass[order]
        error_sorted = error[order]
        tau = np.concatenate(([0.0], np.cumsum(mass_sorted)))

        total = tau[-1] + atom_rank_mass
        if abs(1.0 - total) > NORMALIZATION_TOL:
            raise NumericalError(f"混合分布归一化失败: 总质量 {total:.9f} ({curve.describe()})")
        # 累加的舍入误差可能使 tau 越过连续部分的上端
        continuous_end = 1.0 - atom_rank_mass
        tau = np.minimum(tau, continuous_end)
        tau[-1] = continuous_end

        cum_error = np.concatenate(([0.0], np.cumsum(error_sorted * mass_sorted)))
        cum_moment = np.concatenate(([0.0], np.cumsum(0.5 * error_sorted * (tau[1:] - tau[:-1]) * (tau[1:] + tau[:-1]))))
        error_ext = np.append(error_sorted, 0.0 if atom_rank_mass > 0.0 else error_sorted[-1])
        entry_cdf = np.empty(grid_size)
        entry_cdf[order] = tau[:-1]

        jumps = np.flatnonzero(np.abs(np.diff(error_sorted)) > BREAKPOINT_JUMP)
        breakpoints = tau[jumps + 1]
        if atom_rank_mass > 0.0 and error_sorted[-1] > BREAKPOINT_JUMP:
            breakpoints = np.append(breakpoints, tau[-1])

        table = RankTable(
            grid_size=grid_size,
            atom_rank_mass=atom_rank_mass,
            mass=_frozen(mass),
            score=_frozen(score),
            entry_cdf=_frozen(entry_cdf),
            order=_frozen(order),
            tau=_frozen(tau),
            error_sorted=_frozen(error_sorted),
            error_ext=_frozen(error_ext),
            cum_error=_frozen(cum_error),
            cum_moment=_frozen(cum_moment),
            breakpoints=_frozen(breakpoints),
            disc_error=BasePairService._discretization_error(curve, edges, error, mass),
        )
        logging.info(
            f"基础分布对构建完成: {curve.describe()}, 网格 {grid_size}, "
            f"原子质量 {atom_mass:.3e}, 断点 {breakpoints.size}, 离散化误差 {table.disc_error:.3e}"
        )
        return BasePair(curve=curve, grid_size=grid_size, atom_mass=atom_mass, rank_table=table)

    @staticmethod
    def _discretization_error(curve: TradeoffCurve, edges: np.ndarray, error: np.ndarray, mass: np.ndarray) -> float:
        """Σ 单元质量 × 单元内 h(得分) 的变化幅度（单元边界与中点取值的极差）"""
        inner = expit(-np.abs(curve.log_q_density(edges[1:-1])))
        lower = np.concatenate(([error[0]], inner))
        upper = np.concatenate((inner, [error[-1]]))
        spread = np.maximum.reduce([lower, upper, error]) - np.minimum.reduce([lower, upper, error])
        return float(np.sum(mass * spread))

    @staticmethod
    def privacy_loss_score(pair: BasePair, y: ArrayLike) -> ArrayLike:
        """|ln(P(y)/Q(y))| = |ln Q(y)|，Q(y) = 0 处为 +inf"""
        return np.abs(pair.curve.log_q_density(y))

    @staticmethod
    def rank_cdf(pair: BasePair, y: ArrayLike) -> ArrayLike:
        """(得分, y) 字典序下严格排在 y 之前的混合质量；单元内线性插值"""
        arr, scalar = as_unit_array(y, "y")
        table = pair.rank_table
        scaled = arr * table.grid_size
        cell = np.clip(np.floor(scaled).astype(np.int64), 0, table.grid_size - 1)
        frac = np.clip(scaled - cell, 0.0, 1.0)
        value = np.clip(table.entry_cdf[cell] + table.mass[cell] * frac, 0.0, 1.0)
        return restore_shape(value, scalar)

    @staticmethod
    def rank_quantile_error(pair: BasePair, t: ArrayLike) -> ArrayLike:
        """ĝ(t)：秩坐标 t 处的后验错误率，非增；原子区域 t ≥ 1 − atom_rank_mass 为 0"""
        arr, scalar = as_unit_array(t, "t")
        return restore_shape(pair.rank_table.error_right(arr), scalar)

    @staticmethod
    def sample_rows(pair: BasePair, count: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """均匀抽取 count 个单元中点的 (y, Q(y), 得分, 秩 CDF)，供绘图导出"""
        cells = np.unique(np.linspace(0, pair.grid_size - 1, min(count, pair.grid_size)).round().astype(np.int64))
        y = (cells + 0.5) / pair.grid_size
        return (
            y,
            np.asarray(pair.q_density(y)),
            pair.rank_table.score[cells],
            pair.rank_table.entry_cdf[cells] + 0.5 * pair.rank_table.mass[cells],
        )


@lru_cache(maxsize=2)
def _build_cached(curve: TradeoffCurve, grid_size: int) -> BasePair:
    return BasePairService._build(curve, grid_size)
