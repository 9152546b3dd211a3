"""
次序统计量修正后的伯努利参数 v_k

令 t = F_Y(y) 为秩坐标，则第 k 小得分的秩服从 Beta(k, n−k+1)，
v_k = E[ĝ(T)], T ~ Beta(k, n−k+1)。原子处 ĝ = 0；连续样本的并列概率为 0，
因此连续 F_Y 下的次序统计量公式成立，并列与原子全部在 ĝ 内处理。

求积在 Beta 均值 ±window_sigmas·σ 的窗口内进行：ĝ 的区间积分由秩表精确给出，
密度 b(t) 用 Simpson 求区间质量，并用 b′ 与 ĝ 的一阶矩做修正；窗口外的尾部质量用
不完全 Beta 函数精确计算。
"""
import logging
import math
from concurrent import futures
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import betainc, betaincc, expit, gammaln, xlog1py, xlogy

from app.config.settings import AuditSettings, settings as default_settings
from app.constants.common import BETA_TAIL_TOL, MAX_NODE_DOUBLINGS, VK_BATCH_NODES, VK_CHUNK_SIZE, WINDOW_WIDEN_SIGMAS
from app.exceptions import DomainError, NumericalError
from app.schemes.curve import CurveSpec
from app.services.tradeoff.basepair_service import BasePair, RankTable


@dataclass(frozen=True, eq=False)
class VkTable:
    """k = n−r+1 … n 的伯努利参数及其求积误差估计"""

    n: int
    r: int
    family: CurveSpec
    v: np.ndarray
    quad_error: np.ndarray
    grid_size: int
    quad_nodes: int
    disc_error: float = 0.0

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.n - self.r + 1, self.n + 1)


def _check_nk(n: int, k: int):
    if n < 1 or k < 1 or k > n:
        raise DomainError(f"要求 1 ≤ k ≤ n: n={n}, k={k}")


class OrderStatsService:
    """次序统计量密度与 v_k 表"""

    @staticmethod
    def log_order_stat_weight(n: int, k: int, t):
        """ln[n!/((n−k)!(k−1)!) · t^{k−1}(1−t)^{n−k}]，即 Beta(k, n−k+1) 的对数密度"""
        _check_nk(n, k)
        arr = np.asarray(t, dtype=float)
        log_const = gammaln(n + 1.0) - gammaln(k) - gammaln(n - k + 1.0)
        value = log_const + xlogy(k - 1.0, arr) + xlog1py(n - k, -arr)
        return float(value) if arr.ndim == 0 else value

    @staticmethod
    def _beta_windows(n: int, ks: np.ndarray, sigmas: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """每个 k 的求积窗口 [lo, hi]，以及窗口两侧的精确 Beta 尾质量"""
        a = ks.astype(float)
        b = n - a + 1.0
        mean = a / (n + 1.0)
        sd = np.sqrt(a * b) / (n + 1.0) / math.sqrt(n + 2.0)
        lo = np.maximum(0.0, mean - sigmas * sd)
        hi = np.minimum(1.0, mean + sigmas * sd)
        while True:
            widen = (lo > 0.0) & (betainc(a, b, lo) >= BETA_TAIL_TOL)
            if not widen.any():
                break
            lo = np.where(widen, np.maximum(0.0, lo - WINDOW_WIDEN_SIGMAS * sd), lo)
        while True:
            widen = (hi < 1.0) & (betaincc(a, b, hi) >= BETA_TAIL_TOL)
            if not widen.any():
                break
            hi = np.where(widen, np.minimum(1.0, hi + WINDOW_WIDEN_SIGMAS * sd), hi)
        left = np.where(lo > 0.0, betainc(a, b, lo), 0.0)
        right = np.where(hi < 1.0, betaincc(a, b, hi), 0.0)
        return lo, hi, left, right

    @staticmethod
    def _window_nodes(table: RankTable, lo: np.ndarray, hi: np.ndarray, nodes: int) -> np.ndarray:
        """每行是一个 k 的求积节点；窗口内的 ĝ 断点并入节点，行尾用 hi 补齐为零宽区间"""
        base = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, nodes)
        base[:, -1] = hi
        breakpoints = table.breakpoints
        start = np.searchsorted(breakpoints, lo, side="right")
        stop = np.searchsorted(breakpoints, hi, side="left")
        extra = int(np.max(stop - start, initial=0))
        if extra == 0:
            return base
        t = np.repeat(hi[:, None], nodes + extra, axis=1)
        t[:, :nodes] = base
        for row in np.flatnonzero(stop > start):
            merged = np.union1d(base[row], breakpoints[start[row]:stop[row]])
            t[row, :merged.size] = merged
        return t

    @staticmethod
    def _vk_batch(table: RankTable, n: int, ks: np.ndarray, nodes: int, sigmas: float) -> Tuple[np.ndarray, np.ndarray]:
        """一批 k 的 (v_k, 误差估计)，整批节点共用一次 profile 查询"""
        lo, hi, left_mass, right_mass = OrderStatsService._beta_windows(n, ks, sigmas)
        t = OrderStatsService._window_nodes(table, lo, hi, nodes)
        width = np.diff(t, axis=1)
        mid = 0.5 * (t[:, :-1] + t[:, 1:])

        # 对数域计算密度，取指数前逐行减去最大值
        a = ks.astype(float)[:, None]
        log_const = gammaln(n + 1.0) - gammaln(a) - gammaln(n - a + 1.0)
        log_t = log_const + xlogy(a - 1.0, t) + xlog1py(n - a, -t)
        log_mid = log_const + xlogy(a - 1.0, mid) + xlog1py(n - a, -mid)
        shift = np.maximum(log_t.max(axis=1), log_mid.max(axis=1))[:, None]
        scale = np.exp(shift)
        pdf_t = np.exp(log_t - shift)
        pdf_mid = np.exp(log_mid - shift)

        # b′/b 与 b″/b
        down, up = a - 1.0, n - a
        with np.errstate(divide="ignore", invalid="ignore"):
            def ratios(x):
                first = np.where(down > 0.0, down / x, 0.0) - np.where(up > 0.0, up / (1.0 - x), 0.0)
                second = (
                    first * first
                    - np.where(down > 0.0, down / (x * x), 0.0)
                    - np.where(up > 0.0, up / ((1.0 - x) ** 2), 0.0)
                )
                return first, second

            d1_mid, d2_mid = ratios(mid)
            _, d2_t = ratios(t)
            slope_mid = np.nan_to_num(pdf_mid * d1_mid, nan=0.0, posinf=0.0, neginf=0.0)
            curv_t = np.nan_to_num(np.abs(pdf_t * d2_t), nan=0.0, posinf=0.0, neginf=0.0)
            curv_mid = np.nan_to_num(np.abs(pdf_mid * d2_mid), nan=0.0, posinf=0.0, neginf=0.0)

        mass = width * (pdf_t[:, :-1] + 4.0 * pdf_mid + pdf_t[:, 1:]) / 6.0 * scale
        g_cum, g_moment, g_right, g_left = table.profile(t)
        g_int = np.diff(g_cum, axis=1)
        g_bar = np.divide(g_int, width, out=np.zeros_like(g_int), where=width > 0.0)
        moment = np.diff(g_moment, axis=1) - mid * g_int

        v = np.sum(g_bar * mass, axis=1) + scale[:, 0] * np.sum(slope_mid * moment, axis=1)

        # 窗口外尾部：ĝ 的区间均值乘以精确尾质量
        g_total = float(table.cum_error[-1])
        v += np.divide(left_mass * g_cum[:, 0], lo, out=np.zeros_like(lo), where=left_mass > 0.0)
        v += np.divide(right_mass * (g_total - g_cum[:, -1]), 1.0 - hi, out=np.zeros_like(hi), where=right_mass > 0.0)

        oscillation = g_right[:, :-1] - g_left[:, 1:]
        curvature = scale * np.maximum(np.maximum(curv_t[:, :-1], curv_t[:, 1:]), curv_mid)
        total_mass = np.sum(mass, axis=1) + left_mass + right_mass
        error = (
            np.sum(oscillation * width ** 3 * curvature, axis=1) / 16.0
            + left_mass * (table.error_right(np.array(0.0)) - table.error_left(lo))
            + right_mass * (table.error_right(hi) - table.error_left(np.array(1.0)))
            + 0.5 * np.abs(1.0 - total_mass)
        )
        return np.clip(v, 0.0, 0.5), error

    @staticmethod
    def _vk_chunk(
        table: RankTable, n: int, ks: np.ndarray, nodes: int, sigmas: float, max_error: float
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """一块 k 的 (v, 误差, 节点数)；误差超限的 k 加倍节点重算"""
        v = np.empty(ks.size)
        error = np.empty(ks.size)
        used = np.full(ks.size, nodes)
        pending = np.arange(ks.size)
        current = nodes
        for doublings in range(MAX_NODE_DOUBLINGS + 1):
            if doublings:
                current = 2 * current - 1
            rows = max(1, VK_BATCH_NODES // current)
            for start in range(0, pending.size, rows):
                batch = pending[start:start + rows]
                v[batch], error[batch] = OrderStatsService._vk_batch(table, n, ks[batch], current, sigmas)
            used[pending] = current
            pending = pending[error[pending] > max_error]
            if pending.size == 0:
                return v, error, used
        worst = pending[np.argmax(error[pending])]
        raise NumericalError(
            f"v_k 求积误差过大: n={n}, k={int(ks[worst])}, 误差 {error[worst]:.3e} > {max_error:.1e}（节点 {current}），需要更细的网格"
        )

    @staticmethod
    def compute_vk_table(pair: BasePair, n: int, r: int, config: Optional[AuditSettings] = None) -> VkTable:
        """
        计算 v_{n−r+1..n}

        按 k 分块并行求积，块内逐批向量化；结果按 k 顺序组装，与调度无关。
        """
        config = config or default_settings
        if n < 1 or r < 1 or r > n:
            raise DomainError(f"要求 1 ≤ r ≤ n: n={n}, r={r}")

        ks = np.arange(n - r + 1, n + 1)
        chunks = [ks[i:i + VK_CHUNK_SIZE] for i in range(0, ks.size, VK_CHUNK_SIZE)]
        args = (pair.rank_table, n)
        tail = (config.quad_nodes, config.window_sigmas, config.quad_max_error)

        try:
            if len(chunks) == 1 or config.workers == 1:
                results = [OrderStatsService._vk_chunk(*args, chunk, *tail) for chunk in chunks]
            else:
                with futures.ThreadPoolExecutor(max_workers=config.workers) as executor:
                    results = list(executor.map(lambda chunk: OrderStatsService._vk_chunk(*args, chunk, *tail), chunks))
        except NumericalError as e:
            logging.error(f"计算 v_k 表失败: {pair.curve.describe()}: {e.detail}")
            raise

        v = np.concatenate([item[0] for item in results])
        quad_error = np.concatenate([item[1] for item in results])
        used = np.concatenate([item[2] for item in results])
        # v 随 k 非增；数值噪声向上修正
        v = np.maximum.accumulate(v[::-1])[::-1]

        table = VkTable(
            n=n,
            r=r,
            family=pair.curve.to_spec(),
            v=v,
            quad_error=quad_error,
            grid_size=pair.grid_size,
            quad_nodes=int(used.max()),
            disc_error=pair.rank_table.disc_error,
        )
        logging.debug(
            f"v_k 表完成: {pair.curve.describe()}, n={n}, r={r}, "
            f"v_n={v[-1]:.6g}, 最大求积误差 {quad_error.max():.3e}"
        )
        return table

    @staticmethod
    def compute_vk_direct(pair: BasePair, n: int, k: int) -> float:
        """
        在 y 网格上直接计算 v_k：每个单元内 ĝ 为常数、F_Y 线性，
        v_k = Σ_i h_i·[B(τ_{i+1}) − B(τ_i)]，B 为 Beta(k, n−k+1) 的分布函数
        """
        _check_nk(n, k)
        table = pair.rank_table
        cdf = betainc(float(k), float(n - k + 1), table.tau)
        return float(np.sum(table.error_sorted * np.diff(cdf)))

    @staticmethod
    def simulate_vk_monte_carlo(
        pair: BasePair,
        n: int,
        ks: Sequence[int],
        batches: int,
        seed: int,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        蒙特卡洛 v_k：每批从 (P+Q)/2 抽 n 个 y，按 (得分, y) 排序取第 k 小，
        记录其后验错误率 1/(1+e^score)。返回 (均值, 标准误)。
        """
        for k in ks:
            _check_nk(n, k)
        curve = pair.curve
        rng = np.random.Generator(np.random.Philox(seed))
        edges = np.linspace(0.0, 1.0, pair.grid_size + 1)
        q_cdf = curve.reflected(edges)
        f0 = curve.f0
        k_index = np.asarray(ks, dtype=np.int64) - 1

        rows_per_chunk = max(1, 2 ** 22 // n)
        total = np.zeros(len(ks))
        total_sq = np.zeros(len(ks))
        done = 0
        while done < batches:
            rows = min(rows_per_chunk, batches - done)
            from_q = rng.random((rows, n)) < 0.5
            u = rng.random((rows, n))
            y = u.copy()
            in_atom = from_q & (u >= f0)
            continuous_q = from_q & ~in_atom
            y[continuous_q] = np.interp(u[continuous_q], q_cdf, edges)
            y = np.clip(y, 1e-300, 1.0 - 2 ** -53)
            score = np.abs(curve.log_q_density(y))
            y[in_atom] = 1.0
            score[in_atom] = np.inf
            order = np.lexsort((y, score), axis=-1)
            picked = np.take_along_axis(score, order[:, k_index], axis=-1)
            error = expit(-picked)
            total += error.sum(axis=0)
            total_sq += (error ** 2).sum(axis=0)
            done += rows

        mean = total / batches
        variance = np.maximum(total_sq / batches - mean ** 2, 0.0)
        return mean, np.sqrt(variance / batches)
