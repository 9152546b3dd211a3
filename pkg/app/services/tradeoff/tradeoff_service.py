import logging
import math

import numpy as np
from scipy import optimize
from scipy.stats import norm

from app.constants.common import (
    BISECTION_MAX_ITER,
    BISECTION_XTOL,
    CONVEXITY_CHECK_POINTS,
    CONVEXITY_TOL,
    EPS_GRID_POINTS,
    EPS_SEARCH_MAX,
    EPS_SUP_TOL,
    FIXED_POINT_TOL,
    QUANTILE_GRID_SPAN,
)
from app.exceptions import DomainError, NumericalError
from app.schemes.curve import NullHypothesisFamily
from app.services.tradeoff.curves import ArrayLike, TradeoffCurve, build_curve

# 判定 δ < 1−f(0) 时容忍的舍入误差
_F0_SLACK = 1e-12


class TradeoffService:
    """权衡曲线运算：求值、不动点、f-DP → (ε,δ) 转换"""

    @staticmethod
    def eval_tradeoff(curve: TradeoffCurve, x: ArrayLike) -> ArrayLike:
        """计算 f(x)，x 超出 [0,1] 时抛出 DomainError"""
        return curve.eval(x)

    @staticmethod
    def curve_for(family: NullHypothesisFamily, theta: float, subsampled_grid_size: int = 2 ** 16) -> TradeoffCurve:
        """零假设族在参数 θ 处的曲线"""
        if theta < 0 or not math.isfinite(theta):
            raise DomainError(f"族参数必须为有限非负数: {theta}")
        return build_curve(family.spec_at(theta), subsampled_grid_size)

    @staticmethod
    def convexity_violation(curve: TradeoffCurve, points: int = CONVEXITY_CHECK_POINTS) -> float:
        """网格上中点凸性的最大违例量 max(f(x_i) − (f(x_{i−1}) + f(x_{i+1}))/2)"""
        values = curve.eval(np.linspace(0.0, 1.0, points))
        excess = values[1:-1] - 0.5 * (values[:-2] + values[2:])
        return float(max(excess.max(initial=0.0), 0.0))

    @staticmethod
    def check_convexity(curve: TradeoffCurve, tol: float = CONVEXITY_TOL):
        violation = TradeoffService.convexity_violation(curve)
        if violation > tol:
            raise DomainError(f"曲线 {curve.describe()} 非凸: 违例 {violation:.3e}")
        increase = np.diff(curve.eval(np.linspace(0.0, 1.0, CONVEXITY_CHECK_POINTS))).max(initial=0.0)
        if increase > tol:
            raise DomainError(f"曲线 {curve.describe()} 非单调: 增量 {increase:.3e}")

    @staticmethod
    def fixed_point_alpha_opt(curve: TradeoffCurve) -> float:
        """
        对称曲线的不动点 α* = f(α*)

        由凸性，α* 同时最小化 (α + f(α))/2，即单比特的最优错误率。
        """
        f0 = curve.f0
        if f0 == 0.0:
            return 0.0

        def gap(alpha: float) -> float:
            return float(curve.eval(alpha)) - alpha

        try:
            # xtol 取极小值，由 rtol 控制小 α* 的相对精度
            alpha, result = optimize.bisect(gap, 0.0, 1.0, xtol=1e-300, maxiter=BISECTION_MAX_ITER, full_output=True)
        except RuntimeError as e:
            logging.error(f"不动点二分失败: {curve.describe()}: {e}")
            raise NumericalError(f"不动点二分在 {BISECTION_MAX_ITER} 步内未收敛: {curve.describe()}") from e

        residual = abs(gap(alpha))
        if not result.converged or residual > FIXED_POINT_TOL:
            raise NumericalError(f"不动点残差过大 ({residual:.3e}): {curve.describe()}，曲线可能不对称")
        return float(alpha)

    @staticmethod
    def _sup_grid(curve: TradeoffCurve) -> np.ndarray:
        quantiles = norm.sf(np.linspace(QUANTILE_GRID_SPAN, -QUANTILE_GRID_SPAN, EPS_GRID_POINTS))
        uniform = np.linspace(0.0, 1.0, EPS_GRID_POINTS)
        return np.unique(np.concatenate((quantiles, uniform, curve.kinks, [0.0, 1.0])))

    @staticmethod
    def fdp_to_eps_delta(curve: TradeoffCurve, delta: float) -> float:
        """
        f-DP → (ε,δ)-DP

        δ < 1−f(0) 时返回 inf；否则返回
        inf{a ≥ 0 : sup_x (1−δ−e^a x − f(x)) ≤ 0}，上确界在稠密网格加拐点上
        计算并在最优网格点邻域内局部细化。
        """
        if delta is None or not (0.0 <= delta <= 1.0):
            raise DomainError(f"delta 必须位于 [0,1]: {delta}")
        if curve.is_perfect:
            return 0.0

        floor = 1.0 - curve.f0
        if delta < floor - _F0_SLACK:
            return math.inf
        delta = max(delta, floor)
        one_minus_delta = 1.0 - delta

        xs = TradeoffService._sup_grid(curve)
        fx = curve.eval(xs)
        slack = one_minus_delta - fx

        def sup_gap(a: float) -> float:
            scale = math.exp(a)
            values = slack - scale * xs
            j = int(np.argmax(values))
            best = float(values[j])
            lo, hi = xs[max(j - 1, 0)], xs[min(j + 1, len(xs) - 1)]
            if hi > lo:
                refined = optimize.minimize_scalar(
                    lambda x: -(one_minus_delta - scale * x - float(curve.eval(x))),
                    bounds=(lo, hi),
                    method="bounded",
                    options={"xatol": max((hi - lo) * 1e-9, 1e-300)},
                )
                best = max(best, -float(refined.fun))
            return best

        if sup_gap(0.0) <= EPS_SUP_TOL:
            return 0.0

        hi = 1.0
        while sup_gap(hi) > EPS_SUP_TOL:
            if hi >= EPS_SEARCH_MAX:
                return math.inf
            hi = min(2.0 * hi, EPS_SEARCH_MAX)
        lo = 0.0
        for _ in range(BISECTION_MAX_ITER):
            if hi - lo <= BISECTION_XTOL:
                break
            mid = 0.5 * (lo + hi)
            if sup_gap(mid) <= EPS_SUP_TOL:
                hi = mid
            else:
                lo = mid
        return hi

    @staticmethod
    def gdp_delta_for_eps(mu: float, eps: float) -> float:
        """μ-GDP 的解析换算 δ(ε) = Φ(−ε/μ+μ/2) − e^ε Φ(−ε/μ−μ/2)"""
        if mu < 0 or eps < 0:
            raise DomainError(f"mu 与 eps 必须非负: mu={mu}, eps={eps}")
        if mu == 0.0:
            return 0.0
        first = norm.cdf(-eps / mu + mu / 2.0)
        second = math.exp(eps + norm.logcdf(-eps / mu - mu / 2.0))
        return max(float(first - second), 0.0)

    @staticmethod
    def gdp_eps_for_delta(mu: float, delta: float) -> float:
        """解析换算的反函数：对 ε 求根"""
        if not (0.0 < delta <= 1.0):
            raise DomainError(f"delta 必须位于 (0,1]: {delta}")
        if TradeoffService.gdp_delta_for_eps(mu, 0.0) <= delta:
            return 0.0
        hi = 1.0
        while TradeoffService.gdp_delta_for_eps(mu, hi) > delta:
            hi *= 2.0
            if hi > EPS_SEARCH_MAX:
                return math.inf
        return float(optimize.brentq(
            lambda e: TradeoffService.gdp_delta_for_eps(mu, e) - delta, 0.0, hi, xtol=1e-14, maxiter=BISECTION_MAX_ITER
        ))
