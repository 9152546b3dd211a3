import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import optimize
from scipy.special import expit, logit, logsumexp

from app.constants.common import BISECTION_MAX_ITER, BISECTION_XTOL, LAMBDA_MIN
from app.exceptions import DomainError, ResourceBudgetError


@dataclass(frozen=True, eq=False)
class TailQuery:
    """P[Σ V_k ≤ u]，V_k ~ Bernoulli(v_k) 相互独立"""

    v: np.ndarray
    u: int

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).ravel()
        if v.size == 0:
            raise DomainError("v 不能为空")
        if np.any(np.isnan(v)) or np.any(v < 0.0) or np.any(v > 1.0):
            raise DomainError("v_k 必须位于 [0,1]")
        if self.u < 0 or self.u > v.size:
            raise DomainError(f"要求 0 ≤ u ≤ r: u={self.u}, r={v.size}")
        object.__setattr__(self, "v", v)

    @property
    def r(self) -> int:
        return int(self.v.size)


class TailBoundService:
    """错误数下尾概率的上界"""

    @staticmethod
    def inflate(v: np.ndarray, error: np.ndarray) -> np.ndarray:
        """逐点加上误差估计并截断到 [0,1]；尾概率对 v 单调不减，因此结果仍是有效上界"""
        return np.clip(np.asarray(v, dtype=float) + np.asarray(error, dtype=float), 0.0, 1.0)

    @staticmethod
    def chernoff_kappa(query: TailQuery, lam: float) -> float:
        """κ(λ) = −λu + Σ ln(1 − v_k + v_k e^λ)"""
        v = query.v
        certain = int(np.count_nonzero(v >= 1.0))
        partial = v[v < 1.0]
        return float(-lam * query.u + certain * lam + np.sum(np.log1p(partial * np.expm1(lam))))

    @staticmethod
    def chernoff_derivatives(query: TailQuery, lam: float) -> Tuple[float, float]:
        """(κ′(λ), κ″(λ))；κ″ = Σ p_k(1−p_k) ≥ 0，p_k = expit(λ + logit v_k)"""
        with np.errstate(divide="ignore"):
            p = expit(lam + logit(query.v))
        return float(np.sum(p) - query.u), float(np.sum(p * (1.0 - p)))

    @staticmethod
    def chernoff_tail(query: TailQuery) -> float:
        """min(1, inf_{λ<0} exp κ(λ))，最优 λ 通过对 κ′ 二分求得"""
        v, u = query.v, query.u
        if u >= query.r:
            return 1.0
        certain = int(np.count_nonzero(v >= 1.0))
        if certain > u:
            return 0.0
        if u == 0:
            return float(math.exp(np.sum(np.log1p(-v))))
        if u >= float(np.sum(v)):
            return 1.0

        def derivative(lam: float) -> float:
            return TailBoundService.chernoff_derivatives(query, lam)[0]

        if derivative(LAMBDA_MIN) >= 0.0:
            lam = LAMBDA_MIN
        else:
            try:
                lam = optimize.bisect(derivative, LAMBDA_MIN, 0.0, xtol=BISECTION_XTOL, maxiter=BISECTION_MAX_ITER)
            except RuntimeError as e:
                # κ 为凸函数，二分失败时退回区间端点的较小值
                logging.warning(f"κ′ 二分未收敛，使用端点值: {e}")
                lam = min((LAMBDA_MIN, -BISECTION_XTOL), key=lambda x: TailBoundService.chernoff_kappa(query, x))
        kappa = TailBoundService.chernoff_kappa(query, lam)
        return float(min(1.0, math.exp(min(kappa, 0.0))))

    @staticmethod
    def exact_poisson_binomial_tail(query: TailQuery, budget: Optional[float] = None) -> float:
        """
        精确 P[Σ V_k ≤ u]

        对概率生成函数 Π(1 − v_k + v_k x) 的前 u+1 个系数做卷积，系数保存在对数域。
        """
        v, u = query.v, query.u
        if budget is not None and float(query.r) * float(u + 1) > budget:
            raise ResourceBudgetError(f"精确尾概率计算量 r·u = {query.r}·{u} 超出预算 {budget:.3g}")
        if u >= query.r:
            return 1.0

        with np.errstate(divide="ignore"):
            log_keep = np.log1p(-v)
            log_flip = np.log(v)
        coeffs = np.full(u + 1, -np.inf)
        coeffs[0] = 0.0
        for keep, flip in zip(log_keep.tolist(), log_flip.tolist()):
            shifted = coeffs[:-1] + flip
            coeffs[1:] = np.logaddexp(coeffs[1:] + keep, shifted)
            coeffs[0] += keep
        return float(min(1.0, math.exp(logsumexp(coeffs))))
