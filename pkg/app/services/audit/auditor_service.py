import logging
from concurrent import futures
from typing import Dict, List, Optional

import numpy as np

from app.config.settings import APP_VERSION, AuditSettings, settings as default_settings
from app.exceptions import DomainError
from app.schemes.curve import CurveFamily, NullHypothesisFamily
from app.schemes.report import AuditReport, TailMethod
from app.schemes.transcript import Transcript
from app.services.audit.tailbound_service import TailBoundService, TailQuery
from app.services.audit.vk_cache_service import VkCacheService
from app.services.tradeoff.curves import TradeoffCurve
from app.services.tradeoff.tradeoff_service import TradeoffService
from app.utils.common import round_param

# 族参数在缓存键与二分中的舍入位数
_THETA_DIGITS = 6
# 二分区间上端低于该值时停止
_MIN_THETA = 1e-9
# 带提示的首轮内点：hint × (1 + offset)
_HINT_OFFSETS = (0.0, -0.01, 0.01, -0.05, 0.05, -0.2, 0.2)


class AuditorService:
    """把转录（或 n, r, u）转换为 p 值与隐私下界"""

    def __init__(self, config: Optional[AuditSettings] = None, cache: Optional[VkCacheService] = None):
        self.config = config or default_settings
        self.cache = cache if cache is not None else VkCacheService.from_settings(self.config)

    @staticmethod
    def count_errors(transcript: Transcript) -> int:
        """公布集合中猜错的个数；先校验过滤条件"""
        transcript.check_invariants()
        released = transcript.released
        return int(np.count_nonzero(transcript.truths[released] != transcript.guesses[released]))

    @staticmethod
    def accuracy(r: int, u: int) -> float:
        """公布猜测的正确率 c/r"""
        return (r - u) / r if r else 0.0

    def bernoulli_parameters(self, n: int, r: int, curve: TradeoffCurve, config: Optional[AuditSettings] = None) -> np.ndarray:
        """按求积误差向上修正后的 v_k"""
        if curve.is_perfect:
            return np.full(r, 0.5)
        table = self.cache.get_or_compute(curve, n, r, config or self.config)
        return TailBoundService.inflate(table.v, table.quad_error)

    def expected_errors(self, n: int, r: int, curve: TradeoffCurve) -> float:
        """零假设下公布猜测的期望错误数 Σ v_k"""
        _check_sizes(n, r, 0)
        if curve.is_perfect:
            return 0.5 * r
        return float(np.sum(self.cache.get_or_compute(curve, n, r, self.config).v))

    def p_value(
        self,
        n: int,
        r: int,
        u: int,
        curve: TradeoffCurve,
        method: TailMethod = TailMethod.CHERNOFF,
        config: Optional[AuditSettings] = None,
    ) -> float:
        """
        零假设“机制满足 curve”下，公布猜测至多错 u 个的概率上界

        config 只用于计算 v_k 表（如在外层线程池中改为单线程），默认使用实例配置。
        """
        _check_sizes(n, r, u)
        if u >= r:
            return 1.0
        query = TailQuery(self.bernoulli_parameters(n, r, curve, config), u)
        if TailMethod(method) == TailMethod.EXACT:
            return TailBoundService.exact_poisson_binomial_tail(query, self.config.exact_tail_budget)
        return TailBoundService.chernoff_tail(query)

    def _curve(self, family: NullHypothesisFamily, theta: float) -> TradeoffCurve:
        return TradeoffService.curve_for(family, theta, self.config.subsampled_grid_size)

    def lower_bound_search(
        self,
        n: int,
        r: int,
        u: int,
        family: NullHypothesisFamily,
        report_delta: Optional[float] = None,
        significance: Optional[float] = None,
        method: Optional[TailMethod] = None,
        theta_hint: Optional[float] = None,
    ) -> AuditReport:
        """
        求能被拒绝的最强族参数 θ* = sup{θ : p(θ) ≤ significance}

        先在对数间隔的探测点上检查 p(θ) 单调不减；单调时在探测区间内做多点二分，
        否则从 θ = 0 起线性扫描，取最长的被拒绝前缀。
        theta_hint（例如同一设置下上一次审计的 θ*）只决定首轮二分内点的位置，精度要求不变。
        """
        config = self.config
        if report_delta is None:
            # (ε,δ) 族默认在自身的 δ 处报告，否则 ε 下界恒为 +∞
            report_delta = family.delta if family.family == CurveFamily.EPS_DELTA else config.report_delta
        significance = config.significance if significance is None else significance
        method = TailMethod(method or config.tail_method)
        _check_sizes(n, r, u)
        if not (0.0 < significance < 1.0):
            raise DomainError(f"显著性水平必须位于 (0,1): {significance}")

        # 多个 θ 并行计算时，v_k 表在各自线程内单线程计算
        nested = config if config.workers == 1 else config.model_copy(update={"workers": 1})
        memo: Dict[float, float] = {}

        def p_at(theta: float, vk_config: AuditSettings = config) -> float:
            theta = round_param(theta, _THETA_DIGITS)
            if theta not in memo:
                memo[theta] = self.p_value(n, r, u, self._curve(family, theta), method, vk_config)
            return memo[theta]

        def report(theta: float, fallback: bool = False, capped: bool = False) -> AuditReport:
            p = p_at(theta)
            rejected = p <= significance
            curve = self._curve(family, theta) if rejected else None
            eps_lower = TradeoffService.fdp_to_eps_delta(curve, report_delta) if rejected else 0.0
            return AuditReport(
                n=n,
                r=r,
                u=u,
                accuracy=self.accuracy(r, u),
                p_value=p,
                significance=significance,
                family=family,
                rejected_param=theta if rejected else 0.0,
                rejected_curve=curve.to_spec() if curve is not None else None,
                eps_lower=eps_lower,
                report_delta=report_delta,
                tail_method=method,
                tool_version=APP_VERSION,
                grid_size=config.grid_size,
                quad_nodes=config.quad_nodes,
                monotonicity_fallback=fallback,
                capped=capped,
            )

        logging.info(f"开始下界搜索: n={n}, r={r}, u={u}, 族 {family.family.value}, 尾界 {method.value}")
        if p_at(0.0) > significance:
            logging.info(f"θ=0 处 p 值 {p_at(0.0):.4g} > {significance}，不拒绝任何参数")
            return report(0.0)

        with futures.ThreadPoolExecutor(max_workers=config.workers) as executor:

            def p_many(thetas: List[float]) -> List[float]:
                pending = [t for t in dict.fromkeys(round_param(t, _THETA_DIGITS) for t in thetas) if t not in memo]
                if len(pending) > 1 and config.workers > 1:
                    list(executor.map(lambda t: p_at(t, nested), pending))
                return [p_at(t) for t in thetas]

            probes = [round_param(t, _THETA_DIGITS) for t in np.geomspace(config.theta_max / 1000.0, config.theta_max, config.probe_count)]
            probes[-1] = config.theta_max
            thetas = [0.0] + probes
            p_values = p_many(thetas)

            fallback = capped = False
            if self._monotonicity_violated(p_values, significance):
                logging.warning(f"p 值关于族参数不单调，改用线性扫描: {list(zip(thetas, p_values))}")
                theta_star, fallback = self._linear_scan(p_many, significance), True
            else:
                first_accept = next((i for i, p in enumerate(p_values) if p > significance), None)
                if first_accept is None:
                    logging.warning(f"族参数上界 {config.theta_max} 仍被拒绝，结果截断")
                    theta_star, capped = config.theta_max, True
                else:
                    lo, hi = thetas[first_accept - 1], thetas[first_accept]
                    theta_star = self._bisect(p_many, lo, hi, significance, theta_hint)

        result = report(theta_star, fallback, capped)
        logging.info(
            f"下界搜索完成: {family.theta_name}*={result.rejected_param:.6g}, ε_lower={result.eps_lower:.6g}, "
            f"计算 {len(memo)} 个参数点"
        )
        return result

    def _monotonicity_violated(self, p_values, significance: float) -> bool:
        """相邻探测点 p 值下降超过阈值即违例；两端都高于显著性水平的下降不影响拒绝域，不计入"""
        tol = self.config.monotonic_tol
        return any(
            later < earlier - tol and later <= significance
            for earlier, later in zip(p_values, p_values[1:])
        )

    def _bisect(self, p_many, lo: float, hi: float, significance: float, hint: Optional[float] = None) -> float:
        """
        多点二分，不变量 p(lo) ≤ significance < p(hi)

        每轮取 bisect_sections 个内点一起计算；hint 落在区间内时，首轮内点集中在 hint 附近。
        返回的 lo 为已验证被拒绝的最大参数；区间缩到 _MIN_THETA 以下仍未分开时返回 lo（可能为 0）。
        """
        sections = self.config.bisect_sections
        use_hint = hint is not None and lo < hint < hi
        while hi - lo > self.config.bisect_rel_tol * hi and hi > _MIN_THETA:
            if use_hint:
                points = [hint * (1.0 + offset) for offset in _HINT_OFFSETS[:sections]]
                use_hint = False
            else:
                points = [lo + (hi - lo) * j / (sections + 1) for j in range(1, sections + 1)]
            points = [t for t in sorted({round_param(t, _THETA_DIGITS) for t in points}) if lo < t < hi]
            if not points:
                break
            for theta, p in zip(points, p_many(points)):
                if p > significance:
                    hi = theta
                    break
                lo = theta
        return lo

    def _linear_scan(self, p_many, significance: float) -> float:
        steps, sections = self.config.fallback_scan_steps, self.config.bisect_sections
        grid = [round_param(self.config.theta_max * j / steps, _THETA_DIGITS) for j in range(1, steps + 1)]
        theta_star = 0.0
        for start in range(0, steps, sections):
            batch = grid[start:start + sections]
            for theta, p in zip(batch, p_many(batch)):
                if p > significance:
                    return theta_star
                theta_star = theta
        return theta_star

    def audit_transcript(
        self,
        transcript: Transcript,
        family: Optional[NullHypothesisFamily] = None,
        report_delta: Optional[float] = None,
        significance: Optional[float] = None,
        method: Optional[TailMethod] = None,
        theta_hint: Optional[float] = None,
    ) -> AuditReport:
        """统计错误数后按机制对应（或指定）的零假设族做下界搜索"""
        u = self.count_errors(transcript)
        family = family or transcript.spec.null_family()
        return self.lower_bound_search(transcript.n, transcript.r, u, family, report_delta, significance, method, theta_hint)


def _check_sizes(n: int, r: int, u: int):
    if not (0 <= u <= r <= n) or r < 1:
        raise DomainError(f"要求 0 ≤ u ≤ r ≤ n 且 r ≥ 1: n={n}, r={r}, u={u}")
