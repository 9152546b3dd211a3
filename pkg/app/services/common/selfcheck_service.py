import logging
import math
import time
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.stats import norm

from app.config.settings import AuditSettings, settings as default_settings
from app.schemes.report import SelfCheckItem, SelfCheckReport
from app.services.audit.baseline_service import BaselineService
from app.services.audit.orderstats_service import OrderStatsService
from app.services.audit.tailbound_service import TailBoundService, TailQuery
from app.services.tradeoff.basepair_service import BasePairService
from app.services.tradeoff.curves import EpsDeltaTradeoff, GaussianTradeoff, LaplaceTradeoff, perfect_privacy
from app.services.tradeoff.tradeoff_service import TradeoffService

CheckResult = Tuple[bool, str]


class SelfCheckService:
    """闭式解与不变量自检"""

    @staticmethod
    def check_closed_forms(config: AuditSettings) -> CheckResult:
        gdp = float(GaussianTradeoff(1.0).eval(0.5))
        laplace = float(LaplaceTradeoff(1.0).eval(0.5))
        gdp_gap = abs(gdp - norm.cdf(-1.0))
        laplace_gap = abs(laplace - 0.5 * math.exp(-1.0))
        return max(gdp_gap, laplace_gap) <= 1e-12, f"GDP 偏差 {gdp_gap:.2e}, Laplace 偏差 {laplace_gap:.2e}"

    @staticmethod
    def check_symmetry_and_convexity(config: AuditSettings) -> CheckResult:
        worst = 0.0
        for curve in (GaussianTradeoff(0.8), LaplaceTradeoff(0.8), EpsDeltaTradeoff(1.0, 0.01)):
            TradeoffService.check_convexity(curve)
            xs = np.linspace(0.0, curve.f0, 257)[1:-1]
            worst = max(worst, float(np.max(np.abs(curve.eval(curve.eval(xs)) - xs))))
        return worst <= 1e-9, f"max|f(f(x)) − x| = {worst:.2e}"

    @staticmethod
    def check_fixed_point(config: AuditSettings) -> CheckResult:
        alpha = TradeoffService.fixed_point_alpha_opt(GaussianTradeoff(1.0))
        gap = abs(alpha - norm.cdf(-0.5))
        return gap <= 1e-10, f"α* 偏差 {gap:.2e}"

    @staticmethod
    def check_eps_delta_round_trip(config: AuditSettings) -> CheckResult:
        round_trip = TradeoffService.fdp_to_eps_delta(EpsDeltaTradeoff(1.0, 1e-3), 1e-3)
        numeric = TradeoffService.fdp_to_eps_delta(GaussianTradeoff(1.0), 1e-5)
        analytic = TradeoffService.gdp_eps_for_delta(1.0, 1e-5)
        gaps = (abs(round_trip - 1.0), abs(numeric - analytic))
        return max(gaps) <= 1e-6, f"(ε,δ) 往返偏差 {gaps[0]:.2e}, GDP 解析偏差 {gaps[1]:.2e}"

    @staticmethod
    def check_perfect_privacy(config: AuditSettings) -> CheckResult:
        pair = BasePairService.build_base_pair(perfect_privacy(), config.grid_size)
        table = OrderStatsService.compute_vk_table(pair, 50, 10, config)
        gap = float(np.max(np.abs(table.v - 0.5)))
        return gap <= 1e-9, f"max|v_k − 1/2| = {gap:.2e}"

    @staticmethod
    def check_single_order_statistic(config: AuditSettings) -> CheckResult:
        pair = BasePairService.build_base_pair(GaussianTradeoff(1.0), config.grid_size)
        table = OrderStatsService.compute_vk_table(pair, 1, 1, config)
        gap = abs(float(table.v[0]) - norm.cdf(-0.5))
        tolerance = max(1e-6, table.disc_error)
        return gap <= tolerance, f"|v_1 − Φ(−μ/2)| = {gap:.2e}（容差 {tolerance:.1e}）"

    @staticmethod
    def check_tail_dominance(config: AuditSettings) -> CheckResult:
        rng = np.random.Generator(np.random.Philox(2024))
        worst = -math.inf
        for _ in range(200):
            r = int(rng.integers(1, 40))
            query = TailQuery(rng.uniform(0.0, 0.5, r), int(rng.integers(0, r + 1)))
            worst = max(worst, TailBoundService.exact_poisson_binomial_tail(query) - TailBoundService.chernoff_tail(query))
        return worst <= 1e-12, f"max(精确 − Chernoff) = {worst:.2e}"

    @staticmethod
    def check_baseline_zero_cases(config: AuditSettings) -> CheckResult:
        coin = BaselineService.clopper_pearson_eps(500, 500, 1000, 1000, 0.95, 0.0).eps_lower
        perfect = BaselineService.clopper_pearson_eps(0, 0, 1000, 1000, 0.95, 0.0).eps_lower
        return coin == 0.0 and perfect > 0.0, f"随机猜测 ε={coin:.3g}, 零错误 ε={perfect:.3g}"

    @staticmethod
    def checks() -> List[Tuple[str, Callable[[AuditSettings], CheckResult]]]:
        return [
            ("closed_forms", SelfCheckService.check_closed_forms),
            ("symmetry_convexity", SelfCheckService.check_symmetry_and_convexity),
            ("fixed_point", SelfCheckService.check_fixed_point),
            ("eps_delta_round_trip", SelfCheckService.check_eps_delta_round_trip),
            ("perfect_privacy_vk", SelfCheckService.check_perfect_privacy),
            ("single_order_statistic", SelfCheckService.check_single_order_statistic),
            ("tail_dominance", SelfCheckService.check_tail_dominance),
            ("baseline_zero_cases", SelfCheckService.check_baseline_zero_cases),
        ]

    @staticmethod
    def run(config: Optional[AuditSettings] = None) -> SelfCheckReport:
        """逐项运行自检；单项抛出的异常记为失败"""
        config = config or default_settings
        started = time.perf_counter()
        items = []
        for name, check in SelfCheckService.checks():
            try:
                passed, detail = check(config)
            except Exception as e:
                logging.error(f"自检 {name} 失败: {e}")
                passed, detail = False, f"{type(e).__name__}: {e}"
            if passed:
                logging.info(f"自检 {name} 通过: {detail}")
            else:
                logging.warning(f"自检 {name} 未通过: {detail}")
            items.append(SelfCheckItem(name=name, passed=passed, detail=detail))
        return SelfCheckReport(
            passed=all(item.passed for item in items),
            items=items,
            runtime_ms=round((time.perf_counter() - started) * 1000.0, 3),
        )
