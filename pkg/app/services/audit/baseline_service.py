import logging
import math

from scipy.stats import beta as beta_dist

from app.exceptions import DomainError
from app.schemes.report import BaselineReport


class BaselineService:
    """多次运行审计基线：Clopper-Pearson 置信上限 + (ε,δ) 假设检验界"""

    @staticmethod
    def clopper_pearson_upper(successes: int, trials: int, confidence: float) -> float:
        """二项比例的双侧 Clopper-Pearson 区间上限"""
        if trials <= 0:
            raise DomainError(f"试验次数必须为正: {trials}")
        if not (0 <= successes <= trials):
            raise DomainError(f"要求 0 ≤ 计数 ≤ 试验次数: {successes}/{trials}")
        if not (0.0 < confidence < 1.0):
            raise DomainError(f"置信水平必须位于 (0,1): {confidence}")
        if successes == trials:
            return 1.0
        return float(beta_dist.ppf(1.0 - (1.0 - confidence) / 2.0, successes + 1, trials - successes))

    @staticmethod
    def clopper_pearson_eps(
        fp: int,
        fn_count: int,
        trials0: int,
        trials1: int,
        confidence: float = 0.95,
        delta: float = 0.0,
    ) -> BaselineReport:
        """
        由假阳性、假阴性计数给出 ε 下界

        ε = max(log((1−δ−α)/β), log((1−δ−β)/α), 0)，其中 α、β 为两类错误率的置信上限；
        对数参数非正或分母为 0 时该项取 0。
        """
        if not (0.0 <= delta <= 1.0):
            raise DomainError(f"δ 必须位于 [0,1]: {delta}")
        alpha = BaselineService.clopper_pearson_upper(fp, trials0, confidence)
        beta = BaselineService.clopper_pearson_upper(fn_count, trials1, confidence)

        def log_ratio(numerator: float, denominator: float) -> float:
            if numerator <= 0.0 or denominator <= 0.0:
                return 0.0
            return math.log(numerator / denominator)

        eps = max(log_ratio(1.0 - delta - alpha, beta), log_ratio(1.0 - delta - beta, alpha), 0.0)
        logging.info(f"基线下界: fp={fp}/{trials0}, fn={fn_count}/{trials1}, α≤{alpha:.4g}, β≤{beta:.4g}, ε≥{eps:.4g}")
        return BaselineReport(
            fp=fp,
            fn=fn_count,
            trials0=trials0,
            trials1=trials1,
            confidence=confidence,
            delta=delta,
            alpha_upper=alpha,
            beta_upper=beta,
            eps_lower=eps,
        )
