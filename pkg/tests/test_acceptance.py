"""端到端审计精度与统计可靠性；运行较慢，默认跳过（pytest -m slow）"""
import numpy as np
import pytest

from app.config.settings import AuditSettings
from app.infrastructure.storage.memory_connect import MemoryStorage
from app.schemes.curve import CurveFamily, CurveSpec, NullHypothesisFamily
from app.schemes.transcript import GuessStrategy, MechanismSpec
from app.services.audit.auditor_service import AuditorService
from app.services.audit.orderstats_service import OrderStatsService
from app.services.audit.tailbound_service import TailBoundService, TailQuery
from app.services.audit.vk_cache_service import VkCacheService
from app.services.simulation.mechanism_service import MechanismService
from app.services.tradeoff.basepair_service import BasePairService
from app.services.tradeoff.curves import EpsDeltaTradeoff, GaussianTradeoff, build_curve
from app.services.tradeoff.tradeoff_service import TradeoffService

pytestmark = pytest.mark.slow

SEEDS = range(5)


@pytest.fixture(scope="module")
def full_auditor() -> AuditorService:
    return AuditorService(AuditSettings(cache_type="memory"), VkCacheService(MemoryStorage()))


def _audit_seeds(auditor: AuditorService, seeds=SEEDS, report_delta: float = 1e-5, **params):
    """同一设置的多个种子；上一个种子的 θ* 作为下一次二分的起点"""
    reports, hint = [], None
    for seed in seeds:
        spec = MechanismSpec(seed=seed, **params)
        transcript = MechanismService.simulate(spec, auditor.config)
        report = auditor.audit_transcript(transcript, report_delta=report_delta, theta_hint=hint)
        hint = report.rejected_param or None
        reports.append(report)
    return reports


def test_gaussian_audit_is_tight(full_auditor):
    eps_upper = TradeoffService.fdp_to_eps_delta(GaussianTradeoff(0.8), 1e-5)
    lowers = [
        report.eps_lower
        for report in _audit_seeds(
            full_auditor, kind="gaussian", sigma=1.0 / 0.8, n=100_000, r=20_000, strategy=GuessStrategy.GENERAL
        )
    ]
    assert max(lowers) <= eps_upper
    assert np.median(lowers) >= 0.75 * eps_upper


def test_laplace_audit_without_filtering(full_auditor):
    true_curve = build_curve(CurveSpec(family=CurveFamily.LAPLACE, mu=0.8))
    eps_upper = TradeoffService.fdp_to_eps_delta(true_curve, 1e-5)
    lowers = [report.eps_lower for report in _audit_seeds(full_auditor, kind="laplace", c=1.0 / 0.8, n=100_000, r=100_000)]
    assert max(lowers) <= eps_upper
    assert np.median(lowers) >= 0.7 * eps_upper


def test_randomized_response_large_delta(full_auditor):
    family = NullHypothesisFamily(family=CurveFamily.EPS_DELTA, delta=0.01)
    lowers = []
    for seed in SEEDS:
        spec = MechanismSpec(kind="rr", eps=3.2, delta=0.01, n=10_000, r=2_000, seed=seed)
        transcript = MechanismService.simulate(spec, full_auditor.config)
        lowers.append(full_auditor.audit_transcript(transcript, family).eps_lower)
    assert sum(eps >= 2.2 for eps in lowers) >= 4
    assert max(lowers) <= 3.2 + 1e-6


def test_accuracy_grows_with_n_at_fixed_r(full_auditor):
    accuracies = []
    for n in (1_000, 10_000, 100_000):
        spec = MechanismSpec(kind="gaussian", sigma=1.0 / 0.8, n=n, r=1_000, seed=0)
        transcript = MechanismService.simulate(spec, full_auditor.config)
        accuracies.append(full_auditor.accuracy(1_000, full_auditor.count_errors(transcript)))
    assert accuracies[0] < accuracies[1] < accuracies[2]


def test_lower_bound_grows_with_n_at_fixed_r(full_auditor):
    medians = []
    for n in (1_000, 10_000, 100_000):
        reports = _audit_seeds(full_auditor, seeds=range(3), kind="gaussian", sigma=1.0 / 0.8, n=n, r=1_000)
        medians.append(np.median([report.eps_lower for report in reports]))
    # 种子噪声
    assert all(later >= earlier - 0.05 for earlier, later in zip(medians, medians[1:]))
    assert medians[-1] > medians[0]


def test_lower_bound_grows_with_r(full_auditor):
    n = 100_000
    medians = []
    for r in (n // 10, n // 5, n // 2, n):
        reports = _audit_seeds(
            full_auditor,
            seeds=range(3),
            report_delta=1e-4,
            kind="gaussian",
            sigma=1.0 / 0.8,
            n=n,
            r=r,
            strategy=GuessStrategy.GENERAL,
        )
        medians.append(np.median([report.eps_lower for report in reports]))
    assert all(later >= earlier - 0.05 for earlier, later in zip(medians, medians[1:]))


@pytest.mark.parametrize("n, r", [(100, 10), (1_000, 200)])
@pytest.mark.parametrize(
    "curve",
    [GaussianTradeoff(0.4), GaussianTradeoff(1.0), EpsDeltaTradeoff(1.0, 0.01)],
    ids=["gdp-0.4", "gdp-1", "epsdelta-1-0.01"],
)
def test_vk_matches_monte_carlo_oracle(curve, n, r):
    pair = BasePairService.build_base_pair(curve, 2 ** 20)
    table = OrderStatsService.compute_vk_table(pair, n, r, AuditSettings(cache_type="memory"))
    mean, stderr = OrderStatsService.simulate_vk_monte_carlo(pair, n, table.ks.tolist(), 10 ** 6, seed=17)
    assert np.all(np.abs(table.v - mean) <= 3.0 * stderr + table.quad_error + table.disc_error)


def test_exact_tail_matches_full_enumeration():
    r = 20
    v = np.random.Generator(np.random.Philox(20)).uniform(0.05, 0.6, r)
    outcomes = ((np.arange(2 ** r)[:, None] >> np.arange(r)) & 1).astype(bool)
    probabilities = np.exp(np.where(outcomes, np.log(v), np.log1p(-v)).sum(axis=1))
    errors = outcomes.sum(axis=1)
    for u in (0, 3, 7, 12):
        expected = float(probabilities[errors <= u].sum())
        assert TailBoundService.exact_poisson_binomial_tail(TailQuery(v, u)) == pytest.approx(expected, rel=1e-10)


def test_true_null_rarely_rejected(full_auditor):
    n, r = 1_000, 100
    curve = GaussianTradeoff(1.0)
    rejected = 0
    for seed in range(1_000):
        spec = MechanismSpec(kind="gaussian", sigma=1.0, n=n, r=r, seed=seed)
        u = full_auditor.count_errors(MechanismService.simulate(spec, full_auditor.config))
        rejected += full_auditor.p_value(n, r, u, curve) <= 0.05
    assert rejected <= 70
