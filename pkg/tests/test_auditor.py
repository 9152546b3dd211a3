import math
import threading

import numpy as np
import pytest
from scipy.stats import norm

from app.exceptions import DataInvariantError, DomainError
from app.infrastructure.storage.memory_connect import MemoryStorage
from app.schemes.curve import CurveFamily, NullHypothesisFamily
from app.schemes.report import TailMethod
from app.schemes.transcript import MechanismSpec, Transcript
from app.services.audit.auditor_service import AuditorService
from app.services.audit.baseline_service import BaselineService
from app.services.audit.orderstats_service import OrderStatsService
from app.services.audit.vk_cache_service import VkCacheService
from app.services.simulation.mechanism_service import MechanismService
from app.services.tradeoff.curves import GaussianTradeoff, perfect_privacy
from app.services.tradeoff.tradeoff_service import TradeoffService

GDP = NullHypothesisFamily(family=CurveFamily.GDP)


def _fake_p_value(rule):
    def p_value(n, r, u, curve, method=TailMethod.CHERNOFF, config=None):
        return rule(curve.to_spec().mu if curve.to_spec().mu is not None else curve.to_spec().eps)
    return p_value


def test_count_errors_uses_released_only():
    spec = MechanismSpec(kind="gaussian", sigma=1.0, n=4, r=2)
    transcript = Transcript(
        spec=spec,
        truths=np.array([0, 1, 0, 1], dtype=np.uint8),
        guesses=np.array([1, 1, 1, 0], dtype=np.uint8),
        scores=np.array([0.1, 2.0, 0.2, 1.5]),
        released=np.array([1, 3]),
    )
    assert AuditorService.count_errors(transcript) == 1


def test_count_errors_rejects_bad_filtering():
    spec = MechanismSpec(kind="gaussian", sigma=1.0, n=3, r=1)
    transcript = Transcript(
        spec=spec,
        truths=np.zeros(3, dtype=np.uint8),
        guesses=np.zeros(3, dtype=np.uint8),
        scores=np.array([0.5, 0.9, 0.1]),
        released=np.array([0]),
    )
    with pytest.raises(DataInvariantError):
        AuditorService.count_errors(transcript)


def test_p_value_trivial_when_all_wrong(auditor):
    assert auditor.p_value(100, 10, 10, GaussianTradeoff(1.0)) == 1.0


def test_p_value_perfect_privacy_is_binomial(auditor):
    p = auditor.p_value(50, 20, 3, perfect_privacy(), TailMethod.EXACT)
    expected = sum(math.comb(20, j) for j in range(4)) / 2 ** 20
    assert p == pytest.approx(expected, rel=1e-12)


def test_p_value_nondecreasing_in_mu(auditor):
    values = [auditor.p_value(500, 100, 10, GaussianTradeoff(mu)) for mu in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))


def test_exact_tail_never_looser(auditor):
    curve = GaussianTradeoff(1.0)
    assert auditor.p_value(500, 100, 20, curve, TailMethod.EXACT) <= auditor.p_value(500, 100, 20, curve) + 1e-15


def test_expected_errors(auditor):
    assert auditor.expected_errors(100, 40, perfect_privacy()) == 20.0
    strong = auditor.expected_errors(1000, 100, GaussianTradeoff(2.0))
    assert 0.0 < strong < 100 * norm.cdf(-1.0)


def test_invalid_sizes(auditor):
    with pytest.raises(DomainError):
        auditor.p_value(10, 20, 0, GaussianTradeoff(1.0))
    with pytest.raises(DomainError):
        auditor.lower_bound_search(100, 10, 0, GDP, significance=1.5)


def test_half_wrong_gives_zero_bound(auditor):
    report = auditor.lower_bound_search(100, 100, 50, GDP, report_delta=1e-5)
    assert report.eps_lower == 0.0
    assert report.rejected_param == 0.0
    assert report.rejected_curve is None
    assert report.p_value > 0.05


def test_all_correct_gives_positive_bound(auditor):
    report = auditor.lower_bound_search(1000, 100, 0, GDP, report_delta=1e-5)
    assert report.rejected_param > 0.0
    assert report.p_value <= 0.05
    assert report.rejected_curve.mu == report.rejected_param
    assert report.eps_lower == pytest.approx(
        TradeoffService.fdp_to_eps_delta(GaussianTradeoff(report.rejected_param), 1e-5)
    )
    assert not report.monotonicity_fallback and not report.capped
    assert report.accuracy == 1.0


def test_more_errors_weaker_bound(auditor):
    few = auditor.lower_bound_search(1000, 100, 2, GDP, report_delta=1e-5)
    many = auditor.lower_bound_search(1000, 100, 15, GDP, report_delta=1e-5)
    assert few.eps_lower >= many.eps_lower


def test_bisection_brackets_threshold(auditor, monkeypatch):
    monkeypatch.setattr(auditor, "p_value", _fake_p_value(lambda mu: 0.01 if mu <= 2.0 else 0.5))
    report = auditor.lower_bound_search(100, 10, 0, GDP)
    assert 2.0 * (1.0 - 2e-4) <= report.rejected_param <= 2.0
    assert report.p_value == 0.01


def test_capped_when_everything_rejected(auditor, monkeypatch):
    monkeypatch.setattr(auditor, "p_value", _fake_p_value(lambda mu: 0.0))
    report = auditor.lower_bound_search(100, 10, 0, GDP)
    assert report.capped
    assert report.rejected_param == auditor.config.theta_max


def test_non_monotone_p_values_fall_back_to_scan(auditor, monkeypatch):
    monkeypatch.setattr(auditor, "p_value", _fake_p_value(lambda mu: 0.5 if 1.0 <= mu <= 5.0 else 0.01))
    report = auditor.lower_bound_search(100, 10, 0, GDP)
    assert report.monotonicity_fallback
    step = auditor.config.theta_max / auditor.config.fallback_scan_steps
    assert report.rejected_param == pytest.approx(3 * step)


def test_eps_delta_family_reports_at_its_own_delta(auditor, monkeypatch):
    family = NullHypothesisFamily(family=CurveFamily.EPS_DELTA, delta=0.01)
    monkeypatch.setattr(auditor, "p_value", _fake_p_value(lambda eps: 0.01 if eps <= 1.5 else 0.5))
    report = auditor.lower_bound_search(100, 10, 0, family)
    assert report.report_delta == 0.01
    assert report.eps_lower == pytest.approx(report.rejected_param, abs=1e-6)


def test_audit_transcript_end_to_end(auditor):
    spec = MechanismSpec(kind="gaussian", sigma=0.5, n=2000, r=200, seed=3)
    transcript = MechanismService.simulate(spec, auditor.config)
    report = auditor.audit_transcript(transcript, report_delta=1e-5)
    assert report.family == spec.null_family()
    assert report.u == auditor.count_errors(transcript)
    assert report.accuracy == pytest.approx((200 - report.u) / 200)
    assert report.eps_lower >= 0.0


def test_report_serializes_infinity(auditor, monkeypatch):
    family = NullHypothesisFamily(family=CurveFamily.EPS_DELTA, delta=0.01)
    monkeypatch.setattr(auditor, "p_value", _fake_p_value(lambda eps: 0.01 if eps <= 1.0 else 0.5))
    report = auditor.lower_bound_search(100, 10, 0, family, report_delta=1e-5)
    assert math.isinf(report.eps_lower)
    assert '"eps_lower":"inf"' in report.model_dump_json()


class TestBaseline:
    def test_random_guessing_gives_zero(self):
        assert BaselineService.clopper_pearson_eps(500, 500, 1000, 1000).eps_lower == 0.0

    def test_perfect_attack_is_positive(self):
        report = BaselineService.clopper_pearson_eps(0, 0, 100, 100, 0.95, 0.0)
        alpha = 1.0 - 0.025 ** (1.0 / 100)
        assert report.alpha_upper == pytest.approx(alpha, rel=1e-9)
        assert report.eps_lower == pytest.approx(math.log((1.0 - alpha) / alpha), rel=1e-9)

    def test_all_failures_upper_limit_is_one(self):
        assert BaselineService.clopper_pearson_upper(10, 10, 0.95) == 1.0

    def test_zero_trials(self):
        with pytest.raises(DomainError):
            BaselineService.clopper_pearson_eps(0, 0, 0, 10)

    def test_delta_reduces_bound(self):
        loose = BaselineService.clopper_pearson_eps(5, 5, 1000, 1000, 0.95, 0.0).eps_lower
        tight = BaselineService.clopper_pearson_eps(5, 5, 1000, 1000, 0.95, 0.1).eps_lower
        assert tight < loose


def test_threshold_below_rounding_resolution(auditor, monkeypatch):
    monkeypatch.setattr(auditor, "p_value", _fake_p_value(lambda mu: 0.01 if mu <= 3e-7 else 0.5))
    report = auditor.lower_bound_search(100, 10, 0, GDP, report_delta=1e-5)
    assert 3e-7 * (1.0 - 2e-4) <= report.rejected_param <= 3e-7
    assert report.rejected_curve.mu == report.rejected_param
    assert report.p_value == 0.01


def test_only_zero_rejected(auditor, monkeypatch):
    monkeypatch.setattr(auditor, "p_value", _fake_p_value(lambda mu: 0.01 if mu == 0.0 else 0.5))
    report = auditor.lower_bound_search(100, 10, 0, GDP, report_delta=1e-5)
    assert report.rejected_param == 0.0
    assert report.p_value == 0.01
    assert report.rejected_curve is not None and report.rejected_curve.mu == 0.0
    assert report.eps_lower == 0.0


@pytest.mark.parametrize("hint", [None, 2.0, 2.03, 7.5])
def test_bisection_hint_keeps_precision(small_settings, cache, monkeypatch, hint):
    auditor = AuditorService(small_settings.model_copy(update={"workers": 4}), cache)
    calls = []

    def rule(mu):
        calls.append(mu)
        return 0.01 if mu <= 2.0 else 0.5

    monkeypatch.setattr(auditor, "p_value", _fake_p_value(rule))
    report = auditor.lower_bound_search(100, 10, 0, GDP, theta_hint=hint)
    assert 2.0 * (1.0 - 2e-4) <= report.rejected_param <= 2.0
    if hint == 2.0:
        # 首轮即命中阈值附近，之后的区间宽度只有 hint 的百分之一
        assert len(set(calls)) <= 1 + small_settings.probe_count + 4 * small_settings.bisect_sections


def test_search_result_independent_of_workers(small_settings, cache):
    sequential = AuditorService(small_settings, cache).lower_bound_search(1000, 100, 5, GDP, report_delta=1e-5)
    threaded = AuditorService(small_settings.model_copy(update={"workers": 4}), VkCacheService(MemoryStorage()))
    report = threaded.lower_bound_search(1000, 100, 5, GDP, report_delta=1e-5)
    assert threaded.cache.misses > 0
    assert report.rejected_param == sequential.rejected_param
    assert report.eps_lower == sequential.eps_lower


def test_parallel_search_computes_tables_single_threaded(small_settings, cache, monkeypatch):
    seen = []
    original = OrderStatsService.compute_vk_table

    def recording(pair, n, r, config=None):
        seen.append((threading.current_thread() is threading.main_thread(), config.workers))
        return original(pair, n, r, config)

    monkeypatch.setattr(OrderStatsService, "compute_vk_table", staticmethod(recording))
    auditor = AuditorService(small_settings.model_copy(update={"workers": 4}), cache)
    auditor.lower_bound_search(500, 50, 2, GDP, report_delta=1e-5)
    pooled = [workers for in_main, workers in seen if not in_main]
    assert pooled and set(pooled) == {1}
