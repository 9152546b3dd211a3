import json

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.stats import norm

from app.constants.common import SIM_BLOCK_SIZE, STREAM_BITS, STREAM_NOISE
from app.exceptions import DataInvariantError, DomainError
from app.schemes.transcript import MechanismSpec, Transcript, TranscriptFile
from app.services.simulation.mechanism_service import MechanismService
from app.services.tradeoff.curves import LaplaceTradeoff
from app.services.tradeoff.tradeoff_service import TradeoffService


def test_uniform_blocks_independent_of_threading():
    n = 2 * SIM_BLOCK_SIZE + 17
    sequential = MechanismService.uniforms(42, STREAM_NOISE, n, workers=1)
    threaded = MechanismService.uniforms(42, STREAM_NOISE, n, workers=4)
    np.testing.assert_array_equal(sequential, threaded)
    assert np.all((sequential > 0.0) & (sequential < 1.0))


def test_streams_differ_by_purpose_and_seed():
    a = MechanismService.uniforms(1, STREAM_BITS, 100)
    assert not np.array_equal(a, MechanismService.uniforms(1, STREAM_NOISE, 100))
    assert not np.array_equal(a, MechanismService.uniforms(2, STREAM_BITS, 100))
    # 前缀与总长度无关
    np.testing.assert_array_equal(a, MechanismService.uniforms(1, STREAM_BITS, 1000)[:100])


def test_guess_special():
    guesses, scores = MechanismService.guess_special(np.array([-1.0, 0.5, 0.6, 2.0]))
    np.testing.assert_array_equal(guesses, [0, 0, 1, 1])
    np.testing.assert_allclose(scores, [1.5, 0.0, 0.1, 1.5])


def test_guess_general_releases_extremes():
    outputs = np.array([0.3, -2.0, 5.0, 0.1, 0.2, 4.0])
    guesses, scores, released = MechanismService.guess_general(outputs, 4)
    np.testing.assert_array_equal(released, [1, 2, 3, 5])
    np.testing.assert_array_equal(guesses[released], [0, 1, 0, 1])
    assert scores[released].min() >= np.delete(scores, released).max()


def test_guess_general_requires_even_r():
    with pytest.raises(DomainError):
        MechanismService.guess_general(np.zeros(10), 3)


def test_guess_rr_certain_symbols():
    guesses, scores = MechanismService.guess_rr(np.array([0, 1, 2, 3]), 1.5)
    np.testing.assert_array_equal(guesses, [0, 1, 0, 1])
    assert np.isinf(scores[2:]).all()
    np.testing.assert_allclose(scores[:2], 1.5)
    with pytest.raises(DomainError):
        MechanismService.guess_rr(np.array([4]), 1.0)


def test_top_r_ties_broken_by_index():
    released = MechanismService.top_r(np.array([1.0, 3.0, 1.0, 3.0, 1.0]), 3)
    np.testing.assert_array_equal(released, [0, 1, 3])


def test_rr_probabilities():
    keep, flip, certain = MechanismService.rr_probabilities(1.0, 0.1)
    assert keep + flip + certain == pytest.approx(1.0)
    assert keep / flip == pytest.approx(np.e)


@pytest.mark.parametrize(
    "params",
    [
        {"kind": "gaussian", "sigma": 1.0},
        {"kind": "gaussian", "sigma": 1.0, "strategy": "general"},
        {"kind": "laplace", "c": 1.0},
        {"kind": "rr", "eps": 1.0, "delta": 0.05},
        {"kind": "subsampled-gaussian", "sigma": 0.5, "q": 0.2},
    ],
    ids=lambda p: p["kind"] + "-" + p.get("strategy", "special"),
)
def test_simulate_is_deterministic(params):
    spec = MechanismSpec(n=5000, r=1000, seed=9, **params)
    first = MechanismService.simulate(spec)
    second = MechanismService.simulate(spec)
    np.testing.assert_array_equal(first.truths, second.truths)
    np.testing.assert_array_equal(first.guesses, second.guesses)
    np.testing.assert_array_equal(first.released, second.released)
    assert first.r == 1000
    first.check_invariants()


def test_released_guesses_beat_chance():
    spec = MechanismSpec(kind="gaussian", sigma=0.5, n=20000, r=2000, seed=1)
    transcript = MechanismService.simulate(spec)
    released = transcript.released
    accuracy = np.mean(transcript.truths[released] == transcript.guesses[released])
    assert accuracy > 0.9
    assert 0.45 < transcript.truths.mean() < 0.55


def test_rr_certain_guesses_are_correct():
    spec = MechanismSpec(kind="rr", eps=0.5, delta=0.2, n=5000, r=500, seed=4)
    transcript = MechanismService.simulate(spec)
    certain = np.isinf(transcript.scores)
    assert certain.sum() > 500
    np.testing.assert_array_equal(transcript.truths[certain], transcript.guesses[certain])
    assert np.isinf(transcript.scores[transcript.released]).all()


def test_transcript_file_restores_arrays():
    spec = MechanismSpec(kind="rr", eps=1.0, delta=0.1, n=301, r=40, seed=2)
    transcript = MechanismService.simulate(spec)
    restored = TranscriptFile.model_validate_json(transcript.to_file().model_dump_json()).to_transcript()
    np.testing.assert_array_equal(restored.truths, transcript.truths)
    np.testing.assert_array_equal(restored.guesses, transcript.guesses)
    np.testing.assert_array_equal(restored.scores, transcript.scores)
    np.testing.assert_array_equal(restored.released, transcript.released)


def test_transcript_file_records_generator():
    spec = MechanismSpec(kind="gaussian", sigma=1.0, n=64, r=8)
    document = json.loads(MechanismService.simulate(spec).to_file().model_dump_json())
    assert document["version"] == 1
    assert document["generator"]["bit_generator"] == "Philox4x64"
    assert document["released"] == sorted(document["released"])


def test_tampered_transcript_rejected():
    spec = MechanismSpec(kind="gaussian", sigma=1.0, n=100, r=10, seed=5)
    transcript = MechanismService.simulate(spec)
    weakest = int(np.argmin(transcript.scores))
    tampered = Transcript(
        spec=spec,
        truths=transcript.truths,
        guesses=transcript.guesses,
        scores=transcript.scores,
        released=np.append(transcript.released[1:], weakest),
    )
    with pytest.raises(DataInvariantError):
        tampered.check_invariants()


def test_mechanism_spec_validation():
    with pytest.raises(ValidationError):
        MechanismSpec(kind="gaussian", n=10, r=5)
    with pytest.raises(ValidationError):
        MechanismSpec(kind="gaussian", sigma=1.0, n=10, r=11)
    with pytest.raises(ValidationError):
        MechanismSpec(kind="gaussian", sigma=1.0, n=10, r=5, strategy="general")


def _error_rate(spec: MechanismSpec) -> float:
    transcript = MechanismService.simulate(spec)
    return float(np.mean(transcript.truths != transcript.guesses))


def test_gaussian_threshold_error_rate():
    sigma, n = 1.0 / 0.8, 100_000
    expected = norm.cdf(-1.0 / (2.0 * sigma))
    rate = _error_rate(MechanismSpec(kind="gaussian", sigma=sigma, n=n, r=n, seed=12))
    assert abs(rate - expected) <= 4.0 * np.sqrt(expected * (1.0 - expected) / n)


def test_laplace_threshold_error_rate():
    c, n = 1.0 / 0.8, 100_000
    alpha = TradeoffService.fixed_point_alpha_opt(LaplaceTradeoff(1.0 / c))
    rate = _error_rate(MechanismSpec(kind="laplace", c=c, n=n, r=n, seed=13))
    assert abs(rate - alpha) <= 4.0 * np.sqrt(alpha * (1.0 - alpha) / n)
