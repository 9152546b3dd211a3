"""
审计机制模拟

随机数使用 numpy 的 Philox 计数器生成器：密钥 = seed + (用途 << 64)，
每 SIM_BLOCK_SIZE 个坐标一个块，块号写入计数器高位。各块相互独立，
并行生成与顺序生成结果完全一致。高斯与 Laplace 噪声都由均匀数逆 CDF 得到。
"""
import logging
import math
from concurrent import futures
from typing import Optional, Tuple

import numpy as np
from scipy.stats import laplace, norm

from app.config.settings import AuditSettings, settings as default_settings
from app.constants.common import SIM_BLOCK_SIZE, STREAM_BITS, STREAM_NOISE, STREAM_SUBSAMPLE
from app.exceptions import DomainError
from app.schemes.transcript import GuessStrategy, MechanismKind, MechanismSpec, Transcript

# 保证均匀数落在开区间 (0,1)
_OPEN_OFFSET = 2.0 ** -54


class MechanismService:
    """机制模拟与猜测策略"""

    @staticmethod
    def _uniform_block(seed: int, purpose: int, block: int, size: int) -> np.ndarray:
        bit_generator = np.random.Philox(key=seed + (purpose << 64), counter=block << 32)
        return np.random.Generator(bit_generator).random(size) + _OPEN_OFFSET

    @staticmethod
    def uniforms(seed: int, purpose: int, n: int, workers: int = 1) -> np.ndarray:
        """用途为 purpose 的 n 个 (0,1) 均匀数"""
        sizes = [min(SIM_BLOCK_SIZE, n - start) for start in range(0, n, SIM_BLOCK_SIZE)]
        if workers <= 1 or len(sizes) == 1:
            blocks = [MechanismService._uniform_block(seed, purpose, i, size) for i, size in enumerate(sizes)]
        else:
            with futures.ThreadPoolExecutor(max_workers=workers) as executor:
                blocks = list(executor.map(
                    lambda item: MechanismService._uniform_block(seed, purpose, item[0], item[1]), enumerate(sizes)
                ))
        return np.concatenate(blocks) if blocks else np.empty(0)

    @staticmethod
    def rr_probabilities(eps: float, delta: float) -> Tuple[float, float, float]:
        """随机响应输出真实比特、翻转比特、确定性符号（2 或 3）的概率"""
        keep = (1.0 - delta) * math.exp(eps) / (1.0 + math.exp(eps)) if eps < 700 else 1.0 - delta
        flip = (1.0 - delta) / (1.0 + math.exp(eps)) if eps < 700 else 0.0
        return keep, flip, delta

    @staticmethod
    def mechanism_outputs(spec: MechanismSpec, workers: int = 1) -> Tuple[np.ndarray, np.ndarray]:
        """返回 (秘密比特, 机制输出)"""
        n = spec.n
        truths = (MechanismService.uniforms(spec.seed, STREAM_BITS, n, workers) < 0.5).astype(np.uint8)
        noise_u = MechanismService.uniforms(spec.seed, STREAM_NOISE, n, workers)

        if spec.kind == MechanismKind.GAUSSIAN:
            outputs = truths + spec.sigma * norm.ppf(noise_u)
        elif spec.kind == MechanismKind.LAPLACE:
            outputs = truths + laplace.ppf(noise_u, scale=spec.c)
        elif spec.kind == MechanismKind.SUBSAMPLED_GAUSSIAN:
            kept = MechanismService.uniforms(spec.seed, STREAM_SUBSAMPLE, n, workers) < spec.q
            outputs = truths * kept + spec.sigma * norm.ppf(noise_u)
        else:
            keep, flip, _ = MechanismService.rr_probabilities(spec.eps, spec.delta)
            outputs = np.where(
                noise_u < keep,
                truths,
                np.where(noise_u < keep + flip, 1 - truths, 2 + truths),
            ).astype(np.uint8)
        return truths, outputs

    @staticmethod
    def guess_special(outputs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """输出 ≤ 1/2 猜 0，否则猜 1；得分 |输出 − 1/2|"""
        outputs = np.asarray(outputs, dtype=float)
        return (outputs > 0.5).astype(np.uint8), np.abs(outputs - 0.5)

    @staticmethod
    def guess_general(outputs: np.ndarray, r: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        最小的 r/2 个输出猜 0，最大的 r/2 个猜 1

        得分为秩到中位位置的距离 |rank − (n−1)/2|，公布集合的得分严格大于其余坐标；
        相同输出按下标稳定排序。
        """
        outputs = np.asarray(outputs, dtype=float)
        n = outputs.size
        if r % 2:
            raise DomainError(f"general 策略要求 r 为偶数: r={r}")
        if r < 2 or r > n:
            raise DomainError(f"要求 2 ≤ r ≤ n: r={r}, n={n}")
        order = np.argsort(outputs, kind="stable")
        rank = np.empty(n, dtype=np.int64)
        rank[order] = np.arange(n)
        half = r // 2
        guesses = (2 * rank >= n).astype(np.uint8)
        scores = np.abs(rank - (n - 1) / 2.0)
        released = np.sort(np.concatenate((order[:half], order[n - half:])))
        return guesses, scores, released

    @staticmethod
    def guess_rr(outputs: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray]:
        """输出 0/2 猜 0，1/3 猜 1；2/3 只可能来自对应比特，得分为 +inf，其余为 ε"""
        symbols = np.asarray(outputs)
        if np.any((symbols < 0) | (symbols > 3)):
            raise DomainError("随机响应输出必须属于 {0,1,2,3}")
        guesses = (symbols % 2).astype(np.uint8)
        scores = np.where(symbols >= 2, np.inf, float(eps))
        return guesses, scores

    @staticmethod
    def top_r(scores: np.ndarray, r: int) -> np.ndarray:
        """得分最高的 r 个下标（得分降序、下标升序），返回升序下标"""
        scores = np.asarray(scores, dtype=float)
        order = np.lexsort((np.arange(scores.size), -scores))
        return np.sort(order[:r])

    @staticmethod
    def simulate(spec: MechanismSpec, config: Optional[AuditSettings] = None) -> Transcript:
        """运行机制、生成猜测并做 top-r 过滤；给定种子结果确定"""
        config = config or default_settings
        truths, outputs = MechanismService.mechanism_outputs(spec, config.workers)

        if spec.kind == MechanismKind.RANDOMIZED_RESPONSE:
            guesses, scores = MechanismService.guess_rr(outputs, spec.eps)
            released = MechanismService.top_r(scores, spec.r)
        elif spec.strategy == GuessStrategy.GENERAL:
            guesses, scores, released = MechanismService.guess_general(outputs, spec.r)
        else:
            guesses, scores = MechanismService.guess_special(outputs)
            released = MechanismService.top_r(scores, spec.r)

        transcript = Transcript(spec=spec, truths=truths, guesses=guesses, scores=scores, released=released)
        transcript.check_invariants()
        logging.info(f"模拟完成: {spec.describe()}, n={spec.n}, r={spec.r}, seed={spec.seed}")
        return transcript
