from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.constants.common import BIT_GENERATOR, TRANSCRIPT_VERSION
from app.exceptions import DataInvariantError
from app.schemes.curve import CurveFamily, NullHypothesisFamily
from app.utils.common import pack_bits, unpack_bits


class MechanismKind(str, Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    RANDOMIZED_RESPONSE = "rr"
    SUBSAMPLED_GAUSSIAN = "subsampled-gaussian"


class GuessStrategy(str, Enum):
    """special：阈值 1/2 + 得分 |输出−1/2|；general：最小 r/2 猜 0、最大 r/2 猜 1"""
    SPECIAL = "special"
    GENERAL = "general"


_REQUIRED = {
    MechanismKind.GAUSSIAN: ("sigma",),
    MechanismKind.LAPLACE: ("c",),
    MechanismKind.RANDOMIZED_RESPONSE: ("eps", "delta"),
    MechanismKind.SUBSAMPLED_GAUSSIAN: ("sigma", "q"),
}


class MechanismSpec(BaseModel):
    """被审计机制及审计博弈的规模"""
    kind: MechanismKind
    sigma: Optional[float] = Field(default=None, gt=0, description="高斯噪声标准差")
    c: Optional[float] = Field(default=None, gt=0, description="Laplace 噪声尺度")
    eps: Optional[float] = Field(default=None, ge=0, description="随机响应的 ε")
    delta: Optional[float] = Field(default=None, ge=0, le=1, description="随机响应的 δ")
    q: Optional[float] = Field(default=None, ge=0, le=1, description="子采样率")
    n: int = Field(ge=1, description="秘密比特数")
    r: int = Field(ge=1, description="公布的猜测数")
    seed: int = Field(default=0, ge=0, lt=2 ** 64, description="随机种子")
    strategy: GuessStrategy = Field(default=GuessStrategy.SPECIAL, description="加性噪声机制的猜测策略")

    @model_validator(mode="after")
    def _check(self):
        missing = [name for name in _REQUIRED[self.kind] if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.kind.value} 缺少参数: {', '.join(missing)}")
        if self.r > self.n:
            raise ValueError(f"r 不能超过 n: r={self.r}, n={self.n}")
        if self.kind != MechanismKind.RANDOMIZED_RESPONSE and self.strategy == GuessStrategy.GENERAL and self.r % 2:
            raise ValueError(f"general 策略要求 r 为偶数: r={self.r}")
        return self

    @property
    def theta(self) -> float:
        """机制真实所处族的参数：加性噪声为 1/σ 或 1/c，随机响应为 ε"""
        if self.kind == MechanismKind.LAPLACE:
            return 1.0 / self.c
        if self.kind == MechanismKind.RANDOMIZED_RESPONSE:
            return self.eps
        return 1.0 / self.sigma

    def null_family(self) -> NullHypothesisFamily:
        """与机制匹配的默认零假设族"""
        if self.kind == MechanismKind.GAUSSIAN:
            return NullHypothesisFamily(family=CurveFamily.GDP)
        if self.kind == MechanismKind.LAPLACE:
            return NullHypothesisFamily(family=CurveFamily.LAPLACE)
        if self.kind == MechanismKind.RANDOMIZED_RESPONSE:
            return NullHypothesisFamily(family=CurveFamily.EPS_DELTA, delta=self.delta)
        return NullHypothesisFamily(family=CurveFamily.SUBSAMPLED_GDP, q=self.q)

    def describe(self) -> str:
        params = self.model_dump(exclude_none=True, exclude={"kind", "n", "r", "seed", "strategy"})
        text = ", ".join(f"{k}={v:g}" for k, v in params.items())
        return f"{self.kind.value}({text})"


@dataclass(frozen=True, eq=False)
class Transcript:
    """一次审计博弈的记录；scores 中 inf 表示确定的猜测"""

    spec: MechanismSpec
    truths: np.ndarray
    guesses: np.ndarray
    scores: np.ndarray
    released: np.ndarray

    @property
    def n(self) -> int:
        return int(self.truths.size)

    @property
    def r(self) -> int:
        return int(self.released.size)

    def check_invariants(self):
        """长度一致、公布集合合法，且公布得分的最小值 ≥ 未公布得分的最大值"""
        n = self.n
        if self.guesses.size != n or self.scores.size != n:
            raise DataInvariantError(f"truths/guesses/scores 长度不一致: {n}, {self.guesses.size}, {self.scores.size}")
        if n != self.spec.n or self.r != self.spec.r:
            raise DataInvariantError(f"转录规模与机制描述不符: n={n}/{self.spec.n}, r={self.r}/{self.spec.r}")
        if np.any(self.scores < 0) or np.any(np.isnan(self.scores)):
            raise DataInvariantError("得分必须非负")
        released = self.released
        if released.size and (released.min() < 0 or released.max() >= n):
            raise DataInvariantError("公布下标越界")
        if np.unique(released).size != released.size:
            raise DataInvariantError("公布下标重复")
        if released.size < n:
            mask = np.ones(n, dtype=bool)
            mask[released] = False
            if self.scores[released].min() < self.scores[mask].max():
                raise DataInvariantError("过滤条件不成立: 公布得分最小值小于未公布得分最大值")

    def to_file(self) -> "TranscriptFile":
        finite = self.scores[np.isfinite(self.scores)]
        sentinel = float(finite.max()) + 1.0 if finite.size else 1.0
        certain = ~np.isfinite(self.scores)
        return TranscriptFile(
            version=TRANSCRIPT_VERSION,
            spec=self.spec,
            truths=pack_bits(self.truths),
            guesses=pack_bits(self.guesses),
            certain=pack_bits(certain),
            scores=np.where(certain, sentinel, self.scores).tolist(),
            released=np.sort(self.released).tolist(),
            generator={"bit_generator": BIT_GENERATOR, "numpy": np.__version__},
        )


class TranscriptFile(BaseModel):
    """转录文件：位串为 numpy.packbits 后的 base64"""
    version: int = TRANSCRIPT_VERSION
    spec: MechanismSpec
    truths: str
    guesses: str
    certain: str = ""
    scores: List[float]
    released: List[int]
    generator: Dict[str, Any] = Field(default_factory=dict)

    def to_transcript(self) -> Transcript:
        if self.version != TRANSCRIPT_VERSION:
            raise DataInvariantError(f"不支持的转录版本: {self.version}")
        n = self.spec.n
        try:
            truths = unpack_bits(self.truths, n)
            guesses = unpack_bits(self.guesses, n)
            certain = unpack_bits(self.certain, n).astype(bool) if self.certain else np.zeros(n, dtype=bool)
        except ValueError as e:
            raise DataInvariantError(f"位串解码失败: {e}") from e
        scores = np.asarray(self.scores, dtype=float)
        if scores.size != n:
            raise DataInvariantError(f"scores 长度 {scores.size} 与 n={n} 不符")
        transcript = Transcript(
            spec=self.spec,
            truths=truths,
            guesses=guesses,
            scores=np.where(certain, np.inf, scores),
            released=np.asarray(self.released, dtype=np.int64),
        )
        transcript.check_invariants()
        return transcript
