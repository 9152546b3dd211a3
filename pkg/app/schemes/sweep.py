from typing import Iterator, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from app.schemes.curve import CurveFamily
from app.schemes.report import TailMethod
from app.schemes.transcript import GuessStrategy, MechanismKind, MechanismSpec


def resolve_r(n: int, strategy: GuessStrategy, r_frac: Optional[float] = None, r_fixed: Optional[int] = None) -> int:
    """公布数 r：固定值（不超过 n）或 round(r_frac·n)；general 策略取偶数；都未指定时 r = n"""
    if r_fixed is not None:
        r = min(r_fixed, n)
    elif r_frac is not None:
        r = max(1, int(round(r_frac * n)))
    else:
        r = n
    if strategy == GuessStrategy.GENERAL and r % 2:
        r = r - 1 if r > 1 else 2
    return r


class MechanismGrid(BaseModel):
    """一个机制族及其参数列表；values 为族参数 θ（加性噪声为 1/σ 或 1/c，随机响应为 ε）"""
    kind: MechanismKind
    values: List[float] = Field(min_length=1)
    delta: Optional[float] = Field(default=None, ge=0, le=1, description="随机响应的 δ")
    q: Optional[float] = Field(default=None, ge=0, le=1, description="子采样率")
    strategy: GuessStrategy = GuessStrategy.SPECIAL

    @model_validator(mode="after")
    def _check(self):
        if self.kind != MechanismKind.RANDOMIZED_RESPONSE and any(v <= 0 for v in self.values):
            raise ValueError("加性噪声机制的族参数必须为正")
        if self.kind == MechanismKind.RANDOMIZED_RESPONSE and any(v < 0 for v in self.values):
            raise ValueError("ε 必须非负")
        return self

    def spec_for(self, theta: float, n: int, r: int, seed: int) -> MechanismSpec:
        params = {"kind": self.kind, "n": n, "r": r, "seed": seed, "strategy": self.strategy}
        if self.kind == MechanismKind.GAUSSIAN:
            params["sigma"] = 1.0 / theta
        elif self.kind == MechanismKind.LAPLACE:
            params["c"] = 1.0 / theta
        elif self.kind == MechanismKind.RANDOMIZED_RESPONSE:
            params.update(eps=theta, delta=self.delta)
        else:
            params.update(sigma=1.0 / theta, q=self.q)
        return MechanismSpec(**params)


class SweepSpec(BaseModel):
    """批量实验描述：机制网格 × n 列表 × 种子"""
    mechanisms: List[MechanismGrid] = Field(min_length=1)
    n: List[int] = Field(min_length=1)
    r_frac: Optional[float] = Field(default=None, gt=0, le=1, description="r = round(r_frac·n)")
    r_fixed: Optional[int] = Field(default=None, ge=1, description="固定 r")
    report_delta: Optional[float] = Field(default=None, ge=0, le=1, description="为空时使用配置默认值；(ε,δ) 族使用自身 δ")
    significance: float = Field(default=0.05, gt=0, lt=1)
    seeds: int = Field(default=1, ge=1, description="每个单元的种子数")
    seed_base: int = Field(default=0, ge=0)
    tail: TailMethod = TailMethod.CHERNOFF
    family: Optional[CurveFamily] = Field(default=None, description="覆盖默认零假设族")
    output: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        if (self.r_frac is None) == (self.r_fixed is None):
            raise ValueError("r_frac 与 r_fixed 必须且只能指定一个")
        if any(n < 1 for n in self.n):
            raise ValueError("n 必须为正整数")
        # 提前构造全部单元以校验参数
        for _ in self.cells():
            pass
        return self

    def r_for(self, n: int, strategy: GuessStrategy) -> int:
        return resolve_r(n, strategy, self.r_frac, self.r_fixed)

    def cells(self) -> Iterator[Tuple[MechanismGrid, float, MechanismSpec]]:
        """按 (机制, 参数, n, 种子) 的固定顺序展开"""
        for grid in self.mechanisms:
            for theta in grid.values:
                for n in self.n:
                    r = self.r_for(n, grid.strategy)
                    for offset in range(self.seeds):
                        yield grid, theta, grid.spec_for(theta, n, r, self.seed_base + offset)
