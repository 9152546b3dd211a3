from enum import Enum
from typing import Optional
from pydantic import BaseModel, Field, model_validator


class CurveFamily(str, Enum):
    """支持的隐私族"""
    GDP = "gdp"
    LAPLACE = "laplace"
    EPS_DELTA = "epsdelta"
    SUBSAMPLED_GDP = "subsampled-gdp"


# 各族需要的参数
REQUIRED_PARAMS = {
    CurveFamily.GDP: ("mu",),
    CurveFamily.LAPLACE: ("mu",),
    CurveFamily.EPS_DELTA: ("eps", "delta"),
    CurveFamily.SUBSAMPLED_GDP: ("mu", "q"),
}


class CurveSpec(BaseModel):
    """权衡曲线的 JSON 描述

    例如 {"family":"gdp","mu":0.8}、{"family":"epsdelta","eps":3.2,"delta":0.01}
    """
    family: CurveFamily
    mu: Optional[float] = Field(default=None, ge=0, description="GDP / Laplace 参数 μ")
    eps: Optional[float] = Field(default=None, ge=0, description="ε")
    delta: Optional[float] = Field(default=None, ge=0, le=1, description="δ")
    q: Optional[float] = Field(default=None, ge=0, le=1, description="子采样率 q")

    @model_validator(mode="after")
    def _check_params(self):
        missing = [name for name in REQUIRED_PARAMS[self.family] if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.family.value} 缺少参数: {', '.join(missing)}")
        return self

    def to_json_dict(self) -> dict:
        return self.model_dump(mode="json", exclude_none=True)


class NullHypothesisFamily(BaseModel):
    """单参数零假设族：θ 为 GDP/Laplace/子采样高斯的 μ，或 (ε,δ) 族在固定 δ 下的 ε"""
    family: CurveFamily
    delta: Optional[float] = Field(default=None, ge=0, le=1, description="(ε,δ) 族的固定 δ")
    q: Optional[float] = Field(default=None, ge=0, le=1, description="子采样高斯族的固定 q")

    @model_validator(mode="after")
    def _check_fixed(self):
        if self.family == CurveFamily.EPS_DELTA and self.delta is None:
            raise ValueError("epsdelta 族需要固定 delta")
        if self.family == CurveFamily.SUBSAMPLED_GDP and self.q is None:
            raise ValueError("subsampled-gdp 族需要固定 q")
        return self

    @property
    def theta_name(self) -> str:
        return "eps" if self.family == CurveFamily.EPS_DELTA else "mu"

    def spec_at(self, theta: float) -> CurveSpec:
        """族在参数 θ 处的曲线描述"""
        if self.family == CurveFamily.EPS_DELTA:
            return CurveSpec(family=self.family, eps=theta, delta=self.delta)
        if self.family == CurveFamily.SUBSAMPLED_GDP:
            return CurveSpec(family=self.family, mu=theta, q=self.q)
        return CurveSpec(family=self.family, mu=theta)
