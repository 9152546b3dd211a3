import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_serializer

from app.schemes.curve import CurveSpec, NullHypothesisFamily


class TailMethod(str, Enum):
    CHERNOFF = "chernoff"
    EXACT = "exact"


class AuditReport(BaseModel):
    """审计报告；ε = +∞ 序列化为字符串 "inf" """
    n: int
    r: int
    u: int
    accuracy: float = Field(description="公布猜测的正确率 c/r")
    p_value: float = Field(description="拒绝参数处的 p 值；未拒绝任何参数时为 θ=0 处的 p 值")
    significance: float
    family: NullHypothesisFamily
    rejected_param: float = Field(description="能被拒绝的最强族参数 θ*")
    rejected_curve: Optional[CurveSpec] = None
    eps_lower: float
    report_delta: float
    tail_method: TailMethod
    tool_version: str
    grid_size: int
    quad_nodes: int
    monotonicity_fallback: bool = Field(default=False, description="p 值单调性探测失败后改用线性扫描")
    capped: bool = Field(default=False, description="θ* 达到二分上界")

    @field_serializer("eps_lower", "rejected_param")
    def _serialize_inf(self, value: float):
        if math.isinf(value):
            return "inf"
        return value


class BaselineReport(BaseModel):
    """多次运行基线（Clopper-Pearson 置信上限 + (ε,δ) 假设检验界）"""
    fp: int
    fn: int
    trials0: int
    trials1: int
    confidence: float
    delta: float
    alpha_upper: float
    beta_upper: float
    eps_lower: float


class SelfCheckItem(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class SelfCheckReport(BaseModel):
    """自检结果汇总"""
    passed: bool
    items: List[SelfCheckItem]
    runtime_ms: float
