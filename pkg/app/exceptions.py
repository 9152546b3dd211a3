from typing import Optional
from app.constants.common import EXIT_USAGE, EXIT_DATA_INVARIANT, EXIT_NUMERICAL


class AuditException(Exception):
    """审计异常基类：携带退出码和详情"""

    exit_code: int = EXIT_NUMERICAL

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class UsageError(AuditException):
    """参数或命令使用错误"""

    exit_code = EXIT_USAGE


class DomainError(UsageError, ValueError):
    """输入超出定义域（x ∉ [0,1]、μ < 0、δ ∉ [0,1] 等）"""


class DataInvariantError(AuditException):
    """数据不变量被破坏（例如转录违反过滤条件）"""

    exit_code = EXIT_DATA_INVARIANT


class NumericalError(AuditException, RuntimeError):
    """数值计算失败（二分不收敛、求积误差过大等）"""

    exit_code = EXIT_NUMERICAL


class ResourceBudgetError(NumericalError):
    """计算量超出预算"""
