"""gnse 的异常层次

每个异常都带有 context 字典，记录出错时的结构化上下文，便于日志和命令行输出。
"""
from typing import Any, Dict, Optional


class GnseError(Exception):
    """所有 gnse 异常的基类"""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def __str__(self) -> str:
        if not self.context:
            return self.message
        context_str = ' '.join(f'{k}={v}' for k, v in self.context.items())
        return f"{self.message} [{context_str}]"


class InputError(GnseError, ValueError):
    """输入形状、尺寸或取值不合法"""


class ConstructionError(InputError):
    """对象构造失败（例如权函数出现非正值）"""


class DomainError(GnseError, ValueError):
    """参数落在算子的定义域之外"""


class UnsupportedRangeError(DomainError):
    """请求超出实现所支持的数值范围"""


class NumericalError(GnseError, RuntimeError):
    """迭代或分解未达到要求的精度"""

    def __init__(self, message: str, residual: Optional[float] = None, **context: Any):
        super().__init__(message, residual=residual, **context)
        self.residual = residual


class StepError(NumericalError):
    """时间推进中某一步的 Picard 迭代不收敛"""

    def __init__(self, message: str, step_index: int, residual: Optional[float] = None, **context: Any):
        super().__init__(message, residual=residual, step_index=step_index, **context)
        self.step_index = step_index


class ResourceError(GnseError, MemoryError):
    """所需存储超出上限"""


class HypothesisError(GnseError):
    """H(g) 不成立，拒绝给出能量证书"""


class ConfigError(InputError):
    """配置文件解析失败，指明键名与行号"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message, key=key, line=line)
        self.key = key
        self.line = line
