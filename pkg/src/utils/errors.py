"""
异常定义
工具包统一的异常层次，每类异常携带命令行退出码
"""
from typing import List, Optional, Tuple


class ToolkitError(Exception):
    """工具包异常基类"""

    exit_code: int = 4


class ConfigError(ToolkitError, ValueError):
    """配置校验失败"""

    exit_code = 2

    def __init__(self, message: str, field_errors: Optional[List[str]] = None):
        self.field_errors = field_errors or []
        if self.field_errors:
            message = message + "\n" + "\n".join(f"  - {e}" for e in self.field_errors)
        super().__init__(message)


class DataError(ToolkitError, ValueError):
    """数据相关错误"""

    exit_code = 3


class ArgumentError(DataError):
    """参数错误"""


class CorpusValidationError(DataError):
    """语料校验失败，issues 为 (行号, 字段, 说明) 列表"""

    def __init__(self, message: str, issues: Optional[List[Tuple[int, str, str]]] = None):
        self.issues = issues or []
        super().__init__(message)


class CorpusSchemaError(CorpusValidationError):
    """记录缺少字段或格式错误"""


class LabelValueError(CorpusValidationError):
    """标签不在 {0,1} 内"""


class DuplicateIdError(CorpusValidationError):
    """文档ID重复"""


class StratificationError(DataError):
    """分层划分失败"""


class CapacityError(DataError):
    """样本数量不足"""

    def __init__(self, what: str, required: int, available: int):
        self.what = what
        self.required = required
        self.available = available
        super().__init__(f"{what}数量不足: 需要 {required}，可用 {available}")


class AlignmentError(DataError):
    """预测与金标准无法对齐"""


class UndefinedMetricError(DataError):
    """指标无定义（某类别没有金标准样本）"""


class LexiconLoadError(DataError):
    """词表加载失败"""


class SamplingInvariantError(ToolkitError, RuntimeError):
    """采样内部不变量被破坏"""


class TrainingDivergenceError(ToolkitError, RuntimeError):
    """训练发散（损失非有限值）"""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"训练发散: 第 {epoch} 轮损失为 {loss}")


class JobFailureError(ToolkitError, RuntimeError):
    """任务执行失败"""

    exit_code = 4


class GridError(JobFailureError):
    """实验网格无法完成聚合"""
