"""
评估指标工具包
混淆矩阵、按类别的 P/R/F1、宏平均与硬预测 AUC，数值采用百分制
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

from sklearn.metrics import roc_auc_score

from src.utils.errors import AlignmentError, ArgumentError, UndefinedMetricError

logger = logging.getLogger(__name__)

METRIC_FIELDS = ('p0', 'r0', 'f1_0', 'p1', 'r1', 'f1_1', 'p_macro', 'r_macro', 'f1_macro', 'auc')
METRIC_COLUMNS = ('P_0', 'R_0', 'F1_0', 'P_1', 'R_1', 'F1_1', 'P_m', 'R_m', 'F1_m', 'AUC')


@dataclass(frozen=True)
class ConfusionMatrix:
    """二分类混淆矩阵，正类为标签 1"""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ('tp', 'fp', 'fn', 'tn'):
            if getattr(self, name) < 0:
                raise ArgumentError(f"混淆矩阵计数不能为负: {name}={getattr(self, name)}")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    """百分制指标报告；undefined 记录分母为零而按 0 处理的指标"""

    p0: float
    r0: float
    f1_0: float
    p1: float
    r1: float
    f1_1: float
    p_macro: float
    r_macro: float
    f1_macro: float
    auc: float
    undefined: Tuple[str, ...] = field(default=(), compare=False)

    @property
    def zero_division(self) -> bool:
        return bool(self.undefined)

    def values(self) -> List[float]:
        return [getattr(self, name) for name in METRIC_FIELDS]

    def as_dict(self) -> Dict[str, float]:
        """列名 -> 百分制数值"""
        return dict(zip(METRIC_COLUMNS, self.values()))

    def as_fractions(self) -> Dict[str, float]:
        """列名 -> 0-1 小数，供机器读取的 CSV 使用"""
        return {column: value / 100.0 for column, value in self.as_dict().items()}

    @classmethod
    def from_values(cls, values: Sequence[float]) -> 'MetricsReport':
        if len(values) != len(METRIC_FIELDS):
            raise ArgumentError(f"需要 {len(METRIC_FIELDS)} 个指标值，实际 {len(values)}")
        return cls(**dict(zip(METRIC_FIELDS, (float(v) for v in values))))

    def to_dict(self) -> Dict:
        return asdict(self)


def _check_binary(values: Sequence[int], what: str):
    bad = [v for v in values if v not in (0, 1)]
    if bad:
        raise ArgumentError(f"{what} 只能包含 0/1，发现 {bad[:5]}")


def confusion(preds: Sequence[int], gold: Sequence[int]) -> ConfusionMatrix:
    """
    计算混淆矩阵

    Args:
        preds: 预测标签
        gold: 金标准标签，与 preds 按文档对齐

    Returns:
        混淆矩阵
    """
    if len(preds) != len(gold):
        raise AlignmentError(f"预测数 {len(preds)} 与金标准数 {len(gold)} 不一致")
    _check_binary(preds, "预测")
    _check_binary(gold, "金标准")

    tp = fp = fn = tn = 0
    for p, g in zip(preds, gold):
        if p == 1 and g == 1:
            tp += 1
        elif p == 1:
            fp += 1
        elif g == 1:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def confusion_by_id(preds: Mapping[str, int], gold: Mapping[str, int]) -> ConfusionMatrix:
    """按文档ID对齐后计算混淆矩阵，ID集合不一致时报对齐错误"""
    missing = set(gold) - set(preds)
    extra = set(preds) - set(gold)
    if missing or extra:
        raise AlignmentError(
            f"预测与金标准ID不一致: 缺少 {len(missing)} 条 {sorted(missing)[:5]}，"
            f"多出 {len(extra)} 条 {sorted(extra)[:5]}"
        )
    ids = sorted(gold)
    return confusion([preds[i] for i in ids], [gold[i] for i in ids])


def _ratio(numerator: int, denominator: int, name: str, undefined: List[str]) -> float:
    if denominator == 0:
        undefined.append(name)
        return 0.0
    return 100.0 * numerator / denominator


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def report(cm: ConfusionMatrix) -> MetricsReport:
    """
    由混淆矩阵计算完整指标

    分母为零的指标记为 0 并写入 undefined；auc 为硬预测 AUC，与 r_macro 使用同一表达式。
    """
    undefined: List[str] = []
    p1 = _ratio(cm.tp, cm.tp + cm.fp, 'p1', undefined)
    r1 = _ratio(cm.tp, cm.tp + cm.fn, 'r1', undefined)
    p0 = _ratio(cm.tn, cm.tn + cm.fn, 'p0', undefined)
    r0 = _ratio(cm.tn, cm.tn + cm.fp, 'r0', undefined)
    f1_0 = _f1(p0, r0)
    f1_1 = _f1(p1, r1)
    r_macro = (r0 + r1) / 2

    if undefined:
        logger.debug(f"指标分母为零，按 0 处理: {', '.join(undefined)}")

    return MetricsReport(
        p0=p0, r0=r0, f1_0=f1_0,
        p1=p1, r1=r1, f1_1=f1_1,
        p_macro=(p0 + p1) / 2,
        r_macro=r_macro,
        f1_macro=(f1_0 + f1_1) / 2,
        auc=(r0 + r1) / 2,
        undefined=tuple(undefined),
    )


def auc_hard(cm: ConfusionMatrix) -> float:
    """
    硬预测的 ROC-AUC，即平衡准确率 (R_0 + R_1) / 2

    Raises:
        UndefinedMetricError: 某一类没有金标准样本
    """
    if cm.tp + cm.fn == 0 or cm.tn + cm.fp == 0:
        raise UndefinedMetricError(f"AUC 无定义: 正类金标准 {cm.tp + cm.fn}，负类金标准 {cm.tn + cm.fp}")
    r1 = 100.0 * cm.tp / (cm.tp + cm.fn)
    r0 = 100.0 * cm.tn / (cm.tn + cm.fp)
    return (r0 + r1) / 2


def auc_from_scores(gold: Sequence[int], scores: Sequence[float]) -> float:
    """基于概率分数的 ROC-AUC（百分制），与硬预测 AUC 分开报告"""
    if len(gold) != len(scores):
        raise AlignmentError(f"分数数 {len(scores)} 与金标准数 {len(gold)} 不一致")
    _check_binary(gold, "金标准")
    if len(set(gold)) < 2:
        raise UndefinedMetricError("概率 AUC 需要两类金标准样本")
    return 100.0 * float(roc_auc_score(list(gold), list(scores)))
