"""
集成投票与跨种子聚合
多个模型种子对每个文档投票，按多数决定最终标签；指标在采样种子之间取均值与标准差
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.tools.metrics_tools import METRIC_FIELDS, MetricsReport
from src.tools.sampling_tools import FewShotSpec
from src.utils.errors import ArgumentError

logger = logging.getLogger(__name__)

DEFAULT_MODEL_SEEDS = [78, 99, 227, 409, 422, 482, 485, 841, 857, 910]
DEFAULT_SAMPLING_SEEDS = [1, 2, 3, 4, 5]


class TieBreak(str, Enum):
    """平票处理"""
    POSITIVE = "positive"
    NEGATIVE = "negative"


class EnsembleSpec(BaseModel):
    """
    集成实验描述

    默认 10 个模型种子 × 5 个采样种子；偶数个投票者可能平票，由 tie_break 决定。
    """

    model_config = ConfigDict(frozen=True)

    model_seeds: List[int] = Field(default_factory=lambda: list(DEFAULT_MODEL_SEEDS))
    sampling_seeds: List[int] = Field(default_factory=lambda: list(DEFAULT_SAMPLING_SEEDS))
    fewshot_spec: Optional[FewShotSpec] = None
    tie_break: TieBreak = TieBreak.POSITIVE
    std_ddof: int = Field(default=1, ge=0)

    @field_validator('model_seeds', 'sampling_seeds')
    @classmethod
    def _distinct(cls, seeds: List[int]) -> List[int]:
        if not seeds:
            raise ValueError("种子列表不能为空")
        if len(set(seeds)) != len(seeds):
            raise ValueError(f"种子重复: {seeds}")
        return seeds

    @property
    def may_tie(self) -> bool:
        return len(self.model_seeds) % 2 == 0


@dataclass(frozen=True)
class VoteRecord:
    """单个文档的投票结果"""

    doc_id: str
    votes: tuple
    final: int
    was_tie: bool


@dataclass
class AggregateResult:
    """跨采样种子的聚合结果；只有一个种子时 std_report 为空"""

    per_seed_reports: List[MetricsReport]
    mean_report: MetricsReport
    std_report: Optional[MetricsReport]
    seeds: List[int] = field(default_factory=list)


def majority_vote(votes_per_doc: Mapping[str, Sequence[int]],
                  tie_break: TieBreak = TieBreak.POSITIVE) -> List[VoteRecord]:
    """
    多数投票

    Args:
        votes_per_doc: 文档ID -> 各模型的 0/1 预测，长度必须一致
        tie_break: 平票时的取值

    Returns:
        按输入顺序的投票记录
    """
    tie_break = TieBreak(tie_break)
    lengths = {len(v) for v in votes_per_doc.values()}
    if len(lengths) > 1:
        raise ArgumentError(f"各文档投票数不一致: {sorted(lengths)}")
    if lengths and lengths.pop() < 1:
        raise ArgumentError("每个文档至少需要一票")

    records = []
    n_ties = 0
    for doc_id, votes in votes_per_doc.items():
        counts = Counter(int(v) for v in votes)
        if set(counts) - {0, 1}:
            raise ArgumentError(f"文档 {doc_id} 的投票只能为 0/1: {list(votes)}")
        was_tie = counts[1] == counts[0]
        if was_tie:
            final = 1 if tie_break == TieBreak.POSITIVE else 0
            n_ties += 1
        else:
            final = 1 if counts[1] > counts[0] else 0
        records.append(VoteRecord(doc_id=doc_id, votes=tuple(int(v) for v in votes), final=final, was_tie=was_tie))

    if n_ties:
        logger.warning(f"{n_ties} 个文档平票，按 {tie_break.value} 处理")
    return records


def std_dev(values: Sequence[float], ddof: int = 1) -> float:
    """标准差，默认样本标准差 (n-1)"""
    if len(values) < 2:
        raise ArgumentError(f"标准差至少需要 2 个值，实际 {len(values)}")
    array = np.asarray(values, dtype=float)
    if np.all(array == array[0]):
        return 0.0
    return float(np.std(array, ddof=ddof))


def aggregate_reports(reports: Sequence[MetricsReport], seeds: Optional[Sequence[int]] = None,
                      ddof: int = 1) -> AggregateResult:
    """
    逐字段计算均值与标准差

    Args:
        reports: 每个采样种子一个报告，至少 2 个
        seeds: 对应的采样种子
        ddof: 标准差自由度修正

    Returns:
        聚合结果
    """
    if len(reports) < 2:
        raise ArgumentError(f"聚合至少需要 2 个种子的报告，实际 {len(reports)}")
    matrix = np.array([r.values() for r in reports], dtype=float)
    # 浮点累加误差不能让均值越出各种子取值范围
    means = np.clip(matrix.mean(axis=0), matrix.min(axis=0), matrix.max(axis=0))
    mean_report = MetricsReport.from_values(means.tolist())
    std_report = MetricsReport.from_values([std_dev(matrix[:, i].tolist(), ddof) for i in range(len(METRIC_FIELDS))])
    return AggregateResult(per_seed_reports=list(reports), mean_report=mean_report,
                           std_report=std_report, seeds=list(seeds or []))


def single_result(report: MetricsReport, seed: Optional[int] = None) -> AggregateResult:
    """只有一次结果（如零样本）时的聚合形式，不计算标准差"""
    return AggregateResult(per_seed_reports=[report], mean_report=report, std_report=None,
                           seeds=[seed] if seed is not None else [])


def mean_scores(scores_per_doc: Mapping[str, Sequence[float]]) -> Dict[str, float]:
    """各模型正类分数的平均，用于可选的概率 AUC"""
    return {doc_id: float(np.mean(scores)) for doc_id, scores in scores_per_doc.items()}
