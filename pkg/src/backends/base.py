"""
分类器后端契约
训练配置、预测结果、模型与后端抽象类，以及两阶段微调的通用训练循环
"""
import logging
import math
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from src.tools.corpus_tools import Corpus
from src.tools.metrics_tools import confusion, report
from src.tools.preprocess_tools import ProcessedDocument, to_processed
from src.utils.errors import ArgumentError, TrainingDivergenceError

logger = logging.getLogger(__name__)

DECISION_THRESHOLD = 0.5


class FreezePolicy(str, Enum):
    """冻结策略"""
    ALL_BUT_CLASSIFIER = "all_but_classifier"
    NONE = "none"


class TrainSampler(str, Enum):
    """训练采样器"""
    RANDOM = "random"
    CLASS_WEIGHTED = "class_weighted"


class TrainConfig(BaseModel):
    """单次训练的超参数"""

    model_config = ConfigDict(frozen=True, protected_namespaces=())

    learning_rate: float = Field(gt=0)
    batch_size: int = Field(ge=1)
    freeze_policy: FreezePolicy = FreezePolicy.ALL_BUT_CLASSIFIER
    train_sampler: TrainSampler = TrainSampler.RANDOM
    max_epochs: int = Field(default=10, ge=1)
    patience: int = Field(default=3, ge=1)
    model_seed: int = 0
    model_id: str = "stub-encoder"

    def with_seed(self, model_seed: int) -> 'TrainConfig':
        return self.model_copy(update={'model_seed': model_seed})


# 多语言编码器在英语源数据上的第一阶段配置，以及德语全量数据配置
TRAIN_PRESETS = {
    'xlmr_stage1': TrainConfig(learning_rate=0.00001056, batch_size=7,
                               freeze_policy=FreezePolicy.ALL_BUT_CLASSIFIER,
                               train_sampler=TrainSampler.RANDOM, model_id='xlm-roberta-base'),
    'brb_stage1': TrainConfig(learning_rate=0.00001584, batch_size=8,
                              freeze_policy=FreezePolicy.ALL_BUT_CLASSIFIER,
                              train_sampler=TrainSampler.RANDOM,
                              model_id='cambridgeltl/BioRedditBERT-uncased'),
    'xlmr_full': TrainConfig(learning_rate=0.00001056, batch_size=7,
                             freeze_policy=FreezePolicy.NONE,
                             train_sampler=TrainSampler.CLASS_WEIGHTED, model_id='xlm-roberta-base'),
}


@dataclass(frozen=True)
class Prediction:
    """单文档预测，label == 1 当且仅当 score >= 0.5"""

    doc_id: str
    label: int
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ArgumentError(f"预测分数越界: {self.doc_id} {self.score}")
        if self.label != int(self.score >= DECISION_THRESHOLD):
            raise ArgumentError(f"预测标签与分数不一致: {self.doc_id} label={self.label} score={self.score}")

    @classmethod
    def from_score(cls, doc_id: str, score: float) -> 'Prediction':
        score = float(min(1.0, max(0.0, score)))
        return cls(doc_id=doc_id, label=int(score >= DECISION_THRESHOLD), score=score)


@dataclass(frozen=True)
class BackendCapabilities:
    supports_freezing: bool
    supports_class_weights: bool
    is_multilingual: bool
    two_stage: bool = True


@dataclass
class EpochLog:
    epoch: int
    loss: float
    dev_f1_macro: float


class TrainedModel(ABC):
    """训练完成的模型，训练结束后不再修改"""

    backend_name: str = "base"

    def __init__(self, config: TrainConfig):
        self.config = config
        self.backend: Optional['ClassifierBackend'] = None
        self.training_log: List[EpochLog] = []
        self.best_epoch: Optional[int] = None

    @abstractmethod
    def predict_scores(self, docs: Sequence[ProcessedDocument]) -> np.ndarray:
        """返回正类分数，取值 [0,1]"""

    @abstractmethod
    def save(self, path: str) -> str:
        """保存模型到目录"""

    def encoder_checksum(self) -> Optional[str]:
        return None

    def classifier_checksum(self) -> Optional[str]:
        return None

    def save_training_log(self, path: str) -> str:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        frame = pd.DataFrame([vars(entry) for entry in self.training_log],
                             columns=['epoch', 'loss', 'dev_f1_macro'])
        frame.to_csv(path, index=False, encoding='utf-8')
        return path


class NeuralModel(TrainedModel):
    """可按轮训练的模型（编码器 + 分类头）"""

    @abstractmethod
    def apply_freeze(self, policy: FreezePolicy):
        """按冻结策略设置可训练参数"""

    @abstractmethod
    def begin_training(self, config: TrainConfig):
        """训练开始前的准备（随机种子、优化器等）"""

    @abstractmethod
    def train_epoch(self, batches: List[Tuple[List[ProcessedDocument], np.ndarray]]) -> float:
        """训练一轮，返回平均损失"""

    @abstractmethod
    def snapshot(self) -> Any:
        """当前参数的副本"""

    @abstractmethod
    def restore(self, state: Any):
        """恢复 snapshot 得到的参数"""

    @abstractmethod
    def clone(self) -> 'NeuralModel':
        """深拷贝，第二阶段在副本上训练"""


class ClassifierBackend(ABC):
    """可训练的二分类后端"""

    name: str = "base"
    capabilities = BackendCapabilities(False, False, False)

    @abstractmethod
    def train(self, train: Corpus, dev: Corpus, config: TrainConfig,
              init: Optional[TrainedModel] = None) -> TrainedModel:
        """训练模型；init 非空时在其副本上继续训练"""

    @abstractmethod
    def load_model(self, path: str) -> TrainedModel:
        """从目录加载模型"""


def epoch_order(labels: np.ndarray, sampler: TrainSampler, rng: np.random.Generator) -> np.ndarray:
    """
    一轮训练的样本顺序

    random 为无放回随机排列；class_weighted 按类别频率倒数有放回抽样，轮大小等于样本数。
    """
    n = len(labels)
    if sampler == TrainSampler.RANDOM:
        return rng.permutation(n)
    counts = np.bincount(labels, minlength=2).astype(float)
    weights = np.array([1.0 / counts[label] for label in labels])
    return rng.choice(n, size=n, replace=True, p=weights / weights.sum())


def _dev_macro_f1(model: TrainedModel, dev_docs: List[ProcessedDocument]) -> float:
    scores = model.predict_scores(dev_docs)
    preds = [int(s >= DECISION_THRESHOLD) for s in scores]
    return report(confusion(preds, [doc.label for doc in dev_docs])).f1_macro


def train_neural(model: NeuralModel, train: Corpus, dev: Corpus, config: TrainConfig) -> NeuralModel:
    """
    通用训练循环：按轮训练，以 dev 宏 F1 选择最佳轮次并提前停止

    Args:
        model: 待训练模型（会被修改）
        train: 训练语料
        dev: 开发语料
        config: 训练配置

    Returns:
        恢复到最佳轮次参数的模型
    """
    if len(train) == 0:
        raise ArgumentError("训练集为空")
    train_docs = to_processed(train)
    dev_docs = to_processed(dev)
    if not dev_docs:
        logger.warning("开发集为空，改用训练集选择轮次")
        dev_docs = train_docs
    labels = np.array([doc.label for doc in train_docs], dtype=int)

    model.apply_freeze(config.freeze_policy)
    model.begin_training(config)
    rng = np.random.default_rng(config.model_seed)

    best_f1 = -1.0
    best_state = None
    waited = 0
    model.training_log = []
    for epoch in range(1, config.max_epochs + 1):
        order = epoch_order(labels, config.train_sampler, rng)
        batches = []
        for start in range(0, len(order), config.batch_size):
            index = order[start:start + config.batch_size]
            batches.append(([train_docs[int(i)] for i in index], labels[index]))

        loss = model.train_epoch(batches)
        if not math.isfinite(loss):
            raise TrainingDivergenceError(epoch, loss)

        dev_f1 = _dev_macro_f1(model, dev_docs)
        model.training_log.append(EpochLog(epoch=epoch, loss=float(loss), dev_f1_macro=dev_f1))
        logger.debug(f"[{model.backend_name} seed={config.model_seed}] 第 {epoch} 轮 loss={loss:.4f} dev F1_m={dev_f1:.2f}")

        if dev_f1 > best_f1:
            best_f1 = dev_f1
            best_state = model.snapshot()
            model.best_epoch = epoch
            waited = 0
        else:
            waited += 1
            if waited >= config.patience:
                logger.debug(f"连续 {waited} 轮无提升，提前停止于第 {epoch} 轮")
                break

    model.restore(best_state)
    model.config = config
    logger.info(f"[{model.backend_name} seed={config.model_seed}] 训练完成: 最佳第 {model.best_epoch} 轮，"
                f"dev F1_m={best_f1:.2f}")
    return model


def fit_stage1(backend: ClassifierBackend, source_train: Corpus, source_dev: Corpus,
               config: TrainConfig) -> TrainedModel:
    """第一阶段：在源语言数据上从预训练编码器开始微调"""
    if len(source_train) == 0:
        raise ArgumentError("源语言训练集为空")
    logger.info(f"第一阶段训练 {backend.name} (seed={config.model_seed}, freeze={config.freeze_policy.value})")
    return backend.train(source_train, source_dev, config, init=None)


def fit_stage2(model: TrainedModel, sets, config: TrainConfig) -> TrainedModel:
    """
    第二阶段：在目标语言小样本集合上继续微调第一阶段模型的副本，原模型不变

    Args:
        model: 第一阶段模型
        sets: FewShotSets
        config: 第二阶段训练配置
    """
    if len(sets.train) == 0:
        raise ArgumentError("小样本训练集为空")
    if model.backend is None:
        raise ArgumentError("模型未绑定后端，无法继续训练")
    return model.backend.train(sets.train, sets.dev, config, init=model)


def predict(model: TrainedModel, docs: Sequence[ProcessedDocument]) -> List[Prediction]:
    """
    对未被过滤的文档逐一预测，保持输入顺序

    Args:
        model: 已训练模型
        docs: 预处理后的文档

    Returns:
        每个保留文档一个预测
    """
    kept = [doc for doc in docs if not doc.dropped]
    skipped = len(docs) - len(kept)
    if skipped:
        logger.warning(f"跳过 {skipped} 个已过滤文档: {[d.id for d in docs if d.dropped][:5]}")
    if not kept:
        return []
    scores = model.predict_scores(kept)
    return [Prediction.from_score(doc.id, float(score)) for doc, score in zip(kept, scores)]
