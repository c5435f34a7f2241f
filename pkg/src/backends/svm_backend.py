"""
词向量平均 + SVM 基线
文档向量为词向量的算术平均，SVC 使用 balanced 类别权重，其余参数保持默认
"""
import logging
import os
from typing import Dict, Mapping, Optional, Protocol, Sequence, runtime_checkable

import joblib
import numpy as np
from sklearn.svm import SVC
from sklearn.utils import murmurhash3_32
from sklearn.utils.class_weight import compute_class_weight

from src.backends.base import (
    BackendCapabilities, ClassifierBackend, EpochLog, TrainConfig, TrainedModel,
)
from src.tools.corpus_tools import Corpus
from src.tools.metrics_tools import confusion, report
from src.tools.preprocess_tools import ProcessedDocument, to_processed
from src.utils.errors import ArgumentError, ConfigError

logger = logging.getLogger(__name__)


@runtime_checkable
class EmbeddingSource(Protocol):
    """按语言提供词向量"""

    dim: int
    is_aligned: bool

    def vector(self, word: str, lang: str) -> Optional[np.ndarray]:
        ...


class KeyedVectorsEmbeddingSource:
    """gensim KeyedVectors 包装（fastText .bin / word2vec 文本 / gensim 原生格式）"""

    def __init__(self, keyed_vectors, lowercase: bool = True, is_aligned: bool = False):
        self.kv = keyed_vectors
        self.dim = int(keyed_vectors.vector_size)
        self.lowercase = lowercase
        self.is_aligned = is_aligned

    @classmethod
    def load(cls, path: str, lowercase: bool = True, is_aligned: bool = False) -> 'KeyedVectorsEmbeddingSource':
        from gensim.models import KeyedVectors
        from gensim.models.fasttext import load_facebook_vectors

        if not os.path.exists(path):
            raise ConfigError(f"词向量文件不存在: {path}")
        logger.info(f"加载词向量: {path}")
        if path.endswith('.bin'):
            kv = load_facebook_vectors(path)
        elif path.endswith(('.vec', '.txt')):
            kv = KeyedVectors.load_word2vec_format(path, binary=False)
        else:
            kv = KeyedVectors.load(path)
        return cls(kv, lowercase=lowercase, is_aligned=is_aligned)

    def vector(self, word: str, lang: str) -> Optional[np.ndarray]:
        key = word.lower() if self.lowercase else word
        if key in self.kv.key_to_index:
            return np.asarray(self.kv[key], dtype=float)
        # fastText 向量可由子词构造未登录词
        if hasattr(self.kv, 'get_vector') and getattr(self.kv, 'bucket', 0):
            return np.asarray(self.kv.get_vector(key), dtype=float)
        return None


class MultilingualEmbeddingSource:
    """按文档语言选择词向量，跨语言对齐的向量设置 is_aligned=True"""

    def __init__(self, sources: Mapping[str, EmbeddingSource], is_aligned: bool = False):
        if not sources:
            raise ConfigError("至少需要一种语言的词向量")
        dims = {source.dim for source in sources.values()}
        if len(dims) != 1:
            raise ConfigError(f"各语言词向量维度不一致: {sorted(dims)}")
        self.sources = dict(sources)
        self.dim = dims.pop()
        self.is_aligned = is_aligned

    def vector(self, word: str, lang: str) -> Optional[np.ndarray]:
        source = self.sources.get(lang)
        if source is None:
            raise ArgumentError(f"没有语言 {lang} 的词向量")
        return source.vector(word, lang)


class HashedEmbeddingSource:
    """由词的哈希生成的伪随机词向量，与语言无关，用于演示与测试"""

    def __init__(self, dim: int = 50, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.is_aligned = True
        self._cache: Dict[str, np.ndarray] = {}

    def vector(self, word: str, lang: str) -> Optional[np.ndarray]:
        key = word.lower()
        cached = self._cache.get(key)
        if cached is None:
            rng = np.random.default_rng(murmurhash3_32(key, seed=self.seed, positive=True))
            cached = rng.normal(0.0, 1.0, size=self.dim)
            self._cache[key] = cached
        return cached


def document_vector(tokens: Sequence[str], lang: str, embeddings: EmbeddingSource) -> np.ndarray:
    """词向量的无权平均；没有已知词时返回零向量"""
    vectors = [v for v in (embeddings.vector(t, lang) for t in tokens) if v is not None]
    if not vectors:
        return np.zeros(embeddings.dim)
    return np.mean(vectors, axis=0)


def document_matrix(docs: Sequence[ProcessedDocument], embeddings: EmbeddingSource) -> np.ndarray:
    matrix = np.zeros((len(docs), embeddings.dim))
    unknown = []
    for row, doc in enumerate(docs):
        matrix[row] = document_vector(doc.tokens, doc.lang, embeddings)
        if not np.any(matrix[row]):
            unknown.append(doc.id)
    if unknown:
        logger.warning(f"{len(unknown)} 个文档没有已知词，使用零向量: {unknown[:5]}")
    return matrix


def balanced_class_weights(labels: Sequence[int]) -> Dict[int, float]:
    """balanced 类别权重 n_total / (2 · n_class)"""
    labels = np.asarray(list(labels), dtype=int)
    for label in (0, 1):
        if not np.any(labels == label):
            raise ArgumentError(f"训练集缺少标签 {label}")
    values = compute_class_weight('balanced', classes=np.array([0, 1]), y=labels)
    return {0: float(values[0]), 1: float(values[1])}


class SvmModel(TrainedModel):
    """SVC 模型；分数为决策函数经 sigmoid 映射，决策值 <= 0 的分数严格小于 0.5，与 SVC.predict 一致"""

    backend_name = "svm"

    def __init__(self, config: TrainConfig, svc: SVC, embeddings: EmbeddingSource):
        super().__init__(config)
        self.svc = svc
        self.embeddings = embeddings

    def predict_scores(self, docs: Sequence[ProcessedDocument]) -> np.ndarray:
        decision = np.asarray(self.svc.decision_function(document_matrix(docs, self.embeddings)), dtype=float)
        scores = 1.0 / (1.0 + np.exp(-np.clip(decision, -30, 30)))
        # 决策值为 0 时 SVC 判负例
        return np.where(decision <= 0, np.minimum(scores, np.nextafter(0.5, 0.0)), scores)

    def save(self, path: str) -> str:
        os.makedirs(path, exist_ok=True)
        joblib.dump({'svc': self.svc, 'config': self.config.model_dump(mode='json')},
                    os.path.join(path, 'svm.joblib'))
        self.save_training_log(os.path.join(path, 'training_log.csv'))
        return path


def fit_svm_baseline(train: Corpus, embeddings: EmbeddingSource, class_weight: Optional[str] = "balanced",
                     config: Optional[TrainConfig] = None) -> SvmModel:
    """
    训练词向量平均 SVM 基线

    Args:
        train: 训练语料（已预处理）
        embeddings: 词向量来源，多语言训练集需要对齐的向量
        class_weight: "balanced" 或 None（不加权，用于对比）
        config: 记录用的训练配置

    Returns:
        SVM 模型
    """
    if len(train) == 0:
        raise ArgumentError("训练集为空")
    docs = to_processed(train)
    labels = np.array([doc.label for doc in docs])
    languages = {doc.lang for doc in docs}
    if len(languages) > 1 and not embeddings.is_aligned:
        raise ArgumentError(f"训练集包含多种语言 {sorted(languages)}，需要跨语言对齐的词向量")

    svc = SVC(class_weight=class_weight)
    svc.fit(document_matrix(docs, embeddings), labels)
    if class_weight == "balanced":
        weights = balanced_class_weights(labels.tolist())
        logger.info(f"SVM 训练完成: {len(docs)} 条，类别权重 0:{weights[0]:.3f} 1:{weights[1]:.3f}")
    else:
        logger.info(f"SVM 训练完成: {len(docs)} 条，不加权")
    return SvmModel(config or TrainConfig(learning_rate=1.0, batch_size=1, model_id="svm"), svc, embeddings)


class SvmBackend(ClassifierBackend):
    """单阶段后端：不做第一阶段训练，dev 只用于记录"""

    name = "svm"
    capabilities = BackendCapabilities(supports_freezing=False, supports_class_weights=True,
                                       is_multilingual=True, two_stage=False)

    def __init__(self, embeddings: EmbeddingSource, class_weight: Optional[str] = "balanced"):
        self.embeddings = embeddings
        self.class_weight = class_weight

    def train(self, train: Corpus, dev: Corpus, config: TrainConfig,
              init: Optional[TrainedModel] = None) -> TrainedModel:
        if init is not None:
            logger.debug("SVM 后端忽略初始模型")
        model = fit_svm_baseline(train, self.embeddings, class_weight=self.class_weight, config=config)
        model.backend = self
        dev_docs = to_processed(dev)
        if dev_docs:
            preds = [int(s >= 0.5) for s in model.predict_scores(dev_docs)]
            dev_f1 = report(confusion(preds, [doc.label for doc in dev_docs])).f1_macro
            model.training_log = [EpochLog(epoch=1, loss=float('nan'), dev_f1_macro=dev_f1)]
            model.best_epoch = 1
        return model

    def load_model(self, path: str) -> SvmModel:
        payload = joblib.load(os.path.join(path, 'svm.joblib'))
        model = SvmModel(TrainConfig(**payload['config']), payload['svc'], self.embeddings)
        model.backend = self
        return model
