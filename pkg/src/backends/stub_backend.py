"""
确定性桩后端
哈希词袋编码器（词桶嵌入取平均）+ 逻辑回归分类头，纯 numpy 实现，用于无 GPU 的完整流程测试
"""
import copy
import hashlib
import json
import logging
import os
from functools import lru_cache
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.utils import murmurhash3_32

from src.backends.base import (
    BackendCapabilities, ClassifierBackend, FreezePolicy, NeuralModel, TrainConfig,
    TrainedModel, train_neural,
)
from src.tools.corpus_tools import Corpus
from src.tools.preprocess_tools import ProcessedDocument

logger = logging.getLogger(__name__)

N_BUCKETS = 2048
EMBEDDING_DIM = 32


@lru_cache(maxsize=200_000)
def token_bucket(token: str, n_buckets: int = N_BUCKETS) -> int:
    return murmurhash3_32(token.lower(), seed=0, positive=True) % n_buckets


@lru_cache(maxsize=50_000)
def document_buckets(tokens: Tuple[str, ...], n_buckets: int = N_BUCKETS) -> np.ndarray:
    ids = np.array([token_bucket(t, n_buckets) for t in tokens], dtype=int)
    ids.setflags(write=False)
    return ids


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30, 30)))


def pretrained_encoder(model_id: str, n_buckets: int = N_BUCKETS, dim: int = EMBEDDING_DIM) -> np.ndarray:
    """同一 model_id 总是得到同一个"预训练"编码器"""
    rng = np.random.default_rng(murmurhash3_32(model_id, seed=0, positive=True))
    return rng.normal(0.0, 1.0, size=(n_buckets, dim))


class StubModel(NeuralModel):
    """哈希词袋 + 逻辑回归"""

    backend_name = "stub"

    def __init__(self, config: TrainConfig, encoder: np.ndarray, weights: np.ndarray, bias: float):
        super().__init__(config)
        self.encoder = encoder
        self.weights = weights
        self.bias = float(bias)
        self.encoder_trainable = False
        self.learning_rate = config.learning_rate

    def _bucket_ids(self, doc: ProcessedDocument) -> np.ndarray:
        return document_buckets(tuple(doc.tokens), self.encoder.shape[0])

    def _features(self, bucket_ids: List[np.ndarray]) -> np.ndarray:
        features = np.zeros((len(bucket_ids), self.encoder.shape[1]))
        for row, ids in enumerate(bucket_ids):
            if len(ids):
                features[row] = self.encoder[ids].mean(axis=0)
        return features

    def predict_scores(self, docs: Sequence[ProcessedDocument]) -> np.ndarray:
        features = self._features([self._bucket_ids(doc) for doc in docs])
        return _sigmoid(features @ self.weights + self.bias)

    def apply_freeze(self, policy: FreezePolicy):
        self.encoder_trainable = policy == FreezePolicy.NONE

    def begin_training(self, config: TrainConfig):
        self.learning_rate = config.learning_rate

    def train_epoch(self, batches: List[Tuple[List[ProcessedDocument], np.ndarray]]) -> float:
        total_loss = 0.0
        n_seen = 0
        for docs, labels in batches:
            bucket_ids = [self._bucket_ids(doc) for doc in docs]
            features = self._features(bucket_ids)
            probs = _sigmoid(features @ self.weights + self.bias)
            y = labels.astype(float)
            eps = 1e-12
            total_loss += float(-np.sum(y * np.log(probs + eps) + (1 - y) * np.log(1 - probs + eps)))
            n_seen += len(docs)

            error = (probs - y) / len(docs)
            grad_w = features.T @ error
            grad_b = float(error.sum())
            if self.encoder_trainable:
                grad_encoder = np.zeros_like(self.encoder)
                for ids, err in zip(bucket_ids, error):
                    if len(ids):
                        np.add.at(grad_encoder, ids, np.outer(np.full(len(ids), err / len(ids)), self.weights))
                self.encoder -= self.learning_rate * grad_encoder
            self.weights -= self.learning_rate * grad_w
            self.bias -= self.learning_rate * grad_b
        return total_loss / max(1, n_seen)

    def snapshot(self) -> Any:
        return self.encoder.copy(), self.weights.copy(), self.bias

    def restore(self, state: Any):
        encoder, weights, bias = state
        self.encoder = encoder.copy()
        self.weights = weights.copy()
        self.bias = float(bias)

    def clone(self) -> 'StubModel':
        twin = StubModel(self.config, self.encoder.copy(), self.weights.copy(), self.bias)
        twin.backend = self.backend
        twin.training_log = copy.deepcopy(self.training_log)
        twin.best_epoch = self.best_epoch
        return twin

    def encoder_checksum(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.encoder).tobytes()).hexdigest()

    def classifier_checksum(self) -> str:
        payload = np.ascontiguousarray(np.append(self.weights, self.bias)).tobytes()
        return hashlib.sha256(payload).hexdigest()

    def save(self, path: str) -> str:
        os.makedirs(path, exist_ok=True)
        np.savez(os.path.join(path, 'model.npz'), encoder=self.encoder, weights=self.weights,
                 bias=np.array([self.bias]))
        with open(os.path.join(path, 'config.json'), 'w', encoding='utf-8') as f:
            json.dump(self.config.model_dump(mode='json'), f, ensure_ascii=False, indent=2)
        self.save_training_log(os.path.join(path, 'training_log.csv'))
        return path


class StubBackend(ClassifierBackend):
    """桩后端，随机性只来自 model_seed 与 model_id"""

    name = "stub"
    capabilities = BackendCapabilities(supports_freezing=True, supports_class_weights=True,
                                       is_multilingual=True)

    def init_model(self, config: TrainConfig) -> StubModel:
        rng = np.random.default_rng(config.model_seed)
        weights = rng.normal(0.0, 0.01, size=EMBEDDING_DIM)
        model = StubModel(config, pretrained_encoder(config.model_id), weights, 0.0)
        model.backend = self
        return model

    def train(self, train: Corpus, dev: Corpus, config: TrainConfig,
              init: Optional[TrainedModel] = None) -> TrainedModel:
        model = init.clone() if init is not None else self.init_model(config)
        model.backend = self
        return train_neural(model, train, dev, config)

    def load_model(self, path: str) -> StubModel:
        with open(os.path.join(path, 'config.json'), 'r', encoding='utf-8') as f:
            config = TrainConfig(**json.load(f))
        with np.load(os.path.join(path, 'model.npz')) as data:
            model = StubModel(config, data['encoder'].copy(), data['weights'].copy(), float(data['bias'][0]))
        model.backend = self
        return model
