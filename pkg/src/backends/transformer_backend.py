"""
Transformer 微调后端
AutoModelForSequenceClassification + AdamW，冻结时只训练分类头
"""
import copy
import hashlib
import json
import logging
import os
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from src.backends.base import (
    BackendCapabilities, ClassifierBackend, FreezePolicy, NeuralModel, TrainConfig,
    TrainedModel, train_neural,
)
from src.tools.corpus_tools import Corpus
from src.tools.preprocess_tools import ProcessedDocument

logger = logging.getLogger(__name__)

MAX_SUBWORD_LENGTH = 512
PREDICT_BATCH_SIZE = 32

Loader = Callable[[str], Tuple[Any, Any]]


def default_loader(model_path: str) -> Tuple[Any, Any]:
    """从本地目录或模型库加载编码器与分词器"""
    tokenizer = AutoTokenizer.from_pretrained(model_path)
    model = AutoModelForSequenceClassification.from_pretrained(model_path, num_labels=2)
    return model, tokenizer


class TransformerModel(NeuralModel):
    """序列分类模型，编码器参数位于 base_model_prefix 之下"""

    backend_name = "transformer"

    def __init__(self, config: TrainConfig, model, tokenizer, device: str = "cpu"):
        super().__init__(config)
        self.model = model.to(device)
        self.tokenizer = tokenizer
        self.device = device
        self.optimizer = None

    def _encoder_prefix(self) -> str:
        return f"{self.model.base_model_prefix}."

    def _is_encoder(self, name: str) -> bool:
        return name.startswith(self._encoder_prefix())

    def _encode(self, docs: Sequence[ProcessedDocument]):
        batch = self.tokenizer([doc.text for doc in docs], padding=True, truncation=True,
                               max_length=MAX_SUBWORD_LENGTH, return_tensors="pt")
        return {key: value.to(self.device) for key, value in batch.items()}

    def predict_scores(self, docs: Sequence[ProcessedDocument]) -> np.ndarray:
        self.model.eval()
        scores = []
        with torch.no_grad():
            for start in range(0, len(docs), PREDICT_BATCH_SIZE):
                logits = self.model(**self._encode(docs[start:start + PREDICT_BATCH_SIZE])).logits
                scores.append(torch.softmax(logits, dim=-1)[:, 1].cpu().numpy())
        return np.concatenate(scores) if scores else np.zeros(0)

    def apply_freeze(self, policy: FreezePolicy):
        trainable = policy == FreezePolicy.NONE
        for name, param in self.model.named_parameters():
            param.requires_grad = trainable or not self._is_encoder(name)
        n_trainable = sum(p.numel() for p in self.model.parameters() if p.requires_grad)
        logger.debug(f"冻结策略 {policy.value}: 可训练参数 {n_trainable}")

    def begin_training(self, config: TrainConfig):
        torch.manual_seed(config.model_seed)
        params = [p for p in self.model.parameters() if p.requires_grad]
        self.optimizer = torch.optim.AdamW(params, lr=config.learning_rate)

    def train_epoch(self, batches: List[Tuple[List[ProcessedDocument], np.ndarray]]) -> float:
        self.model.train()
        total_loss = 0.0
        n_seen = 0
        for docs, labels in batches:
            inputs = self._encode(docs)
            target = torch.as_tensor(labels, dtype=torch.long, device=self.device)
            output = self.model(**inputs, labels=target)
            self.optimizer.zero_grad()
            output.loss.backward()
            self.optimizer.step()
            total_loss += float(output.loss.item()) * len(docs)
            n_seen += len(docs)
        return total_loss / max(1, n_seen)

    def snapshot(self) -> Any:
        return {name: tensor.detach().cpu().clone() for name, tensor in self.model.state_dict().items()}

    def restore(self, state: Any):
        self.model.load_state_dict(state)

    def clone(self) -> 'TransformerModel':
        twin = TransformerModel(self.config, copy.deepcopy(self.model), self.tokenizer, self.device)
        twin.backend = self.backend
        twin.training_log = copy.deepcopy(self.training_log)
        twin.best_epoch = self.best_epoch
        return twin

    def _checksum(self, encoder: bool) -> str:
        digest = hashlib.sha256()
        for name, tensor in sorted(self.model.state_dict().items()):
            if self._is_encoder(name) == encoder:
                digest.update(name.encode('utf-8'))
                digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
        return digest.hexdigest()

    def encoder_checksum(self) -> str:
        return self._checksum(encoder=True)

    def classifier_checksum(self) -> str:
        return self._checksum(encoder=False)

    def save(self, path: str) -> str:
        os.makedirs(path, exist_ok=True)
        self.model.save_pretrained(path)
        self.tokenizer.save_pretrained(path)
        with open(os.path.join(path, 'train_config.json'), 'w', encoding='utf-8') as f:
            json.dump(self.config.model_dump(mode='json'), f, ensure_ascii=False, indent=2)
        self.save_training_log(os.path.join(path, 'training_log.csv'))
        return path


class TransformerBackend(ClassifierBackend):
    """
    预训练编码器微调后端

    Args:
        resolve: model_id -> 本地路径或模型库标识
        loader: 路径 -> (模型, 分词器)，测试时可替换为小模型构造函数
        device: 运行设备，默认有 GPU 时用 cuda
    """

    name = "transformer"
    capabilities = BackendCapabilities(supports_freezing=True, supports_class_weights=True,
                                       is_multilingual=True)

    def __init__(self, resolve: Optional[Callable[[str], str]] = None, loader: Optional[Loader] = None,
                 device: Optional[str] = None):
        self.resolve = resolve or (lambda model_id: model_id)
        self.loader = loader or default_loader
        self.device = device or ("cuda" if torch.cuda.is_available() else "cpu")

    def init_model(self, config: TrainConfig) -> TransformerModel:
        # 分类头初始化依赖 model_seed
        torch.manual_seed(config.model_seed)
        model, tokenizer = self.loader(self.resolve(config.model_id))
        wrapped = TransformerModel(config, model, tokenizer, self.device)
        wrapped.backend = self
        return wrapped

    def train(self, train: Corpus, dev: Corpus, config: TrainConfig,
              init: Optional[TrainedModel] = None) -> TrainedModel:
        model = init.clone() if init is not None else self.init_model(config)
        model.backend = self
        return train_neural(model, train, dev, config)

    def load_model(self, path: str) -> TransformerModel:
        with open(os.path.join(path, 'train_config.json'), 'r', encoding='utf-8') as f:
            config = TrainConfig(**json.load(f))
        model, tokenizer = self.loader(path)
        wrapped = TransformerModel(config, model, tokenizer, self.device)
        wrapped.backend = self
        return wrapped
