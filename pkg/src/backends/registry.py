"""
后端与模型注册表
model_id 解析为本地检查点路径（存在时优先）或模型库标识
"""
import logging
import os
from typing import Dict, Optional

import yaml

from src.backends.base import ClassifierBackend
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

BACKEND_NAMES = ('stub', 'transformer', 'svm')


def load_model_registry(path: Optional[str]) -> Dict[str, Dict[str, str]]:
    """读取 model_id -> {path, hub} 映射，文件缺失时返回空表"""
    if not path or not os.path.exists(path):
        return {}
    with open(path, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f) or {}
    models = data.get('models', {})
    if not isinstance(models, dict):
        raise ConfigError(f"模型注册表格式错误: {path}")
    return {str(k): dict(v or {}) for k, v in models.items()}


def resolve_model_id(model_id: str, registry: Dict[str, Dict[str, str]]) -> str:
    entry = registry.get(model_id)
    if not entry:
        return model_id
    local_path = entry.get('path')
    if local_path and os.path.exists(local_path):
        logger.debug(f"{model_id} 使用本地检查点 {local_path}")
        return local_path
    return entry.get('hub', model_id)


def get_backend(name: str, embeddings=None, registry: Optional[Dict[str, Dict[str, str]]] = None,
                **options) -> ClassifierBackend:
    """
    按名称创建后端

    Args:
        name: stub / transformer / svm
        embeddings: svm 后端使用的词向量来源
        registry: 模型注册表
        options: 传给后端构造函数的其他参数
    """
    if name == 'stub':
        from src.backends.stub_backend import StubBackend
        return StubBackend()
    if name == 'svm':
        from src.backends.svm_backend import SvmBackend
        if embeddings is None:
            raise ConfigError("svm 后端需要配置 embeddings")
        return SvmBackend(embeddings, **options)
    if name == 'transformer':
        try:
            from src.backends.transformer_backend import TransformerBackend
        except ImportError as e:
            raise ConfigError(f"transformer 后端需要安装 torch 与 transformers: {e}")
        table = registry or {}
        return TransformerBackend(resolve=lambda model_id: resolve_model_id(model_id, table), **options)
    raise ConfigError(f"未知后端: {name}，可选 {', '.join(BACKEND_NAMES)}")
