"""
预处理工具包
实体掩码、长度过滤与截断，输出后端可用的词序列
"""
import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import List, Set, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.tools.corpus_tools import Corpus, Document

logger = logging.getLogger(__name__)


class MaskClass(str, Enum):
    """可掩码的实体类别"""
    URL = "url"
    USER = "user"
    DATE = "date"
    EMAIL = "email"
    NUMBER = "number"


PLACEHOLDERS = {
    MaskClass.URL: "<URL>",
    MaskClass.USER: "<USER>",
    MaskClass.DATE: "<DATE>",
    MaskClass.EMAIL: "<EMAIL>",
    MaskClass.NUMBER: "<NUMBER>",
}

_MONTHS = (
    "januar|februar|märz|maerz|april|mai|juni|juli|august|september|oktober|november|dezember|"
    "jan|feb|mär|mrz|apr|jun|jul|aug|sep|sept|okt|nov|dez|"
    "january|february|march|may|june|july|october|december|oct|dec"
)

# 占位符不含数字、@、:// 等字符，不会被再次匹配
PATTERNS = {
    MaskClass.EMAIL: re.compile(r"[\w.+-]+@[\w-]+(?:\.[\w-]+)+"),
    MaskClass.URL: re.compile(r"(?:https?://|www\.)[^\s<>\"]*[^\s<>\".,;:!?)\]]"),
    MaskClass.USER: re.compile(r"(?<![\w<])@\w+"),
    MaskClass.DATE: re.compile(
        r"\b\d{4}-\d{1,2}-\d{1,2}\b"
        r"|\b\d{1,2}[./-]\d{1,2}[./-](?:\d{4}|\d{2})\b"
        r"|\b\d{1,2}\.?\s(?:" + _MONTHS + r")\.?(?:\s\d{4})?\b"
        r"|\b(?:" + _MONTHS + r")\.?\s\d{4}\b",
        re.IGNORECASE,
    ),
    MaskClass.NUMBER: re.compile(r"(?<![\w<])\d+(?:[.,]\d+)*(?![\w>])"),
}

# 掩码顺序：先邮箱再用户名，先日期再数字
MASK_ORDER = (MaskClass.EMAIL, MaskClass.URL, MaskClass.USER, MaskClass.DATE, MaskClass.NUMBER)


class NormalizerConfig(BaseModel):
    """预处理配置"""

    model_config = ConfigDict(frozen=True)

    min_tokens: int = Field(default=4, ge=1)
    max_tokens: int = 300
    mask_classes: Set[MaskClass] = Field(default_factory=lambda: set(MaskClass))

    @model_validator(mode='after')
    def _check_bounds(self) -> 'NormalizerConfig':
        if self.max_tokens <= self.min_tokens:
            raise ValueError(f"max_tokens ({self.max_tokens}) 必须大于 min_tokens ({self.min_tokens})")
        return self


@dataclass(frozen=True)
class ProcessedDocument:
    """预处理后的文档"""

    id: str
    tokens: Tuple[str, ...]
    original_id: str
    dropped: bool
    label: int
    lang: str
    topic: str = ""
    truncated: bool = False
    n_tokens_masked: int = 0

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def mask_entities(text: str, config: NormalizerConfig) -> str:
    """
    把配置的实体类别替换为占位符

    Args:
        text: 原始文本
        config: 预处理配置

    Returns:
        掩码后的文本
    """
    for mask_class in MASK_ORDER:
        if mask_class in config.mask_classes:
            text = PATTERNS[mask_class].sub(PLACEHOLDERS[mask_class], text)
    return text


def preprocess(doc: Document, config: NormalizerConfig) -> ProcessedDocument:
    """
    掩码、空白切分、过滤过短文档并截断过长文档

    Args:
        doc: 已校验的文档
        config: 预处理配置

    Returns:
        预处理结果，词数不足 min_tokens 时 dropped=True
    """
    tokens = mask_entities(doc.text, config).split()
    n_tokens = len(tokens)
    dropped = n_tokens < config.min_tokens
    truncated = not dropped and n_tokens > config.max_tokens
    if truncated:
        # 保留开头部分
        tokens = tokens[:config.max_tokens]

    return ProcessedDocument(
        id=doc.id,
        tokens=tuple(tokens),
        original_id=doc.id,
        dropped=dropped,
        label=doc.label,
        lang=doc.lang,
        topic=doc.topic,
        truncated=truncated,
        n_tokens_masked=n_tokens,
    )


def normalize_corpus(corpus: Corpus, config: NormalizerConfig) -> Tuple[Corpus, List[ProcessedDocument]]:
    """
    预处理整个语料

    Args:
        corpus: 原始语料
        config: 预处理配置

    Returns:
        (保留文档组成的语料，文本为掩码截断后的文本；全部预处理结果，含被过滤的文档)
    """
    processed = [preprocess(doc, config) for doc in corpus]
    kept = []
    for doc, result in zip(corpus, processed):
        if result.dropped:
            logger.debug(f"文档 {doc.id} 词数 {result.n_tokens_masked} 低于 {config.min_tokens}，已过滤")
            continue
        kept.append(doc.model_copy(update={'text': result.text}))

    n_dropped = len(processed) - len(kept)
    n_truncated = sum(1 for p in processed if p.truncated)
    if n_dropped:
        logger.warning(f"语料 {corpus.name}: 过滤 {n_dropped} 条过短文档")
    logger.info(f"语料 {corpus.name} 预处理完成: 保留 {len(kept)}/{len(processed)}，截断 {n_truncated}")
    return Corpus(name=corpus.name, documents=tuple(kept)), processed


def to_processed(corpus: Corpus) -> List[ProcessedDocument]:
    """把已规范化的语料直接转换为 ProcessedDocument（不再过滤）"""
    return [
        ProcessedDocument(id=doc.id, tokens=tuple(doc.text.split()), original_id=doc.id,
                          dropped=False, label=doc.label, lang=doc.lang, topic=doc.topic,
                          n_tokens_masked=doc.n_tokens())
        for doc in corpus
    ]
