"""
语料工具包
负责语料的读取、校验、合并、分层划分、统计以及合成语料生成
"""
import json
import logging
import math
import os
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from src.utils.errors import (
    ArgumentError, CorpusSchemaError, CorpusValidationError, DuplicateIdError,
    LabelValueError, StratificationError,
)

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ('id', 'text', 'label', 'topic', 'lang')
SUPPORTED_FORMATS = ('jsonl', 'csv')

# 句子切分：句末标点后接空白
SENTENCE_BOUNDARY = re.compile(r'(?<=[.!?])\s+')

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
SYNTHETIC_MED_LEXICON = os.path.join(PROJECT_ROOT, 'data', 'lexicons', 'medications_synthetic.txt')


class Document(BaseModel):
    """单条论坛帖子"""

    model_config = ConfigDict(frozen=True)

    id: str
    text: str
    label: int
    topic: str
    lang: str
    source: str = "unknown"

    @field_validator('id', 'lang')
    @classmethod
    def _not_blank(cls, value: str) -> str:
        if not value or not value.strip():
            raise ValueError("不能为空")
        return value.strip()

    @field_validator('text')
    @classmethod
    def _text_not_blank(cls, value: str) -> str:
        if not value or not value.strip():
            raise ValueError("文本为空")
        return value

    @field_validator('label', mode='before')
    @classmethod
    def _binary_label(cls, value):
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, str) and value.strip().lstrip('-').isdigit():
            value = int(value.strip())
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if value not in (0, 1):
            raise ValueError(f"标签必须为0或1，实际为 {value!r}")
        return value

    def n_tokens(self) -> int:
        """空白切分的词数"""
        return len(self.text.split())

    def n_sentences(self) -> int:
        """启发式句子数"""
        return count_sentences(self.text)


@dataclass(frozen=True)
class Corpus:
    """有序文档集合"""

    name: str
    documents: Tuple[Document, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'documents', tuple(self.documents))
        seen: Set[str] = set()
        duplicates = []
        for doc in self.documents:
            if doc.id in seen:
                duplicates.append(doc.id)
            seen.add(doc.id)
        if duplicates:
            raise DuplicateIdError(f"语料 {self.name} 存在重复ID: {', '.join(sorted(set(duplicates))[:10])}")

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    @property
    def ids(self) -> List[str]:
        return [doc.id for doc in self.documents]

    @property
    def labels(self) -> List[int]:
        return [doc.label for doc in self.documents]

    @property
    def n_pos(self) -> int:
        return sum(1 for doc in self.documents if doc.label == 1)

    @property
    def n_neg(self) -> int:
        return sum(1 for doc in self.documents if doc.label == 0)

    def label_counts(self) -> Dict[int, int]:
        return {0: self.n_neg, 1: self.n_pos}

    def by_id(self) -> Dict[str, Document]:
        return {doc.id: doc for doc in self.documents}

    def with_name(self, name: str) -> 'Corpus':
        return Corpus(name=name, documents=self.documents)

    def subset(self, ids: Iterable[str], name: Optional[str] = None) -> 'Corpus':
        """按给定ID顺序取子集"""
        index = self.by_id()
        return Corpus(name=name or self.name, documents=tuple(index[i] for i in ids))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([doc.model_dump() for doc in self.documents],
                            columns=['id', 'text', 'label', 'topic', 'lang', 'source'])


@dataclass(frozen=True)
class SplitSpec:
    """分层划分参数，只按标签分层"""

    test_fraction: float = 0.2
    seed: int = 42
    stratify_on: str = "label"

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ArgumentError(f"test_fraction 必须在 (0,1) 内，实际为 {self.test_fraction}")
        if self.stratify_on != "label":
            raise ArgumentError("只支持按 label 分层")


@dataclass
class CorpusStats:
    """语料统计"""

    n_total: int
    n_pos: int
    n_neg: int
    pos_neg_ratio: Optional[Fraction]
    per_topic_counts: Dict[str, Dict[str, int]]
    avg_tokens: float
    avg_sentences: float
    token_length_histogram_per_label: Dict[int, Dict[str, List[float]]]
    per_source_counts: Dict[str, Dict[int, int]] = field(default_factory=dict)
    per_split: Dict[str, Dict[str, float]] = field(default_factory=dict)
    filtered_split_sizes: Dict[str, int] = field(default_factory=dict)

    @property
    def ratio_text(self) -> str:
        """显示为 "1 : 40.3" 的正负比"""
        if self.n_pos == 0:
            return "0 : 1"
        return f"1 : {self.n_neg / self.n_pos:.1f}"


def count_sentences(text: str) -> int:
    """按 [.!?] + 空白 切分计数"""
    stripped = text.strip()
    if not stripped:
        return 0
    return len([s for s in SENTENCE_BOUNDARY.split(stripped) if s.strip()])


# ---------------------------------------------------------------------------
# 读取与保存
# ---------------------------------------------------------------------------

def _classify_issue(line: int, error: ValidationError) -> List[Tuple[str, int, str, str]]:
    """把 pydantic 错误转换为 (类型, 行号, 字段, 说明)"""
    issues = []
    for err in error.errors():
        field_name = str(err['loc'][0]) if err.get('loc') else '?'
        if err.get('type') == 'missing':
            kind = 'schema'
            message = f"缺少字段 {field_name}"
        elif field_name == 'label':
            kind = 'label'
            message = err.get('msg', '')
        else:
            kind = 'value'
            message = f"{field_name}: {err.get('msg', '')}"
        issues.append((kind, line, field_name, message))
    return issues


def _read_records(path: str, fmt: str) -> List[Tuple[int, Optional[dict], Optional[str]]]:
    """读取原始记录，返回 (行号, 记录, 解析错误)"""
    records = []
    if fmt == 'jsonl':
        with open(path, 'r', encoding='utf-8') as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as e:
                    records.append((line_no, None, f"JSON解析失败: {e.msg}"))
                    continue
                if not isinstance(record, dict):
                    records.append((line_no, None, "记录不是JSON对象"))
                    continue
                records.append((line_no, record, None))
    else:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
        # 表头占第1行；字段内含换行时行号表示记录序号
        for offset, row in enumerate(df.to_dict(orient='records')):
            records.append((offset + 2, row, None))
    return records


def load_corpus(path: str, format: str = "jsonl", name: Optional[str] = None) -> Corpus:
    """
    读取并校验语料文件

    Args:
        path: 文件路径
        format: jsonl 或 csv
        name: 语料名称，默认取文件名

    Returns:
        校验后的语料

    Raises:
        CorpusSchemaError: 缺少字段或记录格式错误
        LabelValueError: 标签不在 {0,1}
        DuplicateIdError: ID重复
    """
    fmt = format.lower()
    if fmt not in SUPPORTED_FORMATS:
        raise ArgumentError(f"不支持的语料格式: {format}")
    if not os.path.exists(path):
        raise CorpusSchemaError(f"语料文件不存在: {path}")

    corpus_name = name or os.path.splitext(os.path.basename(path))[0]
    logger.info(f"读取语料: {path} ({fmt})")

    documents: List[Document] = []
    issues: List[Tuple[str, int, str, str]] = []
    first_line: Dict[str, int] = {}

    for line_no, record, parse_error in _read_records(path, fmt):
        if parse_error:
            issues.append(('schema', line_no, '?', parse_error))
            continue
        missing = [f for f in REQUIRED_FIELDS if f not in record or record[f] is None]
        if missing:
            for f in missing:
                issues.append(('schema', line_no, f, f"缺少字段 {f}"))
            continue
        try:
            doc = Document(**{k: record[k] for k in record if k in Document.model_fields})
        except ValidationError as e:
            issues.extend(_classify_issue(line_no, e))
            continue
        if doc.id in first_line:
            issues.append(('duplicate', line_no, 'id',
                           f"ID {doc.id} 与第 {first_line[doc.id]} 行重复"))
            continue
        first_line[doc.id] = line_no
        documents.append(doc)

    if issues:
        for kind, line_no, field_name, message in issues:
            logger.error(f"{path}:{line_no} [{field_name}] {message}")
        kind, line_no, field_name, message = issues[0]
        error_cls = {
            'schema': CorpusSchemaError,
            'label': LabelValueError,
            'duplicate': DuplicateIdError,
        }.get(kind, CorpusValidationError)
        raise error_cls(
            f"语料校验失败 ({len(issues)} 处)，首个问题在第 {line_no} 行 [{field_name}]: {message}",
            issues=[(ln, fn, msg) for _, ln, fn, msg in issues],
        )

    corpus = Corpus(name=corpus_name, documents=tuple(documents))
    logger.info(f"语料 {corpus_name} 读取完成: {len(corpus)} 条 (正例 {corpus.n_pos}, 负例 {corpus.n_neg})")
    return corpus


def save_corpus(corpus: Corpus, path: str, format: str = "jsonl") -> str:
    """按 load_corpus 的格式保存语料"""
    fmt = format.lower()
    if fmt not in SUPPORTED_FORMATS:
        raise ArgumentError(f"不支持的语料格式: {format}")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)

    if fmt == 'jsonl':
        with open(path, 'w', encoding='utf-8') as f:
            for doc in corpus:
                f.write(json.dumps(doc.model_dump(), ensure_ascii=False) + "\n")
    else:
        corpus.to_frame().to_csv(path, index=False, encoding='utf-8')

    logger.debug(f"语料已保存: {path} ({len(corpus)} 条)")
    return path


# ---------------------------------------------------------------------------
# 合并与划分
# ---------------------------------------------------------------------------

def combine(corpora: Sequence[Corpus], name: str) -> Corpus:
    """
    合并多个语料，跨语料冲突的ID加上 "语料名/" 前缀；同名语料以 "语料名_位置/" 区分，前缀后仍冲突时追加 ~序号

    Args:
        corpora: 语料列表
        name: 新语料名称

    Returns:
        合并后的语料
    """
    if not corpora:
        raise ArgumentError("combine 需要至少一个语料")

    id_positions: Dict[str, Set[int]] = defaultdict(set)
    for position, corpus in enumerate(corpora):
        for doc in corpus:
            id_positions[doc.id].add(position)
    colliding = {doc_id for doc_id, owners in id_positions.items() if len(owners) > 1}
    taken = set(id_positions) - colliding
    name_counts = Counter(corpus.name for corpus in corpora)

    documents = []
    for position, corpus in enumerate(corpora):
        prefix = corpus.name if name_counts[corpus.name] == 1 else f"{corpus.name}_{position}"
        for doc in corpus:
            if doc.id in colliding:
                new_id = f"{prefix}/{doc.id}"
                suffix = 1
                while new_id in taken:
                    new_id = f"{prefix}~{suffix}/{doc.id}"
                    suffix += 1
                taken.add(new_id)
                doc = doc.model_copy(update={'id': new_id})
            documents.append(doc)

    if colliding:
        logger.warning(f"合并时 {len(colliding)} 个ID冲突，已加语料名前缀")

    combined = Corpus(name=name, documents=tuple(documents))
    logger.info(f"合并 {len(corpora)} 个语料为 {name}: {len(combined)} 条 "
                f"(正例 {combined.n_pos}, 负例 {combined.n_neg})")
    return combined


def held_out_count(n_label: int, test_fraction: float) -> int:
    """单个标签的测试集数量：ceil(fraction × count)，用有理数计算避免浮点误差"""
    return math.ceil(Fraction(str(test_fraction)) * n_label)


def stratified_split(corpus: Corpus, spec: SplitSpec) -> Tuple[Corpus, Corpus]:
    """
    按标签分层划分 train/dev 与 test

    Args:
        corpus: 待划分语料
        spec: 划分参数

    Returns:
        (train_dev, test)，两者均保持原语料顺序
    """
    by_label: Dict[int, List[int]] = {0: [], 1: []}
    for index, doc in enumerate(corpus):
        by_label[doc.label].append(index)

    for label, indices in by_label.items():
        if not indices:
            raise StratificationError(f"语料 {corpus.name} 中标签 {label} 没有文档，无法分层")

    rng = np.random.default_rng(spec.seed)
    test_indices: Set[int] = set()
    for label in (0, 1):
        indices = np.array(by_label[label])
        n_test = held_out_count(len(indices), spec.test_fraction)
        if n_test >= len(indices):
            logger.warning(f"标签 {label} 的全部 {len(indices)} 条文档都进入测试集")
        chosen = rng.permutation(indices)[:n_test]
        test_indices.update(int(i) for i in chosen)

    train_docs = tuple(doc for i, doc in enumerate(corpus) if i not in test_indices)
    test_docs = tuple(doc for i, doc in enumerate(corpus) if i in test_indices)
    train_dev = Corpus(name=f"{corpus.name}_train_dev", documents=train_docs)
    test = Corpus(name=f"{corpus.name}_test", documents=test_docs)

    logger.info(f"分层划分 {corpus.name}: train/dev {len(train_dev)} (正例 {train_dev.n_pos}), "
                f"test {len(test)} (正例 {test.n_pos})")
    return train_dev, test


def split_assignments(train_dev: Corpus, test: Corpus) -> Dict[str, str]:
    """ID -> train_dev / test"""
    assignments = {doc_id: 'train_dev' for doc_id in train_dev.ids}
    assignments.update({doc_id: 'test' for doc_id in test.ids})
    return assignments


def save_split_assignments(assignments: Mapping[str, str], path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for doc_id, split in assignments.items():
            f.write(json.dumps({'id': doc_id, 'split': split}, ensure_ascii=False) + "\n")
    return path


def load_split_assignments(path: str) -> Dict[str, str]:
    assignments = {}
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if line.strip():
                record = json.loads(line)
                assignments[record['id']] = record['split']
    return assignments


# ---------------------------------------------------------------------------
# 统计
# ---------------------------------------------------------------------------

def _histogram(lengths_by_label: Dict[int, List[int]], bins: int) -> Dict[int, Dict[str, List[float]]]:
    all_lengths = [n for lengths in lengths_by_label.values() for n in lengths]
    if not all_lengths:
        return {}
    edges = np.histogram_bin_edges(all_lengths, bins=bins)
    result = {}
    for label in sorted(lengths_by_label):
        counts, _ = np.histogram(lengths_by_label[label], bins=edges)
        result[label] = {'edges': [float(e) for e in edges], 'counts': [int(c) for c in counts]}
    return result


def compute_stats(corpus: Corpus, split_labels: Optional[Mapping[str, str]] = None,
                  dropped_ids: Optional[Set[str]] = None, bins: int = 20) -> CorpusStats:
    """
    计算语料统计

    Args:
        corpus: 语料
        split_labels: 可选的 ID -> train_dev/test 映射
        dropped_ids: 预处理过滤掉的文档ID，用于报告过滤前后的划分大小
        bins: 直方图分箱数

    Returns:
        语料统计
    """
    split_of = (lambda doc_id: split_labels.get(doc_id, 'unassigned')) if split_labels else (lambda doc_id: 'all')

    topic_counts: Dict[str, Counter] = defaultdict(Counter)
    source_counts: Dict[str, Counter] = defaultdict(Counter)
    lengths_by_label: Dict[int, List[int]] = {0: [], 1: []}
    split_tokens: Dict[str, List[int]] = defaultdict(list)
    split_sentences: Dict[str, List[int]] = defaultdict(list)
    filtered_sizes: Counter = Counter()

    token_counts = []
    sentence_counts = []
    for doc in corpus:
        split = split_of(doc.id)
        n_tok = doc.n_tokens()
        n_sent = doc.n_sentences()
        token_counts.append(n_tok)
        sentence_counts.append(n_sent)
        topic_counts[doc.topic][split] += 1
        source_counts[doc.source][doc.label] += 1
        lengths_by_label[doc.label].append(n_tok)
        split_tokens[split].append(n_tok)
        split_sentences[split].append(n_sent)
        if dropped_ids is not None and doc.id not in dropped_ids:
            filtered_sizes[split] += 1

    n_pos = corpus.n_pos
    n_neg = corpus.n_neg
    per_split = {
        split: {
            'n': len(split_tokens[split]),
            'avg_tokens': float(np.mean(split_tokens[split])),
            'avg_sentences': float(np.mean(split_sentences[split])),
        }
        for split in sorted(split_tokens)
    }

    stats = CorpusStats(
        n_total=len(corpus),
        n_pos=n_pos,
        n_neg=n_neg,
        pos_neg_ratio=Fraction(n_pos, n_neg) if n_neg else None,
        per_topic_counts={topic: dict(sorted(counts.items())) for topic, counts in
                          sorted(topic_counts.items(), key=lambda kv: (-sum(kv[1].values()), kv[0]))},
        avg_tokens=float(np.mean(token_counts)) if token_counts else 0.0,
        avg_sentences=float(np.mean(sentence_counts)) if sentence_counts else 0.0,
        token_length_histogram_per_label=_histogram(lengths_by_label, bins),
        per_source_counts={source: {0: c[0], 1: c[1]} for source, c in sorted(source_counts.items())},
        per_split=per_split,
        filtered_split_sizes={split: filtered_sizes[split] for split in sorted(split_tokens)}
        if dropped_ids is not None else {},
    )
    return stats


# ---------------------------------------------------------------------------
# 合成语料
# ---------------------------------------------------------------------------

LIFELINE_TOPIC_WEIGHTS = {
    "women's health": 3175, "cosmetic OPs": 213, "skin": 165, "bones": 154,
    "gen. med.": 137, "heart": 118, "nerves": 55, "nutrition": 28, "sports": 27,
    "infections": 26, "men's health": 25, "int. organs": 18, "allergies": 10,
    "life": 9, "gastroint. system": 9,
}
LIFELINE_TOPIC_WEIGHTS = {k: v / 4169 for k, v in LIFELINE_TOPIC_WEIGHTS.items()}

ASKAPATIENT_TOPIC_WEIGHTS = {"drug review": 1.0}

_FILLER = {
    'de': ("ich habe seit einigen wochen das gefühl dass es besser wird aber mein arzt "
           "meinte wir sollten noch warten und dann schauen wie es weitergeht heute war "
           "ich beim termin und habe viele fragen gestellt die antwort war ganz gut "
           "morgens gehe ich spazieren abends lese ich oft noch etwas danke für eure "
           "tipps im forum hier hat jemand ähnliche erfahrungen gemacht").split(),
    'en': ("i have been feeling like things are getting better for a few weeks but my "
           "doctor said we should wait and see how it goes today i went to the "
           "appointment and asked a lot of questions the answer was quite good in the "
           "morning i go for a walk in the evening i often read thanks for your tips "
           "on this forum has anyone had similar experiences").split(),
}

_EFFECTS = {
    'de': ["bekam starke kopfschmerzen", "mir war ständig übel", "habe zehn kilo zugenommen",
           "leide unter schlafstörungen", "bekam einen ausschlag", "hatte herzrasen",
           "fühlte mich extrem müde", "habe haarausfall bekommen"],
    'en': ["got severe headaches", "felt nauseous all the time", "gained ten pounds",
           "suffered from insomnia", "developed a rash", "had heart palpitations",
           "felt extremely tired", "started losing hair"],
}

_TAKE_PHRASE = {'de': "seit ich {drug} nehme", 'en': "since i started taking {drug}"}

_WOMENS_HEALTH_WORDS = {
    'de': ["wechseljahre", "hitzewallungen", "periode", "zyklus", "wj"],
    'en': ["menopause", "flushes", "period", "cycle"],
}


def _load_synthetic_drugs() -> List[str]:
    with open(SYNTHETIC_MED_LEXICON, 'r', encoding='utf-8') as f:
        return [line.strip() for line in f if line.strip() and not line.startswith('#')]


def _sentences_from_tokens(tokens: List[str], rng: np.random.Generator) -> str:
    """把词序列切成 6-16 词的句子"""
    sentences = []
    position = 0
    while position < len(tokens):
        size = int(rng.integers(6, 17))
        chunk = tokens[position:position + size]
        position += size
        sentence = " ".join(chunk)
        sentences.append(sentence[:1].upper() + sentence[1:] + ".")
    return " ".join(sentences)


def generate_synthetic(n_pos: int, n_neg: int, topic_weights: Mapping[str, float],
                       lang: str, seed: int, source: str = "synthetic",
                       name: Optional[str] = None) -> Corpus:
    """
    生成合成语料，正例文档更长且包含药名与不良反应短语

    Args:
        n_pos: 正例数量
        n_neg: 负例数量
        topic_weights: 主题 -> 权重，总和需为1
        lang: 语言代码 (de/en)
        seed: 随机种子
        source: 来源标记
        name: 语料名称

    Returns:
        合成语料
    """
    if n_pos < 0 or n_neg < 0:
        raise ArgumentError(f"n_pos / n_neg 不能为负: {n_pos}, {n_neg}")
    if not topic_weights:
        raise ArgumentError("topic_weights 不能为空")
    total_weight = sum(topic_weights.values())
    if abs(total_weight - 1.0) > 1e-6:
        raise ArgumentError(f"topic_weights 总和必须为1，实际为 {total_weight}")

    vocab_lang = lang if lang in _FILLER else 'en'
    filler = _FILLER[vocab_lang]
    effects = _EFFECTS[vocab_lang]
    drugs = _load_synthetic_drugs()
    topics = sorted(topic_weights)
    probs = np.array([topic_weights[t] for t in topics], dtype=float)
    probs = probs / probs.sum()

    rng = np.random.default_rng(seed)
    labels = np.array([1] * n_pos + [0] * n_neg)
    rng.shuffle(labels)

    documents = []
    for index, label in enumerate(labels):
        topic = topics[int(rng.choice(len(topics), p=probs))]
        if label == 1:
            length = int(np.clip(rng.lognormal(mean=np.log(140), sigma=0.45), 12, 600))
        else:
            length = int(np.clip(rng.lognormal(mean=np.log(95), sigma=0.6), 2, 600))
        tokens = [filler[int(i)] for i in rng.integers(0, len(filler), size=length)]

        if label == 1:
            drug = drugs[int(rng.integers(0, len(drugs)))]
            phrase = _TAKE_PHRASE[vocab_lang].format(drug=drug).split()
            phrase += effects[int(rng.integers(0, len(effects)))].split()
            insert_at = int(rng.integers(0, max(1, len(tokens) - len(phrase))))
            tokens[insert_at:insert_at + len(phrase)] = phrase
        elif length > 10 and rng.random() < 0.3:
            # 部分负例也提到药物，但没有不良反应
            drug = drugs[int(rng.integers(0, len(drugs)))]
            tokens[int(rng.integers(0, len(tokens)))] = drug

        if topic.startswith("women") and len(tokens) > 4 and rng.random() < 0.5:
            wh_words = _WOMENS_HEALTH_WORDS[vocab_lang]
            tokens.insert(int(rng.integers(0, len(tokens))), wh_words[int(rng.integers(0, len(wh_words)))])

        documents.append(Document(
            id=f"{source}-{lang}-{index:05d}",
            text=_sentences_from_tokens(tokens, rng),
            label=int(label),
            topic=topic,
            lang=lang,
            source=source,
        ))

    corpus = Corpus(name=name or f"{source}_{lang}", documents=tuple(documents))
    logger.info(f"生成合成语料 {corpus.name}: 正例 {n_pos}, 负例 {n_neg}, 种子 {seed}")
    return corpus
