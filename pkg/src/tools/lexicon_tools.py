"""
词表后处理工具
用药物词表和妇女健康词表把正例预测改判为负例，两条规则彼此独立
"""
import logging
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple, Union

from src.tools.corpus_tools import Corpus, Document
from src.tools.metrics_tools import MetricsReport, confusion_by_id, report
from src.utils.errors import AlignmentError, ArgumentError, LexiconLoadError

logger = logging.getLogger(__name__)

WORD_PATTERN = re.compile(r"\w+")
MATCH_POLICY = "whole_token_case_insensitive"


class RuleName(str, Enum):
    """后处理规则"""
    MED_PRESENCE = "med_presence"
    WOMENS_HEALTH = "womens_health"

    @property
    def short(self) -> str:
        return "med" if self is RuleName.MED_PRESENCE else "wh"

    @classmethod
    def parse(cls, value: Union[str, 'RuleName']) -> 'RuleName':
        aliases = {'med': cls.MED_PRESENCE, 'wh': cls.WOMENS_HEALTH}
        if isinstance(value, cls):
            return value
        if value in aliases:
            return aliases[value]
        try:
            return cls(value)
        except ValueError:
            raise ArgumentError(f"未知的后处理规则: {value}")


def tokenize(text: str) -> Tuple[str, ...]:
    """小写后按 \\w+ 切词"""
    return tuple(WORD_PATTERN.findall(text.lower()))


def normalize_term(term: str) -> str:
    return " ".join(term.lower().split())


@dataclass(frozen=True)
class Lexicon:
    """规范化词表，支持多词短语的整词匹配"""

    name: str
    terms: FrozenSet[str]
    match_policy: str = MATCH_POLICY
    _phrases: Dict[int, FrozenSet[Tuple[str, ...]]] = field(default_factory=dict, init=False, compare=False, repr=False)

    def __post_init__(self):
        if not self.terms:
            raise LexiconLoadError(f"词表 {self.name} 为空")
        if any(not t.strip() for t in self.terms):
            raise LexiconLoadError(f"词表 {self.name} 含空词条")
        by_length: Dict[int, set] = {}
        for term in self.terms:
            tokens = tokenize(term)
            if tokens:
                by_length.setdefault(len(tokens), set()).add(tokens)
        object.__setattr__(self, '_phrases', {n: frozenset(p) for n, p in by_length.items()})

    def __len__(self) -> int:
        return len(self.terms)

    def find(self, text: str) -> Optional[str]:
        """返回文本中第一个命中的词条，未命中返回 None"""
        tokens = tokenize(text)
        for n in sorted(self._phrases):
            phrases = self._phrases[n]
            for start in range(len(tokens) - n + 1):
                window = tokens[start:start + n]
                if window in phrases:
                    return " ".join(window)
        return None

    def matches(self, text: str) -> bool:
        return self.find(text) is not None


@dataclass(frozen=True)
class RuleOutcome:
    """单个文档的规则结果；flipped 只可能是 1 -> 0"""

    doc_id: str
    original: int
    corrected: int
    rule: RuleName
    flipped: bool
    matched_term: Optional[str] = None


def load_lexicon(path: str, name: Optional[str] = None) -> Lexicon:
    """
    读取词表文件，一行一个词条，# 开头为注释

    Args:
        path: UTF-8 文本文件
        name: 词表名称，默认取文件名

    Returns:
        去重、规范化后的词表
    """
    lexicon_name = name or os.path.splitext(os.path.basename(path))[0]
    try:
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.readlines()
    except (OSError, UnicodeDecodeError) as e:
        raise LexiconLoadError(f"无法读取词表 {path}: {e}")

    terms = set()
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        term = normalize_term(stripped)
        if not tokenize(term):
            logger.warning(f"{path}:{line_no} 词条 {stripped!r} 不含可匹配的词，已跳过")
            continue
        terms.add(term)

    if not terms:
        raise LexiconLoadError(f"词表 {path} 没有有效词条")
    logger.info(f"词表 {lexicon_name} 加载完成: {len(terms)} 个词条")
    return Lexicon(name=lexicon_name, terms=frozenset(terms))


def apply_med_rule(doc: Document, pred: int, lex: Lexicon) -> RuleOutcome:
    """正例预测中没有任何药名时改判为负例"""
    if pred != 1:
        return RuleOutcome(doc.id, pred, pred, RuleName.MED_PRESENCE, False)
    term = lex.find(doc.text)
    corrected = 1 if term else 0
    return RuleOutcome(doc.id, pred, corrected, RuleName.MED_PRESENCE, corrected != pred, term)


def apply_wh_rule(doc: Document, pred: int, lex: Lexicon) -> RuleOutcome:
    """正例预测中出现妇女健康词条时改判为负例"""
    if pred != 1:
        return RuleOutcome(doc.id, pred, pred, RuleName.WOMENS_HEALTH, False)
    term = lex.find(doc.text)
    corrected = 0 if term else 1
    return RuleOutcome(doc.id, pred, corrected, RuleName.WOMENS_HEALTH, corrected != pred, term)


RULES = {
    RuleName.MED_PRESENCE: apply_med_rule,
    RuleName.WOMENS_HEALTH: apply_wh_rule,
}


def apply_rule(rule: Union[str, RuleName], docs: Mapping[str, Document], preds: Mapping[str, int],
               lex: Lexicon) -> List[RuleOutcome]:
    """
    对一组预测应用单条规则

    Args:
        rule: 规则名
        docs: ID -> 文档
        preds: ID -> 预测标签

    Returns:
        按 preds 顺序的规则结果
    """
    rule_fn = RULES[RuleName.parse(rule)]
    missing = [doc_id for doc_id in preds if doc_id not in docs]
    if missing:
        raise AlignmentError(f"预测中有 {len(missing)} 个ID找不到文档: {missing[:5]}")
    outcomes = [rule_fn(docs[doc_id], pred, lex) for doc_id, pred in preds.items()]
    n_flipped = sum(1 for o in outcomes if o.flipped)
    logger.debug(f"规则 {RuleName.parse(rule).value} 改判 {n_flipped}/{len(outcomes)} 条")
    return outcomes


def corrected_labels(outcomes: List[RuleOutcome]) -> Dict[str, int]:
    return {o.doc_id: o.corrected for o in outcomes}


def evaluate_rules(preds: Mapping[str, int], gold: Corpus,
                   lexicons: Mapping[Union[str, RuleName], Lexicon]) -> Dict[RuleName, MetricsReport]:
    """
    每条规则都从原始预测出发分别计算指标，规则之间不串联

    Args:
        preds: 投票后的最终预测
        gold: 金标准语料（提供文本与标签）
        lexicons: 规则 -> 词表

    Returns:
        规则 -> 指标报告
    """
    gold_docs = gold.by_id()
    if set(preds) != set(gold_docs):
        missing = set(gold_docs) - set(preds)
        extra = set(preds) - set(gold_docs)
        raise AlignmentError(f"预测与金标准ID不一致: 缺少 {len(missing)} 条，多出 {len(extra)} 条")

    gold_labels = {doc_id: doc.label for doc_id, doc in gold_docs.items()}
    reports = {}
    for rule, lex in lexicons.items():
        outcomes = apply_rule(rule, gold_docs, preds, lex)
        reports[RuleName.parse(rule)] = report(confusion_by_id(corrected_labels(outcomes), gold_labels))
    return reports
