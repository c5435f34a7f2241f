"""
小样本集合构建工具
按三种模式从目标语料池（及源语料池）中抽取互不相交的 train/dev 集合
"""
import json
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.tools.corpus_tools import Corpus, SplitSpec, stratified_split
from src.utils.errors import ArgumentError, CapacityError, SamplingInvariantError

logger = logging.getLogger(__name__)


class FewShotMode(str, Enum):
    """小样本模式"""
    PER_CLASS = "per_class"      # shots 为正负例总数，各占一半
    ADD_NEG = "add_neg"          # shots 为正例数，另加 n_neg 个负例
    ADD_SOURCE = "add_source"    # 同 add_neg，另加 n_source 个源语言文档


class FewShotSpec(BaseModel):
    """
    小样本集合描述

    shots 的含义随模式而变：per_class 下是正负例总数，
    add_neg / add_source 下只是正例数。
    """

    model_config = ConfigDict(frozen=True)

    mode: FewShotMode
    shots: int = Field(ge=1)
    n_neg: int = Field(default=0, ge=0)
    n_source: int = Field(default=0, ge=0)
    sampling_seed: int = 1

    @model_validator(mode='after')
    def _check_mode(self) -> 'FewShotSpec':
        if self.mode == FewShotMode.PER_CLASS:
            if self.shots % 2:
                raise ValueError(f"per_class 模式下 shots 必须为偶数，实际为 {self.shots}")
            if self.n_neg or self.n_source:
                raise ValueError("per_class 模式下 n_neg 与 n_source 必须为 0")
        elif self.mode == FewShotMode.ADD_NEG:
            if self.n_neg <= 0:
                raise ValueError("add_neg 模式需要 n_neg > 0")
            if self.n_source:
                raise ValueError("add_neg 模式下 n_source 必须为 0")
        elif self.n_neg <= 0 or self.n_source <= 0:
            raise ValueError("add_source 模式需要 n_neg > 0 且 n_source > 0")
        return self

    @property
    def n_target_pos(self) -> int:
        return self.shots // 2 if self.mode == FewShotMode.PER_CLASS else self.shots

    @property
    def n_target_neg(self) -> int:
        return self.shots // 2 if self.mode == FewShotMode.PER_CLASS else self.n_neg

    @property
    def set_size(self) -> int:
        """单个 train（或 dev）集合的文档数"""
        return self.n_target_pos + self.n_target_neg + self.n_source

    @property
    def label(self) -> str:
        """报告中的行名，如 "40 + 300 neg + 300 source" """
        if self.mode == FewShotMode.PER_CLASS:
            return f"{self.shots} per class"
        text = f"{self.shots} + {self.n_neg} neg"
        if self.mode == FewShotMode.ADD_SOURCE:
            text += f" + {self.n_source} source"
        return text

    def with_seed(self, sampling_seed: int) -> 'FewShotSpec':
        return self.model_copy(update={'sampling_seed': sampling_seed})


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    role: str
    origin: str


@dataclass
class FewShotSets:
    """一次采样得到的 train/dev 集合，spec 为空表示全量数据集合"""

    train: Corpus
    dev: Corpus
    spec: Optional[FewShotSpec] = None
    manifest: List[ManifestEntry] = field(default_factory=list)

    def composition(self, role: str) -> Dict[str, int]:
        """按来源与标签统计集合组成"""
        corpus = self.train if role == 'train' else self.dev
        origins = {(e.id, e.role): e.origin for e in self.manifest}
        counts = {'target_pos': 0, 'target_neg': 0, 'source': 0}
        for doc in corpus:
            if origins.get((doc.id, role)) == 'source':
                counts['source'] += 1
            elif doc.label == 1:
                counts['target_pos'] += 1
            else:
                counts['target_neg'] += 1
        return counts


def shuffle_pool(pool: Corpus, seed: int) -> Corpus:
    """按种子重排语料池"""
    order = np.random.default_rng(seed).permutation(len(pool))
    return Corpus(name=f"{pool.name}_seed{seed}", documents=tuple(pool.documents[int(i)] for i in order))


def enumerate_seed_pools(train_dev: Corpus, seeds: Sequence[int]) -> List[Corpus]:
    """
    为每个采样种子生成一份重排后的语料池

    Args:
        train_dev: 目标语言 train/dev 语料
        seeds: 互不相同的采样种子，默认协议为 5 个

    Returns:
        与种子一一对应的语料池
    """
    if not seeds:
        raise ArgumentError("至少需要一个采样种子")
    if len(set(seeds)) != len(seeds):
        raise ArgumentError(f"采样种子重复: {list(seeds)}")
    if len(seeds) != 5:
        logger.info(f"使用 {len(seeds)} 个采样种子（默认协议为 5 个）")
    return [shuffle_pool(train_dev, seed) for seed in seeds]


def _take(docs: List, start: int, count: int) -> List:
    return docs[start:start + count]


def build_fewshot_sets(target_pool: Corpus, source_pool: Optional[Corpus], spec: FewShotSpec,
                       held_out_ids: Optional[Iterable[str]] = None) -> FewShotSets:
    """
    构建小样本 train/dev 集合

    目标语言文档按语料池顺序抽取（先 train 后 dev），源语言文档用采样种子均匀抽取。

    Args:
        target_pool: 目标语言语料池（通常来自 enumerate_seed_pools）
        source_pool: 源语言语料池，仅 add_source 模式非空
        spec: 小样本描述
        held_out_ids: 测试集ID，用于检查泄漏

    Returns:
        小样本集合
    """
    has_source = source_pool is not None and len(source_pool) > 0
    if spec.mode == FewShotMode.ADD_SOURCE and not has_source:
        raise ArgumentError("add_source 模式需要非空的源语言语料池")
    if spec.mode != FewShotMode.ADD_SOURCE and has_source:
        raise ArgumentError(f"{spec.mode.value} 模式不接受源语言语料池")

    positives = [doc for doc in target_pool if doc.label == 1]
    negatives = [doc for doc in target_pool if doc.label == 0]
    if 2 * spec.n_target_pos > len(positives):
        raise CapacityError("正例", 2 * spec.n_target_pos, len(positives))
    if 2 * spec.n_target_neg > len(negatives):
        raise CapacityError("负例", 2 * spec.n_target_neg, len(negatives))

    train_docs = _take(positives, 0, spec.n_target_pos) + _take(negatives, 0, spec.n_target_neg)
    dev_docs = (_take(positives, spec.n_target_pos, spec.n_target_pos)
                + _take(negatives, spec.n_target_neg, spec.n_target_neg))
    manifest = [ManifestEntry(doc.id, 'train', 'target') for doc in train_docs]
    manifest += [ManifestEntry(doc.id, 'dev', 'target') for doc in dev_docs]

    if spec.mode == FewShotMode.ADD_SOURCE:
        if 2 * spec.n_source > len(source_pool):
            raise CapacityError("源语言文档", 2 * spec.n_source, len(source_pool))
        order = np.random.default_rng(spec.sampling_seed).permutation(len(source_pool))
        source_docs = [source_pool.documents[int(i)] for i in order[:2 * spec.n_source]]
        train_source = source_docs[:spec.n_source]
        dev_source = source_docs[spec.n_source:]
        target_ids = {doc.id for doc in target_pool}
        clashes = [doc.id for doc in source_docs if doc.id in target_ids]
        if clashes:
            raise SamplingInvariantError(f"源语言文档ID与目标语言冲突: {clashes[:5]}")
        train_docs += train_source
        dev_docs += dev_source
        manifest += [ManifestEntry(doc.id, 'train', 'source') for doc in train_source]
        manifest += [ManifestEntry(doc.id, 'dev', 'source') for doc in dev_source]

    train_ids = {doc.id for doc in train_docs}
    dev_ids = {doc.id for doc in dev_docs}
    overlap = train_ids & dev_ids
    if overlap:
        raise SamplingInvariantError(f"train 与 dev 存在重叠文档: {sorted(overlap)[:5]}")
    if held_out_ids is not None:
        leaked = (train_ids | dev_ids) & set(held_out_ids)
        if leaked:
            raise SamplingInvariantError(f"采样集合包含测试集文档: {sorted(leaked)[:5]}")

    base = f"{target_pool.name}_{spec.mode.value}_{spec.shots}"
    sets = FewShotSets(
        train=Corpus(name=f"{base}_train", documents=tuple(train_docs)),
        dev=Corpus(name=f"{base}_dev", documents=tuple(dev_docs)),
        spec=spec,
        manifest=manifest,
    )
    logger.debug(f"采样 {spec.label} (种子 {spec.sampling_seed}): train {len(sets.train)}, dev {len(sets.dev)}")
    return sets


def build_full_data_sets(train_dev: Corpus, seed: int, dev_fraction: float = 0.2) -> FewShotSets:
    """
    全量数据场景：把整个目标语言 train/dev 语料分层划分为 train 与 dev

    Args:
        train_dev: 目标语言 train/dev 语料
        seed: 采样种子
        dev_fraction: dev 占比

    Returns:
        spec 为空的集合
    """
    train, dev = stratified_split(train_dev, SplitSpec(test_fraction=dev_fraction, seed=seed))
    manifest = [ManifestEntry(doc.id, 'train', 'target') for doc in train]
    manifest += [ManifestEntry(doc.id, 'dev', 'target') for doc in dev]
    return FewShotSets(
        train=train.with_name(f"{train_dev.name}_full_train_seed{seed}"),
        dev=dev.with_name(f"{train_dev.name}_full_dev_seed{seed}"),
        spec=None,
        manifest=manifest,
    )


def write_manifest(sets: FewShotSets, path: str) -> str:
    """写出 JSONL 采样清单"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for entry in sets.manifest:
            f.write(json.dumps({'id': entry.id, 'role': entry.role, 'origin': entry.origin},
                               ensure_ascii=False) + "\n")
    return path


def load_manifest(path: str) -> List[ManifestEntry]:
    entries = []
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if line.strip():
                record = json.loads(line)
                entries.append(ManifestEntry(record['id'], record['role'], record['origin']))
    return entries
