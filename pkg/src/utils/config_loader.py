"""
实验配置
YAML 文件经 pydantic 模型校验，校验失败时给出逐字段的错误信息
"""
import logging
import os
from typing import Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.backends.base import TRAIN_PRESETS, TrainConfig
from src.tasks.ensemble_voting import DEFAULT_MODEL_SEEDS, DEFAULT_SAMPLING_SEEDS, EnsembleSpec, TieBreak
from src.tools.corpus_tools import ASKAPATIENT_TOPIC_WEIGHTS, LIFELINE_TOPIC_WEIGHTS
from src.tools.preprocess_tools import NormalizerConfig
from src.tools.sampling_tools import FewShotMode, FewShotSpec
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

RUN_DIR_ENV = 'ADR_RUN_DIR'
TOPIC_WEIGHT_PRESETS = {
    'lifeline': LIFELINE_TOPIC_WEIGHTS,
    'askapatient': ASKAPATIENT_TOPIC_WEIGHTS,
}
TWO_STAGE_BACKENDS = ('stub', 'transformer')


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class ExperimentSection(_Section):
    name: str = "experiment"
    run_dir: str = "runs/experiment"
    max_workers: int = Field(default=4, ge=1)
    strict: bool = False
    save_checkpoints: bool = False


class SyntheticSpec(_Section):
    n_pos: int = Field(ge=0)
    n_neg: int = Field(ge=0)
    topic_weights: Union[str, Dict[str, float]] = 'lifeline'
    lang: str = 'de'
    seed: int = 7
    source: str = 'synthetic'

    @field_validator('topic_weights')
    @classmethod
    def _known_preset(cls, value):
        if isinstance(value, str) and value not in TOPIC_WEIGHT_PRESETS:
            raise ValueError(f"未知的主题权重预设 {value}，可选 {sorted(TOPIC_WEIGHT_PRESETS)}")
        return value

    def weights(self) -> Dict[str, float]:
        return TOPIC_WEIGHT_PRESETS[self.topic_weights] if isinstance(self.topic_weights, str) else self.topic_weights


class CorpusEntry(_Section):
    """语料来源：文件或合成生成器，二选一"""

    name: Optional[str] = None
    path: Optional[str] = None
    format: Literal['jsonl', 'csv'] = 'jsonl'
    synthetic: Optional[SyntheticSpec] = None

    @model_validator(mode='after')
    def _one_source(self) -> 'CorpusEntry':
        if (self.path is None) == (self.synthetic is None):
            raise ValueError("path 与 synthetic 必须且只能配置一个")
        return self


class DataSection(_Section):
    target: CorpusEntry
    source: List[CorpusEntry] = Field(default_factory=list)
    source_name: str = 'source'


class EmbeddingsSection(_Section):
    kind: Literal['hashed', 'keyed_vectors'] = 'hashed'
    dim: int = Field(default=50, ge=1)
    seed: int = 0
    files: Dict[str, str] = Field(default_factory=dict)
    aligned: bool = False
    lowercase: bool = True


class LexiconsSection(_Section):
    med: Optional[str] = None
    wh: Optional[str] = None


class SplitSection(_Section):
    test_fraction: float = Field(default=0.2, gt=0, lt=1)
    seed: int = 42
    dev_fraction: float = Field(default=0.2, gt=0, lt=1)


class EnsembleSection(_Section):
    model_seeds: List[int] = Field(default_factory=lambda: list(DEFAULT_MODEL_SEEDS))
    sampling_seeds: List[int] = Field(default_factory=lambda: list(DEFAULT_SAMPLING_SEEDS))
    tie_break: TieBreak = TieBreak.POSITIVE
    std_ddof: int = Field(default=1, ge=0)


class BackendSection(_Section):
    stage1: Optional[TrainConfig] = None
    stage2: Optional[TrainConfig] = None
    full: Optional[TrainConfig] = None
    class_weight: Optional[Literal['balanced']] = 'balanced'

    @field_validator('stage1', 'stage2', 'full', mode='before')
    @classmethod
    def _expand_preset(cls, value):
        # 允许直接写预设名，例如 stage1: xlmr_stage1
        if isinstance(value, str):
            if value not in TRAIN_PRESETS:
                raise ValueError(f"未知的训练预设 {value}，可选 {sorted(TRAIN_PRESETS)}")
            return TRAIN_PRESETS[value]
        return value


class FewShotBlock(_Section):
    mode: FewShotMode
    shots: int
    n_neg: int = 0
    n_source: int = 0

    def to_spec(self, sampling_seed: int = 1) -> FewShotSpec:
        return FewShotSpec(mode=self.mode, shots=self.shots, n_neg=self.n_neg,
                           n_source=self.n_source, sampling_seed=sampling_seed)


class ScenarioConfig(_Section):
    name: str
    kind: Literal['zero_shot', 'full', 'few_shot']
    backend: str = 'stub'
    fewshot: Optional[FewShotBlock] = None
    model_seeds: Optional[List[int]] = None
    label: Optional[str] = None

    @model_validator(mode='after')
    def _fewshot_block(self) -> 'ScenarioConfig':
        if self.kind == 'few_shot' and self.fewshot is None:
            raise ValueError(f"场景 {self.name} 为 few_shot，需要 fewshot 配置")
        if self.fewshot is not None:
            # 借用 FewShotSpec 的模式约束
            try:
                self.fewshot.to_spec()
            except ValidationError as e:
                raise ValueError("; ".join(err['msg'] for err in e.errors()))
        return self

    @property
    def row_label(self) -> str:
        if self.label:
            return self.label
        prefix = f"{self.backend} "
        if self.kind == 'few_shot':
            return prefix + self.fewshot.to_spec().label
        return prefix + self.kind.replace('_', '-')


class ReportSection(_Section):
    decimals: int = Field(default=2, ge=0)
    postprocess: bool = True
    plots: bool = False
    error_analysis: bool = True


class ExperimentConfig(_Section):
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    data: DataSection
    embeddings: EmbeddingsSection = Field(default_factory=EmbeddingsSection)
    lexicons: LexiconsSection = Field(default_factory=LexiconsSection)
    preprocess: NormalizerConfig = Field(default_factory=NormalizerConfig)
    split: SplitSection = Field(default_factory=SplitSection)
    ensemble: EnsembleSection = Field(default_factory=EnsembleSection)
    backends: Dict[str, BackendSection] = Field(default_factory=dict)
    scenarios: List[ScenarioConfig] = Field(default_factory=list)
    report: ReportSection = Field(default_factory=ReportSection)
    model_registry: Optional[str] = None

    @model_validator(mode='after')
    def _cross_checks(self) -> 'ExperimentConfig':
        names = [s.name for s in self.scenarios]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"场景名重复: {duplicates}")
        for scenario in self.scenarios:
            section = self.backends.get(scenario.backend)
            if section is None:
                raise ValueError(f"场景 {scenario.name} 使用的后端 {scenario.backend} 没有 backends 配置")
            two_stage = scenario.backend in TWO_STAGE_BACKENDS
            if scenario.kind == 'zero_shot' and not two_stage:
                raise ValueError(f"场景 {scenario.name}: 后端 {scenario.backend} 不支持 zero_shot")
            if two_stage and section.stage1 is None:
                raise ValueError(f"场景 {scenario.name}: 后端 {scenario.backend} 需要 stage1 配置")
            if scenario.kind == 'zero_shot' or two_stage:
                if not self.data.source:
                    raise ValueError(f"场景 {scenario.name} 需要源语言数据 data.source")
            if scenario.kind == 'few_shot' and section.stage2 is None:
                raise ValueError(f"场景 {scenario.name}: 后端 {scenario.backend} 需要 stage2 配置")
            if scenario.kind == 'full' and section.full is None:
                raise ValueError(f"场景 {scenario.name}: 后端 {scenario.backend} 需要 full 配置")
            if scenario.fewshot and scenario.fewshot.mode == FewShotMode.ADD_SOURCE and not self.data.source:
                raise ValueError(f"场景 {scenario.name} 为 add_source，需要 data.source")
            if scenario.backend == 'svm' and self.embeddings.kind == 'keyed_vectors' and not self.embeddings.files:
                raise ValueError("keyed_vectors 词向量需要配置 embeddings.files")
        return self

    def ensemble_spec(self, scenario: Optional[ScenarioConfig] = None) -> EnsembleSpec:
        """场景的集成描述；单阶段后端（svm）默认只有一个投票者"""
        model_seeds = list(self.ensemble.model_seeds)
        fewshot = None
        if scenario is not None:
            if scenario.model_seeds:
                model_seeds = list(scenario.model_seeds)
            elif scenario.backend not in TWO_STAGE_BACKENDS:
                model_seeds = model_seeds[:1]
            if scenario.fewshot is not None:
                fewshot = scenario.fewshot.to_spec(self.ensemble.sampling_seeds[0])
        return EnsembleSpec(model_seeds=model_seeds, sampling_seeds=list(self.ensemble.sampling_seeds),
                            fewshot_spec=fewshot, tie_break=self.ensemble.tie_break,
                            std_ddof=self.ensemble.std_ddof)

    def referenced_paths(self) -> Dict[str, str]:
        paths = {}
        if self.data.target.path:
            paths['data.target.path'] = self.data.target.path
        for i, entry in enumerate(self.data.source):
            if entry.path:
                paths[f"data.source.{i}.path"] = entry.path
        for lang, path in self.embeddings.files.items():
            paths[f"embeddings.files.{lang}"] = path
        if self.lexicons.med:
            paths['lexicons.med'] = self.lexicons.med
        if self.lexicons.wh:
            paths['lexicons.wh'] = self.lexicons.wh
        return paths


def _format_errors(error: ValidationError) -> List[str]:
    return [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in error.errors()]


def _resolve(path: str, base_dir: str) -> str:
    if os.path.isabs(path) or os.path.exists(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def load_experiment_config(path: str) -> ExperimentConfig:
    """
    读取并校验实验配置

    相对路径先按当前目录、再按配置文件所在目录解析；环境变量 ADR_RUN_DIR 覆盖 experiment.run_dir。

    Raises:
        ConfigError: 文件无法解析、字段不合法或引用的路径不存在
    """
    if not os.path.exists(path):
        raise ConfigError(f"配置文件不存在: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"配置文件解析失败: {path}: {e}")
    if not isinstance(raw, dict):
        raise ConfigError(f"配置文件顶层必须是映射: {path}")

    try:
        config = ExperimentConfig(**raw)
    except ValidationError as e:
        raise ConfigError(f"配置校验失败: {path}", field_errors=_format_errors(e))

    base_dir = os.path.dirname(os.path.abspath(path))
    data = config.data.model_copy(deep=True)
    if data.target.path:
        data.target.path = _resolve(data.target.path, base_dir)
    for entry in data.source:
        if entry.path:
            entry.path = _resolve(entry.path, base_dir)
    embeddings = config.embeddings.model_copy(
        update={'files': {lang: _resolve(p, base_dir) for lang, p in config.embeddings.files.items()}})
    lexicons = LexiconsSection(
        med=_resolve(config.lexicons.med, base_dir) if config.lexicons.med else None,
        wh=_resolve(config.lexicons.wh, base_dir) if config.lexicons.wh else None,
    )
    registry = _resolve(config.model_registry, base_dir) if config.model_registry else None
    experiment = config.experiment
    if os.getenv(RUN_DIR_ENV):
        experiment = experiment.model_copy(update={'run_dir': os.environ[RUN_DIR_ENV]})
        logger.info(f"运行目录由 {RUN_DIR_ENV} 覆盖为 {experiment.run_dir}")
    config = config.model_copy(update={'data': data, 'embeddings': embeddings, 'lexicons': lexicons,
                                       'model_registry': registry, 'experiment': experiment})

    missing = [f"{field_name}: 路径不存在 {p}" for field_name, p in config.referenced_paths().items()
               if not os.path.exists(p)]
    if missing:
        raise ConfigError(f"配置引用的路径不存在: {path}", field_errors=missing)

    logger.debug(f"配置加载完成: {path} ({len(config.scenarios)} 个场景)")
    return config
