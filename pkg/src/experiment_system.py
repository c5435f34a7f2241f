"""
实验系统主协调器
把语料、预处理、划分、两阶段训练、集成投票、后处理与报告串成可续跑的流水线
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set

from src.backends.base import ClassifierBackend, Prediction, TrainedModel, fit_stage1, predict
from src.backends.registry import get_backend, load_model_registry
from src.backends.svm_backend import (
    HashedEmbeddingSource, KeyedVectorsEmbeddingSource, MultilingualEmbeddingSource,
)
from src.tasks.ensemble_voting import EnsembleSpec, aggregate_reports, single_result
from src.tools.corpus_tools import (
    Corpus, SplitSpec, combine, compute_stats, generate_synthetic, load_corpus, save_corpus,
    save_split_assignments, split_assignments, stratified_split,
)
from src.tools.lexicon_tools import Lexicon, RuleName, load_lexicon
from src.tools.metrics_tools import MetricsReport, confusion_by_id, report
from src.tools.preprocess_tools import ProcessedDocument, normalize_corpus
from src.tools.reporting_tools import (
    plot_histograms, read_predictions_csv, read_votes_csv, write_aggregate, write_error_analysis,
    write_predictions_csv, write_seed_table, write_stats, write_votes_csv,
)
from src.tools.sampling_tools import (
    FewShotMode, FewShotSets, FewShotSpec, build_fewshot_sets, build_full_data_sets,
    enumerate_seed_pools, write_manifest,
)
from src.utils.config_loader import CorpusEntry, ExperimentConfig, ScenarioConfig
from src.utils.errors import ConfigError, GridError
from src.utils.grid_runner import (
    GridRunner, ScenarioResult, SeedOutcome, ensemble_auc, score_votes, vote_and_score,
)
from src.utils.run_manifest import (
    RunLayout, RunManifest, is_done, mark_done, sha256_bytes, snapshot_config,
)

logger = logging.getLogger(__name__)

ZERO_SHOT_SEED = 0


@dataclass
class PreparedData:
    """划分并预处理后的语料"""

    target_train_dev: Corpus
    target_test: Corpus
    target_test_raw: Corpus
    test_docs: List[ProcessedDocument]
    processed_test: Dict[str, ProcessedDocument]
    target_split: Dict[str, str]
    dropped_ids: Set[str]
    source_train: Optional[Corpus] = None
    source_dev: Optional[Corpus] = None
    source_test: Optional[Corpus] = None
    source_pool: Optional[Corpus] = None
    source_test_docs: List[ProcessedDocument] = field(default_factory=list)
    source_split: Dict[str, str] = field(default_factory=dict)
    source_dropped_ids: Set[str] = field(default_factory=set)


class ExperimentSystem:
    """实验系统主类"""

    def __init__(self, config: ExperimentConfig, config_path: Optional[str] = None):
        """
        Args:
            config: 已校验的实验配置
            config_path: 配置文件路径，存在时按原字节快照到运行目录
        """
        self.config = config
        self.layout = RunLayout(config.experiment.run_dir).ensure()
        self.manifest = RunManifest(self.layout.root)
        if config_path:
            self.config_hash = snapshot_config(config_path, self.layout.root)
        else:
            self.config_hash = sha256_bytes(config.model_dump_json().encode('utf-8'))

        self.target_raw: Optional[Corpus] = None
        self.source_raw: Optional[Corpus] = None
        self.data: Optional[PreparedData] = None
        self.lexicons: Dict[RuleName, Lexicon] = self._load_lexicons()
        self.results: Dict[str, ScenarioResult] = {}
        self._backends: Dict[str, ClassifierBackend] = {}
        self._stage1: Dict[str, Dict[int, TrainedModel]] = {}
        self._source_evaluated: Set[tuple] = set()
        self._ran: Dict[str, ScenarioConfig] = {}

        logger.info(f"实验系统初始化完成: {config.experiment.name}，运行目录 {self.layout.root}")

    # ------------------------------------------------------------------
    # 数据
    # ------------------------------------------------------------------

    def _load_lexicons(self) -> Dict[RuleName, Lexicon]:
        lexicons = {}
        if self.config.lexicons.med:
            lexicons[RuleName.MED_PRESENCE] = load_lexicon(self.config.lexicons.med, 'med')
        if self.config.lexicons.wh:
            lexicons[RuleName.WOMENS_HEALTH] = load_lexicon(self.config.lexicons.wh, 'wh')
        return lexicons

    @staticmethod
    def _load_entry(entry: CorpusEntry, default_name: str) -> Corpus:
        name = entry.name or default_name
        if entry.path:
            return load_corpus(entry.path, format=entry.format, name=name)
        synthetic = entry.synthetic
        return generate_synthetic(synthetic.n_pos, synthetic.n_neg, synthetic.weights(), lang=synthetic.lang,
                                  seed=synthetic.seed, source=synthetic.source, name=name)

    def ingest(self) -> List[str]:
        """读取或生成目标语言与源语言语料，写入运行目录 data/"""
        logger.info("读取语料")
        self.target_raw = self._load_entry(self.config.data.target, 'target')
        outputs = [save_corpus(self.target_raw, os.path.join(self.layout.data_dir, 'target.jsonl'))]

        sources = [self._load_entry(entry, f"{self.config.data.source_name}_{i}")
                   for i, entry in enumerate(self.config.data.source)]
        if len(sources) == 1:
            self.source_raw = sources[0].with_name(self.config.data.source_name)
        elif sources:
            self.source_raw = combine(sources, self.config.data.source_name)
        if self.source_raw is not None:
            outputs.append(save_corpus(self.source_raw, os.path.join(self.layout.data_dir, 'source.jsonl')))

        self.manifest.record('ingest', self.config_hash, outputs=outputs,
                             n_target=len(self.target_raw),
                             n_source=len(self.source_raw) if self.source_raw is not None else 0)
        return outputs

    def prepare(self) -> PreparedData:
        """
        划分原始语料后分别预处理

        目标语言：分层划分为 train/dev 与 test；源语言：同样划分，其 train/dev 再分出第一阶段的 dev。
        """
        if self.data is not None:
            return self.data
        if self.target_raw is None:
            self.ingest()

        split = self.config.split
        preprocess_config = self.config.preprocess
        train_dev_raw, test_raw = stratified_split(self.target_raw, SplitSpec(split.test_fraction, split.seed))
        target_split = split_assignments(train_dev_raw, test_raw)
        train_dev, processed_td = normalize_corpus(train_dev_raw, preprocess_config)
        test, processed_test = normalize_corpus(test_raw, preprocess_config)
        dropped = {p.id for p in processed_td + processed_test if p.dropped}
        outputs = [
            save_split_assignments(target_split, os.path.join(self.layout.data_dir, 'target_split.jsonl')),
            save_corpus(train_dev, os.path.join(self.layout.data_dir, 'target_train_dev.jsonl')),
            save_corpus(test, os.path.join(self.layout.data_dir, 'target_test.jsonl')),
        ]
        data = PreparedData(
            target_train_dev=train_dev.with_name(f"{self.target_raw.name}_train_dev"),
            target_test=test.with_name(f"{self.target_raw.name}_test"),
            target_test_raw=test_raw.subset(test.ids, name=f"{self.target_raw.name}_test_raw"),
            test_docs=[p for p in processed_test if not p.dropped],
            processed_test={p.id: p for p in processed_test},
            target_split=target_split,
            dropped_ids=dropped,
        )
        logger.info(f"目标语言: train/dev {len(train_dev)}/{len(train_dev_raw)}，test {len(test)}/{len(test_raw)}"
                    f"（过滤后/过滤前）")

        if self.source_raw is not None:
            source_td_raw, source_test_raw = stratified_split(self.source_raw,
                                                              SplitSpec(split.test_fraction, split.seed))
            data.source_split = split_assignments(source_td_raw, source_test_raw)
            source_td, processed_std = normalize_corpus(source_td_raw, preprocess_config)
            source_test, processed_stest = normalize_corpus(source_test_raw, preprocess_config)
            data.source_dropped_ids = {p.id for p in processed_std + processed_stest if p.dropped}
            source_train, source_dev = stratified_split(source_td, SplitSpec(split.dev_fraction, split.seed))
            data.source_pool = source_td.with_name(f"{self.source_raw.name}_train_dev")
            data.source_train = source_train.with_name(f"{self.source_raw.name}_train")
            data.source_dev = source_dev.with_name(f"{self.source_raw.name}_dev")
            data.source_test = source_test.with_name(f"{self.source_raw.name}_test")
            data.source_test_docs = [p for p in processed_stest if not p.dropped]
            outputs.append(save_split_assignments(data.source_split,
                                                  os.path.join(self.layout.data_dir, 'source_split.jsonl')))
            logger.info(f"源语言: train {len(source_train)}，dev {len(source_dev)}，test {len(source_test)}")

        self.manifest.record('split', self.config_hash, seeds={'split_seed': split.seed}, outputs=outputs)
        self.data = data
        return data

    def stats(self, plots: Optional[bool] = None) -> List[str]:
        """写出目标语言与源语言的语料统计（含过滤前后的划分大小）"""
        data = self.prepare()
        plots = self.config.report.plots if plots is None else plots
        outputs = []
        corpora = [('target', self.target_raw, data.target_split, data.dropped_ids)]
        if self.source_raw is not None:
            corpora.append(('source', self.source_raw, data.source_split, data.source_dropped_ids))
        for side, corpus, split_labels, dropped in corpora:
            stats = compute_stats(corpus, split_labels=split_labels, dropped_ids=dropped)
            out_dir = os.path.join(self.layout.reports_dir(), f"stats_{side}")
            outputs += write_stats(stats, out_dir, name=corpus.name)
            if plots:
                outputs.append(plot_histograms(stats, os.path.join(out_dir, 'histogram.png'), title=corpus.name))
        self.manifest.record('stats', self.config_hash, outputs=outputs)
        return outputs

    def sample(self, spec: FewShotSpec, out_dir: Optional[str] = None) -> FewShotSets:
        """按小样本描述为单个采样种子构建集合并写出采样清单"""
        data = self.prepare()
        pool = enumerate_seed_pools(data.target_train_dev, [spec.sampling_seed])[0]
        source_pool = data.source_pool if spec.mode == FewShotMode.ADD_SOURCE else None
        sets = build_fewshot_sets(pool, source_pool, spec, held_out_ids=data.target_test.ids)
        out_dir = out_dir or self.layout.path('samples', f"{spec.mode.value}_{spec.shots}", str(spec.sampling_seed))
        path = write_manifest(sets, os.path.join(out_dir, 'manifest.jsonl'))
        self.manifest.record('sample', self.config_hash, seeds={'sampling_seed': spec.sampling_seed},
                             outputs=[path], fewshot=spec.label)
        return sets

    # ------------------------------------------------------------------
    # 后端与第一阶段
    # ------------------------------------------------------------------

    def _embeddings(self):
        section = self.config.embeddings
        if section.kind == 'hashed':
            return HashedEmbeddingSource(dim=section.dim, seed=section.seed)
        sources = {lang: KeyedVectorsEmbeddingSource.load(path, lowercase=section.lowercase,
                                                          is_aligned=section.aligned)
                   for lang, path in section.files.items()}
        return MultilingualEmbeddingSource(sources, is_aligned=section.aligned)

    def build_backend(self, name: str) -> ClassifierBackend:
        if name in self._backends:
            return self._backends[name]
        section = self.config.backends.get(name)
        if section is None:
            raise ConfigError(f"后端 {name} 没有 backends 配置")
        if name == 'svm':
            backend = get_backend('svm', embeddings=self._embeddings(), class_weight=section.class_weight)
        elif name == 'transformer':
            backend = get_backend('transformer', registry=load_model_registry(self.config.model_registry))
        else:
            backend = get_backend(name)
        self._backends[name] = backend
        return backend

    def train_source(self, backend_name: str, model_seeds: Optional[Sequence[int]] = None) -> Dict[int, TrainedModel]:
        """
        第一阶段：每个模型种子在源语言数据上训练一个模型，并在源语言测试集上评估

        已有完成标记的检查点直接加载。

        Returns:
            模型种子 -> 第一阶段模型
        """
        section = self.config.backends.get(backend_name)
        if section is None or section.stage1 is None:
            raise ConfigError(f"后端 {backend_name} 没有 stage1 配置")
        data = self.prepare()
        if data.source_train is None:
            raise ConfigError("第一阶段训练需要源语言数据 data.source")

        backend = self.build_backend(backend_name)
        seeds = list(model_seeds or self.config.ensemble.model_seeds)
        models = self._stage1.setdefault(backend_name, {})
        outputs = []
        reports: List[MetricsReport] = []
        for seed in seeds:
            stage_dir = self.layout.stage1_dir(backend_name, seed)
            checkpoint = os.path.join(stage_dir, 'checkpoint')
            if seed not in models:
                if is_done(stage_dir) and os.path.isdir(checkpoint):
                    logger.info(f"[stage1 {backend_name} seed={seed}] 加载已有检查点")
                    models[seed] = backend.load_model(checkpoint)
                else:
                    model = fit_stage1(backend, data.source_train, data.source_dev, section.stage1.with_seed(seed))
                    model.save(checkpoint)
                    mark_done(stage_dir, {'model_seed': seed, 'best_epoch': model.best_epoch})
                    models[seed] = model
        if (backend_name, tuple(seeds)) in self._source_evaluated:
            return {seed: models[seed] for seed in seeds}

        for seed in seeds:
            stage_dir = self.layout.stage1_dir(backend_name, seed)
            predictions = predict(models[seed], data.source_test_docs)
            predictions_path = write_predictions_csv(predictions, os.path.join(stage_dir, 'source_test_predictions.csv'))
            outputs.append(predictions_path)
            gold = {doc.id: doc.label for doc in data.source_test}
            reports.append(report(confusion_by_id({p.doc_id: p.label for p in predictions}, gold)))

        result = aggregate_reports(reports, seeds) if len(reports) > 1 else single_result(reports[0], seeds[0])
        outputs += write_seed_table(result, os.path.join(self.layout.reports_dir(), f"stage1_{backend_name}"),
                                    stem='source_results', decimals=self.config.report.decimals)
        self._source_evaluated.add((backend_name, tuple(seeds)))
        logger.info(f"第一阶段 {backend_name}: 源语言测试集 F1_m={result.mean_report.f1_macro:.2f}")
        self.manifest.record('train-source', self.config_hash, seeds={'model_seeds': seeds}, outputs=outputs,
                             backend=backend_name)
        return {seed: models[seed] for seed in seeds}

    # ------------------------------------------------------------------
    # 场景
    # ------------------------------------------------------------------

    def scenario(self, name: str) -> ScenarioConfig:
        for scenario in self.config.scenarios:
            if scenario.name == name:
                return scenario
        raise ConfigError(f"未知场景: {name}，可选 {[s.name for s in self.config.scenarios]}")

    def _runner(self, backend: ClassifierBackend) -> GridRunner:
        experiment = self.config.experiment
        return GridRunner(backend, self.layout, max_workers=experiment.max_workers, strict=experiment.strict,
                          lexicons=self.lexicons if self.config.report.postprocess else None,
                          save_checkpoints=experiment.save_checkpoints,
                          rule_corpus=self.data.target_test_raw if self.data is not None else None)

    def run_scenario(self, scenario: ScenarioConfig) -> ScenarioResult:
        """执行单个场景（zero_shot / full / few_shot），已完成的模型任务跳过"""
        logger.info(f"开始场景 {scenario.name} ({scenario.kind}, {scenario.backend})")
        data = self.prepare()
        spec = self.config.ensemble_spec(scenario)
        backend = self.build_backend(scenario.backend)
        section = self.config.backends[scenario.backend]
        two_stage = backend.capabilities.two_stage

        if scenario.kind == 'zero_shot':
            result = self._run_zero_shot(scenario, spec)
        else:
            if scenario.kind == 'full':
                pools = [data.target_train_dev] * len(spec.sampling_seeds)
                dev_fraction = self.config.split.dev_fraction

                def build_sets(pool: Corpus, seed: int) -> FewShotSets:
                    return build_full_data_sets(pool, seed, dev_fraction)

                # 全量数据模型同样从第一阶段模型继续微调（不冻结，按类别加权采样）
                stage1_models: Dict[int, TrainedModel] = (self.train_source(scenario.backend, spec.model_seeds)
                                                          if two_stage else {})
                train_config = section.full
            else:
                pools = enumerate_seed_pools(data.target_train_dev, spec.sampling_seeds)
                fewshot = spec.fewshot_spec
                source_pool = data.source_pool if fewshot.mode == FewShotMode.ADD_SOURCE else None
                held_out = data.target_test.ids

                def build_sets(pool: Corpus, seed: int) -> FewShotSets:
                    return build_fewshot_sets(pool, source_pool, fewshot.with_seed(seed), held_out_ids=held_out)

                stage1_models = self.train_source(scenario.backend, spec.model_seeds) if two_stage else {}
                train_config = section.stage2
            result = self._runner(backend).run_grid(scenario.name, spec, pools, build_sets, stage1_models,
                                                    train_config, data.target_test, data.test_docs)

        self.results[scenario.name] = result
        self._ran[scenario.name] = scenario
        n_fits = sum(o.n_fits for o in result.outcomes)
        n_skipped = sum(o.n_skipped for o in result.outcomes)
        outputs = [self.layout.path('runs', scenario.name, str(o.sampling_seed), 'votes.csv')
                   for o in result.outcomes if o.success]
        self.manifest.record('run', self.config_hash,
                             seeds={'model_seeds': spec.model_seeds, 'sampling_seeds': [o.sampling_seed for o in result.outcomes]},
                             outputs=outputs, scenario=scenario.name, n_fits=n_fits, n_skipped=n_skipped,
                             failures=[o.sampling_seed for o in result.failures])
        logger.info(f"场景 {scenario.name} 完成: 训练 {n_fits} 个模型，跳过 {n_skipped} 个，"
                    f"F1_1={result.aggregate.mean_report.f1_1:.2f}")
        return result

    def _run_zero_shot(self, scenario: ScenarioConfig, spec: EnsembleSpec) -> ScenarioResult:
        """第一阶段模型直接预测目标语言测试集，只投票一次，没有第二阶段训练"""
        data = self.prepare()
        stage1_models = self.train_source(scenario.backend, spec.model_seeds)
        predictions_by_model: Dict[int, List[Prediction]] = {}
        n_skipped = 0
        for seed in spec.model_seeds:
            model_dir = self.layout.model_dir(scenario.name, ZERO_SHOT_SEED, seed)
            predictions_path = os.path.join(model_dir, 'predictions.csv')
            if is_done(model_dir) and os.path.exists(predictions_path):
                predictions_by_model[seed] = read_predictions_csv(predictions_path)
                n_skipped += 1
                continue
            predictions_by_model[seed] = predict(stage1_models[seed], data.test_docs)
            write_predictions_csv(predictions_by_model[seed], predictions_path)
            mark_done(model_dir, {'model_seed': seed, 'sampling_seed': ZERO_SHOT_SEED})

        lexicons = self.lexicons if self.config.report.postprocess else None
        outcome = vote_and_score(predictions_by_model, spec.model_seeds, data.target_test, spec, lexicons,
                                 rule_corpus=data.target_test_raw)
        outcome.sampling_seed = ZERO_SHOT_SEED
        outcome.n_skipped = n_skipped
        write_votes_csv(outcome.votes, os.path.join(self.layout.seed_dir(scenario.name, ZERO_SHOT_SEED), 'votes.csv'))
        return self._single_result(scenario.name, outcome)

    @staticmethod
    def _single_result(name: str, outcome: SeedOutcome) -> ScenarioResult:
        result = ScenarioResult(name=name, outcomes=[outcome])
        result.aggregate = single_result(outcome.report, outcome.sampling_seed)
        result.rule_aggregates = {rule: single_result(r, outcome.sampling_seed)
                                  for rule, r in outcome.rule_reports.items()}
        return result

    def run(self, scenario_names: Optional[Sequence[str]] = None) -> Dict[str, ScenarioResult]:
        """执行指定场景（默认全部），失败场景记录到清单后继续，最后写出报告"""
        scenarios = [self.scenario(n) for n in scenario_names] if scenario_names else list(self.config.scenarios)
        if not scenarios:
            raise ConfigError("配置中没有场景")
        self.prepare()
        failed = []
        for scenario in scenarios:
            try:
                self.run_scenario(scenario)
            except GridError as e:
                logger.error(f"场景 {scenario.name} 失败: {e}")
                self.manifest.record('run', self.config_hash, status='failed', scenario=scenario.name, error=str(e))
                failed.append(scenario.name)
        if self.results:
            self.write_reports()
        if failed:
            raise GridError(f"{len(failed)} 个场景失败: {failed}")
        return self.results

    # ------------------------------------------------------------------
    # 报告
    # ------------------------------------------------------------------

    def _report_rows(self, scenario: ScenarioConfig, result: ScenarioResult):
        rows = [(scenario.row_label, result.aggregate)]
        if self.config.report.postprocess:
            for rule in (RuleName.MED_PRESENCE, RuleName.WOMENS_HEALTH):
                if rule in result.rule_aggregates:
                    rows.append((f"{scenario.row_label} +{rule.short}", result.rule_aggregates[rule]))
        return rows

    def write_reports(self) -> List[str]:
        """汇总表（每个场景一行，附后处理行）、每个场景的种子表，以及最佳场景的错误分析"""
        decimals = self.config.report.decimals
        outputs = []
        rows = []
        finished = [s for s in self.config.scenarios if s.name in self.results]
        configured = {s.name for s in finished}
        finished += [s for name, s in self._ran.items() if name not in configured and name in self.results]
        for scenario in finished:
            result = self.results[scenario.name]
            scenario_rows = self._report_rows(scenario, result)
            rows += scenario_rows
            scenario_dir = self.layout.scenario_dir(scenario.name)
            outputs += write_aggregate(scenario_rows, scenario_dir, decimals, title=scenario.name)
            extra = {o.sampling_seed: {'prob_auc': round(o.prob_auc, decimals)}
                     for o in result.outcomes if o.success and o.prob_auc is not None}
            outputs += write_seed_table(result.aggregate, scenario_dir, stem='seed_results', decimals=decimals,
                                        extra=extra or None)
        outputs += write_aggregate(rows, self.layout.reports_dir(), decimals, title=self.config.experiment.name)

        if self.config.report.error_analysis and finished:
            best = max(finished, key=lambda s: self.results[s.name].aggregate.mean_report.f1_1)
            outcome = max((o for o in self.results[best.name].outcomes if o.success),
                          key=lambda o: o.report.f1_1)
            outputs += write_error_analysis(self.data.target_test, outcome.votes,
                                            os.path.join(self.layout.reports_dir(), 'error_analysis'),
                                            processed=self.data.processed_test)
            logger.info(f"错误分析使用场景 {best.name} 的采样种子 {outcome.sampling_seed}")

        self.manifest.record('report', self.config_hash, outputs=outputs,
                             scenarios=[s.name for s in finished])
        return outputs

    def load_scenario_result(self, scenario: ScenarioConfig) -> Optional[ScenarioResult]:
        """从运行目录中的 votes.csv 与预测文件重新计算场景结果"""
        data = self.prepare()
        spec = self.config.ensemble_spec(scenario)
        seeds = [ZERO_SHOT_SEED] if scenario.kind == 'zero_shot' else list(spec.sampling_seeds)
        lexicons = self.lexicons if self.config.report.postprocess else None
        outcomes = []
        for seed in seeds:
            votes_path = os.path.join(self.layout.seed_dir(scenario.name, seed), 'votes.csv')
            if not os.path.exists(votes_path):
                continue
            outcome = score_votes(read_votes_csv(votes_path), data.target_test, lexicons, data.target_test_raw)
            outcome.sampling_seed = seed
            predictions = {}
            for model_seed in spec.model_seeds:
                path = os.path.join(self.layout.model_dir(scenario.name, seed, model_seed), 'predictions.csv')
                if os.path.exists(path):
                    predictions[model_seed] = read_predictions_csv(path)
            if len(predictions) == len(spec.model_seeds):
                outcome.prob_auc = ensemble_auc(predictions, spec.model_seeds, data.target_test)
            outcomes.append(outcome)

        if not outcomes:
            return None
        if scenario.kind == 'zero_shot':
            return self._single_result(scenario.name, outcomes[0])
        backend = self.build_backend(scenario.backend)
        return self._runner(backend).aggregate(scenario.name, spec, outcomes)

    def rebuild_reports(self) -> List[str]:
        """只根据运行目录中的投票文件重建报告，不训练"""
        for scenario in self.config.scenarios:
            try:
                result = self.load_scenario_result(scenario)
            except GridError as e:
                logger.warning(f"场景 {scenario.name} 无法重建: {e}")
                continue
            if result is None:
                logger.warning(f"场景 {scenario.name} 没有投票文件，跳过")
                continue
            self.results[scenario.name] = result
            self._ran[scenario.name] = scenario
        if not self.results:
            raise GridError(f"运行目录 {self.layout.root} 中没有可用的场景结果")
        return self.write_reports()
