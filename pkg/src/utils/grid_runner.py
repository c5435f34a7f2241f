"""
实验网格执行器
模型种子 × 采样种子的第二阶段训练任务在有界线程池中并行执行，完成后按采样种子投票与聚合
"""
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from src.backends.base import (
    ClassifierBackend, Prediction, TrainConfig, TrainedModel, fit_stage2, predict,
)
from src.tasks.ensemble_voting import (
    AggregateResult, EnsembleSpec, VoteRecord, aggregate_reports, majority_vote, mean_scores,
)
from src.tools.corpus_tools import Corpus
from src.tools.lexicon_tools import Lexicon, RuleName, evaluate_rules
from src.tools.metrics_tools import MetricsReport, auc_from_scores, confusion_by_id, report
from src.tools.preprocess_tools import ProcessedDocument
from src.tools.reporting_tools import read_predictions_csv, write_predictions_csv, write_votes_csv
from src.tools.sampling_tools import FewShotSets, write_manifest
from src.utils.errors import GridError, UndefinedMetricError
from src.utils.run_manifest import RunLayout, is_done, mark_done

logger = logging.getLogger(__name__)

SetBuilder = Callable[[Corpus, int], FewShotSets]


@dataclass
class SeedOutcome:
    """单个采样种子的结果"""

    sampling_seed: int
    success: bool
    votes: List[VoteRecord] = field(default_factory=list)
    report: Optional[MetricsReport] = None
    rule_reports: Dict[RuleName, MetricsReport] = field(default_factory=dict)
    prob_auc: Optional[float] = None
    n_fits: int = 0
    n_skipped: int = 0
    error: Optional[str] = None


@dataclass
class ScenarioResult:
    """一个场景在全部采样种子上的结果"""

    name: str
    outcomes: List[SeedOutcome]
    aggregate: Optional[AggregateResult] = None
    rule_aggregates: Dict[RuleName, AggregateResult] = field(default_factory=dict)

    @property
    def failures(self) -> List[SeedOutcome]:
        return [o for o in self.outcomes if not o.success]

    @property
    def votes_by_seed(self) -> Dict[int, List[VoteRecord]]:
        return {o.sampling_seed: o.votes for o in self.outcomes if o.success}


def score_votes(records: Sequence[VoteRecord], test: Corpus,
                lexicons: Optional[Mapping[RuleName, Lexicon]] = None,
                rule_corpus: Optional[Corpus] = None) -> SeedOutcome:
    """对一组投票记录计算指标与后处理指标；规则在 rule_corpus（未掩码未截断的原文）上匹配，缺省时用 test"""
    finals = {r.doc_id: r.final for r in records}
    gold = {doc.id: doc.label for doc in test}
    outcome = SeedOutcome(sampling_seed=-1, success=True, votes=list(records))
    outcome.report = report(confusion_by_id(finals, gold))
    if lexicons:
        outcome.rule_reports = evaluate_rules(finals, rule_corpus if rule_corpus is not None else test, lexicons)
    return outcome


def ensemble_auc(predictions_by_model: Mapping[int, Sequence[Prediction]], model_seeds: Sequence[int],
                 test: Corpus) -> Optional[float]:
    """各模型正类分数取平均后的概率 AUC，无定义时为 None"""
    by_model = {seed: {p.doc_id: p.score for p in preds} for seed, preds in predictions_by_model.items()}
    scores = mean_scores({doc.id: [by_model[seed][doc.id] for seed in model_seeds] for doc in test})
    gold = {doc.id: doc.label for doc in test}
    try:
        return auc_from_scores([gold[i] for i in scores], list(scores.values()))
    except UndefinedMetricError:
        return None


def vote_and_score(predictions_by_model: Mapping[int, Sequence[Prediction]], model_seeds: Sequence[int],
                   test: Corpus, spec: EnsembleSpec,
                   lexicons: Optional[Mapping[RuleName, Lexicon]] = None,
                   rule_corpus: Optional[Corpus] = None) -> SeedOutcome:
    """
    按模型种子顺序汇总投票、计算指标与后处理指标

    Args:
        predictions_by_model: 模型种子 -> 对测试集的预测
        model_seeds: 投票者顺序
        test: 测试语料（金标准）
        spec: 集成描述（平票规则）
        lexicons: 规则 -> 词表
        rule_corpus: 规则匹配用的原始测试文档，ID 与 test 一致
    """
    by_model = {seed: {p.doc_id: p for p in preds} for seed, preds in predictions_by_model.items()}
    missing = [seed for seed in model_seeds if seed not in by_model]
    if missing:
        raise GridError(f"缺少模型种子 {missing} 的预测")
    votes_per_doc = {doc.id: [by_model[seed][doc.id].label for seed in model_seeds] for doc in test}
    records = majority_vote(votes_per_doc, spec.tie_break)
    outcome = score_votes(records, test, lexicons, rule_corpus)
    outcome.prob_auc = ensemble_auc(predictions_by_model, model_seeds, test)
    return outcome


class GridRunner:
    """网格执行器，已完成的模型任务（有预测文件与完成标记）在重跑时跳过"""

    def __init__(self, backend: ClassifierBackend, layout: RunLayout, max_workers: int = 4,
                 strict: bool = False, lexicons: Optional[Mapping[RuleName, Lexicon]] = None,
                 save_checkpoints: bool = False, rule_corpus: Optional[Corpus] = None):
        """
        Args:
            backend: 分类器后端
            layout: 运行目录布局
            max_workers: 最大并发任务数
            strict: 为 True 时任何采样种子失败都使整个场景失败
            lexicons: 后处理词表
            save_checkpoints: 是否保存第二阶段模型参数
            rule_corpus: 后处理规则匹配用的原始测试文档
        """
        self.backend = backend
        self.layout = layout
        self.max_workers = max_workers
        self.strict = strict
        self.lexicons = dict(lexicons or {})
        self.save_checkpoints = save_checkpoints
        self.rule_corpus = rule_corpus
        self.lock = threading.Lock()
        self.progress = {'total': 0, 'completed': 0, 'skipped': 0, 'failed': 0}

    def _model_job(self, scenario: str, sampling_seed: int, model_seed: int, sets: FewShotSets,
                   stage1_model: Optional[TrainedModel], config: TrainConfig,
                   test_docs: Sequence[ProcessedDocument]) -> Tuple[List[Prediction], bool]:
        """训练并预测单个模型，返回 (预测, 是否跳过)"""
        model_dir = self.layout.model_dir(scenario, sampling_seed, model_seed)
        predictions_path = os.path.join(model_dir, 'predictions.csv')
        if is_done(model_dir) and os.path.exists(predictions_path):
            logger.debug(f"[{scenario}/{sampling_seed}/model_{model_seed}] 已完成，跳过")
            return read_predictions_csv(predictions_path), True

        seeded = config.with_seed(model_seed)
        if stage1_model is not None:
            model = fit_stage2(stage1_model, sets, seeded)
        else:
            model = self.backend.train(sets.train, sets.dev, seeded)
        predictions = predict(model, test_docs)

        os.makedirs(model_dir, exist_ok=True)
        model.save_training_log(os.path.join(model_dir, 'training_log.csv'))
        if self.save_checkpoints:
            model.save(os.path.join(model_dir, 'checkpoint'))
        write_predictions_csv(predictions, predictions_path)
        mark_done(model_dir, {'model_seed': model_seed, 'sampling_seed': sampling_seed,
                              'best_epoch': model.best_epoch})
        return predictions, False

    def run_grid(self, scenario: str, spec: EnsembleSpec, pools: Sequence[Corpus], build_sets: SetBuilder,
                 stage1_models: Mapping[int, TrainedModel], stage2_config: TrainConfig,
                 test: Corpus, test_docs: Sequence[ProcessedDocument]) -> ScenarioResult:
        """
        执行一个场景的完整网格

        Args:
            scenario: 场景名（运行目录子目录）
            spec: 集成描述
            pools: 与 spec.sampling_seeds 一一对应的语料池
            build_sets: (语料池, 采样种子) -> 训练/开发集合
            stage1_models: 模型种子 -> 第一阶段模型；单阶段后端为空
            stage2_config: 第二阶段训练配置（model_seed 按任务替换）
            test: 固定测试语料
            test_docs: 测试语料的预处理结果

        Returns:
            场景结果
        """
        if len(pools) != len(spec.sampling_seeds):
            raise GridError(f"语料池数 {len(pools)} 与采样种子数 {len(spec.sampling_seeds)} 不一致")
        missing = [s for s in spec.model_seeds if stage1_models and s not in stage1_models]
        if missing:
            raise GridError(f"缺少第一阶段模型: {missing}")

        logger.info(f"场景 {scenario}: {len(spec.sampling_seeds)} 个采样种子 × {len(spec.model_seeds)} 个模型种子")
        outcomes: Dict[int, SeedOutcome] = {}
        seed_sets: Dict[int, FewShotSets] = {}
        for sampling_seed, pool in zip(spec.sampling_seeds, pools):
            try:
                sets = build_sets(pool, sampling_seed)
                write_manifest(sets, os.path.join(self.layout.seed_dir(scenario, sampling_seed), 'manifest.jsonl'))
                seed_sets[sampling_seed] = sets
            except Exception as e:
                logger.error(f"[{scenario}/{sampling_seed}] 构建训练集合失败: {e}")
                outcomes[sampling_seed] = SeedOutcome(sampling_seed=sampling_seed, success=False, error=str(e))

        self.progress = {'total': len(seed_sets) * len(spec.model_seeds), 'completed': 0, 'skipped': 0, 'failed': 0}
        results: Dict[int, Dict[int, List[Prediction]]] = {s: {} for s in seed_sets}
        errors: Dict[int, List[str]] = {s: [] for s in seed_sets}
        skipped: Dict[int, int] = {s: 0 for s in seed_sets}

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            future_to_job = {
                executor.submit(self._model_job, scenario, sampling_seed, model_seed, sets,
                                stage1_models.get(model_seed) if stage1_models else None,
                                stage2_config, test_docs): (sampling_seed, model_seed)
                for sampling_seed, sets in seed_sets.items()
                for model_seed in spec.model_seeds
            }
            for future in as_completed(future_to_job):
                sampling_seed, model_seed = future_to_job[future]
                try:
                    predictions, was_skipped = future.result()
                    with self.lock:
                        results[sampling_seed][model_seed] = predictions
                        self.progress['completed'] += 1
                        if was_skipped:
                            skipped[sampling_seed] += 1
                            self.progress['skipped'] += 1
                except Exception as e:
                    logger.error(f"[{scenario}/{sampling_seed}/model_{model_seed}] 任务失败: {e}")
                    with self.lock:
                        errors[sampling_seed].append(f"model_{model_seed}: {e}")
                        self.progress['failed'] += 1

        for sampling_seed in seed_sets:
            if errors[sampling_seed]:
                outcomes[sampling_seed] = SeedOutcome(sampling_seed=sampling_seed, success=False,
                                                      error="; ".join(errors[sampling_seed]))
                continue
            outcome = vote_and_score(results[sampling_seed], spec.model_seeds, test, spec, self.lexicons,
                                     rule_corpus=self.rule_corpus)
            outcome.sampling_seed = sampling_seed
            outcome.n_skipped = skipped[sampling_seed]
            outcome.n_fits = len(spec.model_seeds) - skipped[sampling_seed]
            write_votes_csv(outcome.votes, os.path.join(self.layout.seed_dir(scenario, sampling_seed), 'votes.csv'))
            outcomes[sampling_seed] = outcome
            logger.info(f"[{scenario}/{sampling_seed}] F1_1={outcome.report.f1_1:.2f} F1_m={outcome.report.f1_macro:.2f}"
                        f" (训练 {outcome.n_fits}，跳过 {outcome.n_skipped})")

        ordered = [outcomes[s] for s in spec.sampling_seeds]
        return self.aggregate(scenario, spec, ordered)

    def aggregate(self, scenario: str, spec: EnsembleSpec, outcomes: List[SeedOutcome]) -> ScenarioResult:
        """跨采样种子聚合；失败种子只记录日志，strict 模式或成功不足 2 个时抛出 GridError"""
        result = ScenarioResult(name=scenario, outcomes=outcomes)
        succeeded = [o for o in outcomes if o.success]
        failed = [o for o in outcomes if not o.success]
        if failed:
            logger.warning(f"场景 {scenario}: {len(failed)} 个采样种子失败 {[o.sampling_seed for o in failed]}")
        if self.strict and failed:
            raise GridError(f"场景 {scenario} 在 strict 模式下有采样种子失败: "
                            + "; ".join(f"{o.sampling_seed}: {o.error}" for o in failed))
        if len(succeeded) < 2:
            raise GridError(f"场景 {scenario} 成功的采样种子不足 2 个（成功 {len(succeeded)}）")

        seeds = [o.sampling_seed for o in succeeded]
        result.aggregate = aggregate_reports([o.report for o in succeeded], seeds, spec.std_ddof)
        for rule in self.lexicons:
            rule = RuleName.parse(rule)
            result.rule_aggregates[rule] = aggregate_reports([o.rule_reports[rule] for o in succeeded],
                                                             seeds, spec.std_ddof)
        return result


def run_grid(spec: EnsembleSpec, pools: Sequence[Corpus], backend: ClassifierBackend,
             stage1_models: Mapping[int, TrainedModel], *, build_sets: SetBuilder, stage2_config: TrainConfig,
             test: Corpus, test_docs: Sequence[ProcessedDocument], layout: RunLayout,
             scenario: str = "scenario", max_workers: int = 4, strict: bool = False,
             lexicons: Optional[Mapping[RuleName, Lexicon]] = None,
             rule_corpus: Optional[Corpus] = None
             ) -> Tuple[Dict[int, List[VoteRecord]], AggregateResult]:
    """函数式入口：返回 (采样种子 -> 投票记录, 聚合结果)"""
    runner = GridRunner(backend, layout, max_workers=max_workers, strict=strict, lexicons=lexicons,
                        rule_corpus=rule_corpus)
    result = runner.run_grid(scenario, spec, pools, build_sets, stage1_models, stage2_config, test, test_docs)
    return result.votes_by_seed, result.aggregate
